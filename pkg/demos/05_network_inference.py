"""A full network-mode run with seeded weights, driven through the API.

Untrained weights do not reconstruct anything useful, but the run shows
the whole machinery working together: region masks, two recurrent
branches, trunk and heads, buffer-refined residuals, reconstruction, and
the CSV report.  The same run is reachable from the shell:

    etdm run --input LR_DIR --output SR_DIR --hr HR_DIR \
        --seed 0 --buffer 3 --report report.csv
"""

from pathlib import Path

import numpy as np

from etdm import (
    Frame,
    NetworkConfig,
    PipelineConfig,
    degrade_sequence,
    init_weights,
    run_sequence,
    save_weights,
    write_report,
)
from etdm.pipeline import summary_line

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(3)
hr = [Frame((rng.integers(0, 256, (3, 96, 96)) / 255).astype(np.float32), "hr") for _ in range(5)]
lr = degrade_sequence(hr)

net = NetworkConfig(
    branch_channels=16, branch_blocks=2, trunk_blocks=4,
    refine_channels=16, refine_blocks=4, scale=4, buffer_size=3,
)
weights = init_weights(net, seed=0)
save_weights(OUT / "seeded.etdm", net, weights)
print(f"wrote {OUT / 'seeded.etdm'} ({(OUT / 'seeded.etdm').stat().st_size} bytes)")

sr, report = run_sequence(lr, PipelineConfig(net=net, weights=weights), hr)
write_report(report, OUT / "report.csv")
print(f"wrote {OUT / 'report.csv'}")
print(summary_line(report))
for rec in report.frames:
    print(
        f"frame {rec.index}: psnr={rec.psnr_db:6.2f} ssim={rec.ssim:.4f} "
        f"loss_total={rec.losses.total:.4f}"
    )
