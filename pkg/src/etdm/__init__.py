"""Video super-resolution with explicit temporal-difference modeling.

The package splits into small layers: dense conv kernels (:mod:`.conv`),
image-space filters and metrics (:mod:`.image`), temporal-difference
region masks (:mod:`.regions`), the recurrent network (:mod:`.network`,
:mod:`.weights`), the back-and-forth residual buffers (:mod:`.buffers`)
and the sequence driver (:mod:`.pipeline`).  The ``etdm`` command drives
a whole sequence from frame directories.
"""

from .buffers import (
    RefinementBuffers,
    SequenceLedger,
    accumulate_backward,
    accumulate_forward,
    oracle_direct,
    propagate_adjacent_backward,
    propagate_adjacent_forward,
)
from .conv import concat_channels, conv2d, pixel_shuffle, pixel_unshuffle, residual_block
from .image import (
    Frame,
    QualityReport,
    bicubic_resize,
    gaussian_blur,
    median3,
    morph_open_close,
    psnr,
    rgb_to_y,
    ssim,
)
from .network import ResidualTriple, branch_step, oracle_heads, reconstruct, refine, run_heads
from .pipeline import (
    ConfigError,
    InputError,
    PipelineConfig,
    SequenceReport,
    compute_losses,
    degrade_sequence,
    pad_sequence,
    run_sequence,
    upsample,
    write_report,
)
from .regions import DifferenceMasks, RegionSplit, build_masks, difference_map, split_regions
from .weights import (
    ConvLayer,
    NetworkConfig,
    WeightFormatError,
    init_weights,
    load_weights,
    save_weights,
    zero_weights,
)

__version__ = "0.1.0"
