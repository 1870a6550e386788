"""Command-line entry point.

``etdm run`` super-resolves a directory of frames:

    etdm run --input lr_dir --output sr_dir [--hr hr_dir] --scale 4 \\
        --sigma 1.6 --tau 0.0392 --buffer 3 --heads network|oracle \\
        --weights FILE | --seed INT [--dump-masks] [--dump-buffers] \\
        [--loss-norm perpixel|global] [--report FILE.csv] [--config FILE]

A config file holds the same keys as the long flags (key=value, one per
line, ``-`` or ``_`` separated); explicit flags win over file values.
Exit codes: 0 success, 2 input error, 3 config error, 4 weight-file
error.

Conventions worth knowing: the cubic resampler uses the a = -0.5 kernel
with antialiasing on the degradation downsample and plain cubic for the
reference upsample, and quality metrics use BT.601 studio-swing luma;
both follow the usual evaluation toolchain for these benchmarks.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .frameio import load_sequence, save_sequence_png
from .image import HR, LR
from .pipeline import (
    ConfigError,
    InputError,
    PipelineConfig,
    run_sequence,
    summary_line,
    write_report,
)
from .weights import NetworkConfig, WeightFormatError, init_weights, load_weights

_CONFIG_KEYS = {
    "input": str,
    "output": str,
    "hr": str,
    "scale": int,
    "sigma": float,
    "tau": float,
    "buffer": int,
    "heads": str,
    "weights": str,
    "seed": int,
    "dump_masks": bool,
    "dump_buffers": bool,
    "loss_norm": str,
    "report": str,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etdm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="super-resolve a sequence of frames")
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--input", help="directory of LR frame_%%05d.png/.raw files")
    run.add_argument("--output", help="directory for SR frames")
    run.add_argument("--hr", help="directory of ground-truth HR frames (enables metrics)")
    run.add_argument("--scale", type=int, help="upscale factor (default 4)")
    run.add_argument("--sigma", type=float, help="degradation blur sigma (default 1.6)")
    run.add_argument("--tau", type=float, help="mask threshold on luma difference (default 10/255)")
    run.add_argument("--buffer", type=int, help="past/future buffer size N; 0 disables refinement")
    run.add_argument("--heads", help="'network' or 'oracle'")
    run.add_argument("--weights", help="weight file (wins over --seed)")
    run.add_argument("--seed", type=int, help="seeded random weights (default 0)")
    run.add_argument("--dump-masks", action="store_true", default=None)
    run.add_argument("--dump-buffers", action="store_true", default=None)
    run.add_argument("--loss-norm", help="'perpixel' or 'global'")
    run.add_argument("--report", help="write per-frame CSV report here")
    return parser


def _parse_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ = _CONFIG_KEYS[key]
        try:
            if typ is bool:
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(value)
                out[key] = value.lower() in ("true", "1")
            else:
                out[key] = typ(value)
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from e
    return out


def _merged_option(args, file_values: dict, key: str, default):
    flag = getattr(args, key)
    if flag is not None:
        return flag, True
    if key in file_values:
        return file_values[key], True
    return default, False


def _cmd_run(args) -> int:
    file_values = _parse_config_file(args.config) if args.config else {}

    def opt(key, default):
        return _merged_option(args, file_values, key, default)

    input_dir, _ = opt("input", None)
    output_dir, _ = opt("output", None)
    if not input_dir:
        raise ConfigError("--input is required")
    if not output_dir:
        raise ConfigError("--output is required")
    hr_dir, _ = opt("hr", None)
    scale, scale_set = opt("scale", 4)
    sigma, _ = opt("sigma", 1.6)
    tau, _ = opt("tau", 10.0 / 255.0)
    buffer_n, buffer_set = opt("buffer", 3)
    heads, _ = opt("heads", "network")
    weights_path, _ = opt("weights", None)
    seed, _ = opt("seed", 0)
    dump_masks, _ = opt("dump_masks", False)
    dump_buffers, _ = opt("dump_buffers", False)
    loss_norm, _ = opt("loss_norm", "perpixel")
    report_path, _ = opt("report", None)

    if scale < 1:
        raise ConfigError(f"scale must be >= 1, got {scale}")
    if buffer_n < 0:
        raise ConfigError(f"buffer size must be >= 0, got {buffer_n}")

    if weights_path:
        net, weights = load_weights(weights_path)
        if scale_set and scale != net.scale:
            raise ConfigError(
                f"--scale {scale} conflicts with weight file scale {net.scale}"
            )
        if buffer_set and buffer_n != net.buffer_size:
            raise ConfigError(
                f"--buffer {buffer_n} conflicts with weight file buffer size {net.buffer_size}"
            )
    else:
        try:
            net = NetworkConfig(scale=scale, buffer_size=buffer_n)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        weights = init_weights(net, seed)

    config = PipelineConfig(
        net=net,
        weights=weights,
        sigma=sigma,
        tau=tau,
        head_mode=heads,
        loss_norm=loss_norm,
        dump_masks=dump_masks,
        dump_buffers=dump_buffers,
    )
    config.validate()

    try:
        lr_frames = load_sequence(input_dir, LR)
        hr_frames = load_sequence(hr_dir, HR) if hr_dir else None
    except (FileNotFoundError, ValueError) as e:
        raise InputError(str(e)) from e

    out_path = Path(output_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    sr_frames, report = run_sequence(lr_frames, config, hr_frames, dump_dir=out_path)
    save_sequence_png(sr_frames, out_path)
    if report_path:
        write_report(report, report_path)
    print(summary_line(report))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command != "run":
        parser.print_help()
        return 3
    try:
        return _cmd_run(args)
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except WeightFormatError as e:
        print(f"weight file error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
