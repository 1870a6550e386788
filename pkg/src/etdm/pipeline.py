"""Sequence orchestration: degradation, padding, the per-step recurrence
with back-and-forth refinement, losses and reports.

The driver walks the padded sequence once.  For each step it builds the
region masks against both neighbors, advances the two branch hidden
states and evaluates the heads.  Refinement of a frame waits until the
head outputs of its N future steps exist, so the refinement target
trails the recurrence by N steps; frames are still emitted strictly in
order, and only a bounded window of head outputs is ever retained.  With
N = 0 refinement is disabled outright and no buffers are created.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .buffers import RefinementBuffers
from .frameio import save_mask_png, save_tensor_raw
from .image import HR, LR, UP, Frame, bicubic_resize, gaussian_blur, psnr, rgb_to_y, ssim
from .network import (
    AlignHook,
    ResidualTriple,
    branch_step,
    oracle_heads,
    reconstruct,
    refine,
    run_heads,
    zero_hidden,
)
from .regions import DEFAULT_TAU, build_masks, difference_map, split_regions
from .weights import ConvLayer, NetworkConfig, init_weights

__all__ = [
    "InputError",
    "ConfigError",
    "PipelineConfig",
    "LossRecord",
    "FrameRecord",
    "SequenceReport",
    "degrade_sequence",
    "pad_sequence",
    "upsample",
    "compute_losses",
    "run_sequence",
    "write_report",
]

DEFAULT_SIGMA = 1.6


class InputError(Exception):
    """Bad or missing input data (frames, directories)."""


class ConfigError(Exception):
    """Inconsistent or out-of-range configuration."""


@dataclass
class PipelineConfig:
    """Everything a sequence run needs besides the frames themselves.

    The architecture (scale factor, buffer size N, channel counts) lives
    in ``net``.  ``head_noise`` and ``refine_mode="average"`` are
    verification instrumentation: they perturb the oracle heads with
    seeded noise and replace the refinement network with a distance-
    weighted average of the buffer entries, which is how the buffer-size
    ablation is exercised without trained weights.
    """

    net: NetworkConfig = field(default_factory=NetworkConfig)
    weights: dict[str, ConvLayer] | None = None
    seed: int = 0
    sigma: float = DEFAULT_SIGMA
    tau: float = DEFAULT_TAU
    head_mode: str = "network"  # "network" | "oracle"
    refine_mode: str = "network"  # "network" | "average"
    loss_norm: str = "perpixel"  # "perpixel" | "global"
    epsilon: float = 1e-3
    align_hook: AlignHook | None = None
    head_noise: float = 0.0
    noise_seed: int = 0
    dump_masks: bool = False
    dump_buffers: bool = False

    def validate(self) -> None:
        if self.head_mode not in ("network", "oracle"):
            raise ConfigError(f"head_mode must be 'network' or 'oracle', got {self.head_mode!r}")
        if self.refine_mode not in ("network", "average"):
            raise ConfigError(f"refine_mode must be 'network' or 'average', got {self.refine_mode!r}")
        if self.loss_norm not in ("perpixel", "global"):
            raise ConfigError(f"loss_norm must be 'perpixel' or 'global', got {self.loss_norm!r}")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.head_noise < 0:
            raise ConfigError(f"head_noise must be >= 0, got {self.head_noise}")


@dataclass
class LossRecord:
    l_s: float
    l_s_refined: float
    l_f: float
    l_p: float
    total: float


@dataclass
class FrameRecord:
    index: int
    psnr_db: float | None
    ssim: float | None
    losses: LossRecord | None


@dataclass
class SequenceReport:
    """Per-frame quality plus aggregates excluding the first and last frame."""

    frames: list[FrameRecord]
    mean_psnr_db: float | None
    mean_ssim: float | None
    mean_loss: float | None


# -- per-frame preprocessing ------------------------------------------


def degrade_sequence(
    hr_frames: list[Frame], scale: int = 4, sigma: float = DEFAULT_SIGMA
) -> list[Frame]:
    """Gaussian blur then antialiased cubic downsampling, per frame."""
    if not hr_frames:
        raise InputError("empty sequence")
    out = []
    for i, f in enumerate(hr_frames):
        if f.height % scale or f.width % scale:
            raise InputError(
                f"frame {i} is {f.height}x{f.width}, not divisible by scale {scale}"
            )
        blurred = gaussian_blur(f, sigma)
        out.append(bicubic_resize(blurred, 1.0 / scale, antialias=True, tier=LR))
    return out


def pad_sequence(frames: list[Frame]) -> list[Frame]:
    """Duplicate the first and last frame so every frame has two neighbors."""
    if not frames:
        raise InputError("empty sequence")
    return [frames[0]] + list(frames) + [frames[-1]]


def upsample(lr: Frame, scale: int) -> Frame:
    """Cubic upsample of an LR frame (no antialiasing), tier 'up'."""
    return bicubic_resize(lr, float(scale), antialias=False, tier=UP)


# -- losses ------------------------------------------------------------


def _exact_mean(a: np.ndarray) -> float:
    # math.fsum is exactly rounded, so a constant array averages to its value
    return math.fsum(a.ravel()) / a.size


def _charbonnier(pred: np.ndarray, target: np.ndarray, epsilon: float, norm: str) -> float:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    d = pred - target
    if norm == "global":
        return math.sqrt(math.fsum((d * d).ravel()) + epsilon * epsilon)
    return _exact_mean(np.sqrt(d * d + epsilon * epsilon))


def compute_losses(
    triple: ResidualTriple,
    refined: np.ndarray,
    gt_triple: ResidualTriple,
    epsilon: float = 1e-3,
    norm: str = "perpixel",
) -> LossRecord:
    """Charbonnier distances of the head outputs to their ground truths.

    ``perpixel`` averages sqrt(d^2 + eps^2) over elements; ``global``
    puts the summed squared error under a single square root.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    l_s = _charbonnier(triple.s, gt_triple.s, epsilon, norm)
    l_sr = _charbonnier(refined, gt_triple.s, epsilon, norm)
    l_f = _charbonnier(triple.f, gt_triple.f, epsilon, norm)
    l_p = _charbonnier(triple.p, gt_triple.p, epsilon, norm)
    return LossRecord(l_s, l_sr, l_f, l_p, l_s + l_sr + l_f + l_p)


# -- the sequence driver ------------------------------------------------


@dataclass
class _StepOutput:
    triple: ResidualTriple
    gt: ResidualTriple | None


def _noisy(triple: ResidualTriple, amplitude: float, seed: int, step: int) -> ResidualTriple:
    rng = np.random.default_rng([seed, step])
    return ResidualTriple(
        s=triple.s + rng.normal(0.0, amplitude, triple.s.shape),
        p=triple.p + rng.normal(0.0, amplitude, triple.p.shape),
        f=triple.f + rng.normal(0.0, amplitude, triple.f.shape),
    )


def _average_refine(s_cur, past, past_valid, future, future_valid):
    # inverse-square distance weighting; entries further away carry more
    # accumulated noise, so they get less say
    acc = s_cur.copy()
    wsum = 1.0
    for l, (e, v) in enumerate(zip(past, past_valid), start=1):
        if v:
            w = 1.0 / (1 + l) ** 2
            acc += w * e
            wsum += w
    for l, (e, v) in enumerate(zip(future, future_valid), start=1):
        if v:
            w = 1.0 / (1 + l) ** 2
            acc += w * e
            wsum += w
    return acc / wsum


def run_sequence(
    lr_frames: list[Frame],
    config: PipelineConfig,
    hr_frames: list[Frame] | None = None,
    dump_dir: str | Path | None = None,
) -> tuple[list[Frame], SequenceReport]:
    """Super-resolve a sequence; one SR frame per input frame.

    ``hr_frames`` is required for oracle heads and enables metrics and
    losses.  The run is fully deterministic for a fixed config.
    """
    config.validate()
    net = config.net
    r = net.scale
    n = net.buffer_size

    if not lr_frames:
        raise InputError("empty sequence")
    shape0 = lr_frames[0].planes.shape
    for i, f in enumerate(lr_frames):
        if f.planes.shape != shape0:
            raise InputError(f"frame size drift: frame {i} is {f.planes.shape}, frame 0 is {shape0}")
        if f.channels != 3:
            raise InputError(f"frame {i} has {f.channels} channels, the pipeline expects RGB")
    want_losses = hr_frames is not None
    if config.head_mode == "oracle" and hr_frames is None:
        raise InputError("oracle head mode requires ground-truth HR frames")
    if hr_frames is not None:
        if len(hr_frames) != len(lr_frames):
            raise InputError(
                f"{len(hr_frames)} HR frames for {len(lr_frames)} LR frames"
            )
        for i, f in enumerate(hr_frames):
            if f.planes.shape != (3, shape0[1] * r, shape0[2] * r):
                raise InputError(f"HR frame {i} is {f.planes.shape}, expected {r}x the LR size")

    weights = config.weights if config.weights is not None else init_weights(net, config.seed)

    lr_pad = pad_sequence(lr_frames)
    hr_pad = pad_sequence(hr_frames) if hr_frames is not None else None
    ups = [upsample(f, r) for f in lr_pad]
    t_pad = len(lr_pad)
    first, last = 1, t_pad - 2  # interior steps of the padded sequence

    h, w = shape0[1], shape0[2]
    packed_shape = (net.packed_channels, h, w)
    h_lv = zero_hidden(net, h, w)
    h_hv = zero_hidden(net, h, w)

    buf = RefinementBuffers(n, packed_shape, start_t=first - n - 1) if n >= 1 else None
    history: dict[int, _StepOutput] = {}
    dump_dir = Path(dump_dir) if dump_dir is not None else None

    sr_frames: list[Frame] = [None] * len(lr_frames)  # type: ignore[list-item]
    records: list[FrameRecord] = [None] * len(lr_frames)  # type: ignore[list-item]

    def finalize(step: int) -> None:
        out = history[step]
        s_cur = out.triple.s
        if n == 0:
            s_refined = s_cur
        elif config.refine_mode == "average":
            s_refined = _average_refine(
                s_cur, buf.past_entries(), buf.past_valid(), buf.future_entries(), buf.future_valid()
            )
        else:
            s_refined = refine(s_cur, buf.past_entries(), buf.future_entries(), weights, net)
        sr = reconstruct(s_refined, ups[step], r)
        idx = step - 1
        sr_frames[idx] = sr
        psnr_db = ssim_val = losses = None
        if hr_frames is not None:
            sr_y = rgb_to_y(sr)
            hr_y = rgb_to_y(hr_frames[idx])
            psnr_db = psnr(sr_y, hr_y)
            ssim_val = ssim(sr_y, hr_y)
            losses = compute_losses(out.triple, s_refined, out.gt, config.epsilon, config.loss_norm)
        records[idx] = FrameRecord(idx, psnr_db, ssim_val, losses)
        if dump_dir is not None and config.dump_buffers and n >= 1:
            for side, entries in (("forth", buf.past_entries()), ("back", buf.future_entries())):
                for slot, e in enumerate(entries, start=1):
                    save_tensor_raw(
                        e,
                        dump_dir / f"buffer_{side}_t{idx:05d}_slot{slot}.raw",
                        {"t": idx, "slot": slot, "side": side},
                    )

    def hist_args(step: int):
        if first <= step <= last and step in history:
            out = history[step]
            return out.triple.s, out.triple.f, out.triple.p
        return None, None, None

    for u in range(first, last + 1):
        ref, prev, nxt = lr_pad[u], lr_pad[u - 1], lr_pad[u + 1]
        masks_prev = build_masks(difference_map(ref, prev), config.tau)
        masks_next = build_masks(difference_map(ref, nxt), config.tau)
        split_prev = split_regions(prev, masks_prev)
        split_next = split_regions(nxt, masks_next)
        if dump_dir is not None and config.dump_masks:
            idx = u - 1
            save_mask_png(masks_prev.m_lv, dump_dir / f"mask_lv_{idx:05d}_{max(idx - 1, 0):05d}.png")
            save_mask_png(
                masks_next.m_lv,
                dump_dir / f"mask_lv_{idx:05d}_{min(idx + 1, len(lr_frames) - 1):05d}.png",
            )

        h_lv = branch_step(h_lv, ref, split_prev.i_lv, split_next.i_lv, weights, net, "lv", config.align_hook)
        h_hv = branch_step(h_hv, ref, split_prev.i_hv, split_next.i_hv, weights, net, "hv", config.align_hook)

        gt = None
        if hr_pad is not None:
            gt = oracle_heads(
                hr_pad[u - 1], hr_pad[u], hr_pad[u + 1], ups[u - 1], ups[u], ups[u + 1], r
            )
        if config.head_mode == "oracle":
            triple = gt
            if config.head_noise > 0:
                triple = _noisy(triple, config.head_noise, config.noise_seed, u)
        else:
            triple = run_heads(h_lv, h_hv, weights, net)
        history[u] = _StepOutput(triple, gt)

        if n == 0:
            finalize(u)
            history.clear()
        else:
            s_past, f_past, _ = hist_args(u - n - 1)
            buf.update(s_past, triple.s, f_past, triple.p)
            if buf.t >= first:
                finalize(buf.t)
            history.pop(u - n - 2, None)

    if n >= 1:
        while buf.t < last:
            s_past, f_past, _ = hist_args(buf.t)
            buf.update(s_past, None, f_past, None)
            if buf.t >= first:
                finalize(buf.t)

    interior = records[1:-1]
    mean_psnr = _mean_or_none([rec.psnr_db for rec in interior])
    mean_ssim = _mean_or_none([rec.ssim for rec in interior])
    mean_loss = _mean_or_none([rec.losses.total for rec in records if rec.losses is not None])
    return sr_frames, SequenceReport(records, mean_psnr, mean_ssim, mean_loss)


def _mean_or_none(values: list) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


# -- reporting -----------------------------------------------------------


def write_report(report: SequenceReport, out_path: str | Path) -> None:
    """Write one CSV row per frame plus a trailing aggregate row.

    Infinities render as "inf", which round-trips through float().  Loss
    columns appear only when losses were computed; the aggregate row
    carries the means (quality metrics exclude the first and last frame,
    losses average over all frames).
    """
    import csv

    have_losses = any(rec.losses is not None for rec in report.frames)
    out_path = Path(out_path)
    try:
        fh = open(out_path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot write report to {out_path}: {e}") from e
    with fh:
        writer = csv.writer(fh)
        header = ["frame", "psnr_db", "ssim"]
        if have_losses:
            header += ["loss_s", "loss_s_refined", "loss_f", "loss_p", "loss_total"]
        writer.writerow(header)

        def fmt(v):
            return "" if v is None else repr(float(v))

        for rec in report.frames:
            row = [rec.index, fmt(rec.psnr_db), fmt(rec.ssim)]
            if have_losses:
                ls = rec.losses
                row += (
                    [fmt(ls.l_s), fmt(ls.l_s_refined), fmt(ls.l_f), fmt(ls.l_p), fmt(ls.total)]
                    if ls is not None
                    else [""] * 5
                )
            writer.writerow(row)
        summary = ["mean_excl_first_last", fmt(report.mean_psnr_db), fmt(report.mean_ssim)]
        if have_losses:
            summary += ["", "", "", "", fmt(report.mean_loss)]
        writer.writerow(summary)


def summary_line(report: SequenceReport) -> str:
    def show(v):
        return "n/a" if v is None else f"{v:.4f}"

    return (
        f"frames={len(report.frames)} "
        f"mean_psnr_db={show(report.mean_psnr_db)} mean_ssim={show(report.mean_ssim)} "
        f"(first and last frame excluded)"
    )
