"""The recurrent super-resolution stage, inference only.

Two recurrent branches (low-variance with dilation 1, high-variance with
a wider dilated receptive field) consume the masked neighbor regions plus
the reference frame and their previous hidden state.  Their outputs are
fused and sent through a residual trunk to three heads that predict, in
space-to-depth packed form, the spatial residual of the current frame and
its temporal differences toward the previous and next frames.  A separate
residual network refines the spatial residual with the propagated
entries of the past/future buffers before the final pixel shuffle.

``oracle_heads`` swaps the learned heads for the exact ground-truth
residuals computed from HR frames; it exists to prove the propagation
algebra downstream of the heads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conv import concat_channels, conv2d, pixel_shuffle, pixel_unshuffle, residual_block
from .image import HR, Frame
from .weights import ConvLayer, NetworkConfig

__all__ = [
    "ResidualTriple",
    "AlignHook",
    "branch_step",
    "run_heads",
    "oracle_heads",
    "refine",
    "reconstruct",
    "zero_hidden",
]

# Hook applied to the previous hidden state before it enters a branch.
# The default (None) is the identity; an optical-flow warp would plug in
# here without touching the rest of the pipeline.
AlignHook = Callable[[np.ndarray], np.ndarray]


@dataclass
class ResidualTriple:
    """Packed head outputs at one step: spatial residual s, past
    difference p (toward t-1), future difference f (toward t+1)."""

    s: np.ndarray
    p: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        if not (self.s.shape == self.p.shape == self.f.shape):
            raise ValueError(
                f"triple shapes differ: {self.s.shape}, {self.p.shape}, {self.f.shape}"
            )


def zero_hidden(config: NetworkConfig, height: int, width: int) -> np.ndarray:
    return np.zeros((config.branch_channels, height, width))


def _planes64(frame: Frame) -> np.ndarray:
    return frame.planes.astype(np.float64)


def _run_blocks(x: np.ndarray, weights: dict[str, ConvLayer], prefix: str, count: int) -> np.ndarray:
    for i in range(count):
        c1 = weights[f"{prefix}.b{i}.c1"]
        c2 = weights[f"{prefix}.b{i}.c2"]
        x = residual_block(x, c1.weight, c1.bias, c2.weight, c2.bias, dilation=c1.dilation)
    return x


def branch_step(
    prev_h: np.ndarray,
    ref: Frame,
    nbr_prev_region: Frame,
    nbr_next_region: Frame,
    weights: dict[str, ConvLayer],
    config: NetworkConfig,
    branch: str,
    align_hook: AlignHook | None = None,
) -> np.ndarray:
    """Advance one branch's hidden state by one time step.

    The (optionally aligned) previous hidden state is concatenated with
    the masked previous-neighbor regions, the reference frame and the
    masked next-neighbor regions, then passed through the branch's input
    conv and residual blocks.  ``branch`` selects "lv" or "hv"; the hv
    branch's layers carry the configured dilation.
    """
    if branch not in ("lv", "hv"):
        raise ValueError(f"branch must be 'lv' or 'hv', got {branch!r}")
    if prev_h.shape[0] != config.branch_channels:
        raise ValueError(
            f"hidden state has {prev_h.shape[0]} channels, config says {config.branch_channels}"
        )
    if align_hook is not None:
        prev_h = align_hook(prev_h)
    x = concat_channels(
        [prev_h, _planes64(nbr_prev_region), _planes64(ref), _planes64(nbr_next_region)]
    )
    conv_in = weights[f"{branch}.in"]
    x = conv2d(x, conv_in.weight, conv_in.bias, dilation=conv_in.dilation)
    return _run_blocks(x, weights, branch, config.branch_blocks)


def run_heads(
    h_lv: np.ndarray,
    h_hv: np.ndarray,
    weights: dict[str, ConvLayer],
    config: NetworkConfig,
) -> ResidualTriple:
    """Fuse the branch outputs, run the trunk, project the three heads."""
    if h_lv.shape != h_hv.shape:
        raise ValueError(f"branch outputs differ in shape: {h_lv.shape} vs {h_hv.shape}")
    fuse = weights["trunk.fuse"]
    x = conv2d(concat_channels([h_lv, h_hv]), fuse.weight, fuse.bias)
    x = _run_blocks(x, weights, "trunk", config.trunk_blocks)
    out = {}
    for head in ("spatial", "past", "future"):
        layer = weights[f"head.{head}"]
        out[head] = conv2d(x, layer.weight, layer.bias)
    return ResidualTriple(s=out["spatial"], p=out["past"], f=out["future"])


def oracle_heads(
    hr_prev: Frame,
    hr_cur: Frame,
    hr_next: Frame,
    up_prev: Frame,
    up_cur: Frame,
    up_next: Frame,
    r: int,
) -> ResidualTriple:
    """Exact ground-truth residual triple, packed on the LR grid.

    s is the HR frame minus its cubic upsample; f and p are the
    differences of that residual toward the next and previous steps.
    Frames are float32-valued, so these float64 subtractions are exact.
    """
    shapes = {f.planes.shape for f in (hr_prev, hr_cur, hr_next, up_prev, up_cur, up_next)}
    if len(shapes) != 1:
        raise ValueError(f"HR and upsampled frames disagree in shape: {sorted(shapes)}")
    d_prev = _planes64(hr_prev) - _planes64(up_prev)
    d_cur = _planes64(hr_cur) - _planes64(up_cur)
    d_next = _planes64(hr_next) - _planes64(up_next)
    return ResidualTriple(
        s=pixel_unshuffle(d_cur, r),
        p=pixel_unshuffle(d_cur - d_prev, r),
        f=pixel_unshuffle(d_cur - d_next, r),
    )


def refine(
    s_cur: np.ndarray,
    past_entries: list[np.ndarray],
    future_entries: list[np.ndarray],
    weights: dict[str, ConvLayer],
    config: NetworkConfig,
) -> np.ndarray:
    """Refine the spatial residual with the propagated buffer entries.

    Entries arrive ordered by distance (slot 1 first); they are laid out
    in temporal order (deepest past .. current .. deepest future) for the
    channel concatenation.  A skip connection adds the unrefined residual,
    so zero weights degrade to a passthrough.
    """
    n = config.buffer_size
    if len(past_entries) != n or len(future_entries) != n:
        raise ValueError(
            f"expected {n} entries per side, got {len(past_entries)} past / {len(future_entries)} future"
        )
    x = concat_channels(list(reversed(past_entries)) + [s_cur] + list(future_entries))
    conv_in = weights["refine.in"]
    y = conv2d(x, conv_in.weight, conv_in.bias)
    y = _run_blocks(y, weights, "refine", config.refine_blocks)
    conv_out = weights["refine.out"]
    y = conv2d(y, conv_out.weight, conv_out.bias)
    return s_cur + y


def reconstruct(s_refined: np.ndarray, ref_up: Frame, r: int) -> Frame:
    """Shuffle the packed residual to HR and add it onto the upsample."""
    sr = pixel_shuffle(s_refined, r)
    if sr.shape != ref_up.planes.shape:
        raise ValueError(
            f"shuffled residual {sr.shape} does not match upsampled frame {ref_up.planes.shape}"
        )
    out = np.clip(_planes64(ref_up) + sr, 0.0, 1.0)
    return Frame(out.astype(np.float32), HR)
