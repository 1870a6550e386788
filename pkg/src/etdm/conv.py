"""Dense convolution kernels for (channels, height, width) tensors.

Everything in this module is a pure function over numpy arrays in
channel-major layout.  These are the building blocks the recurrent
network and the image filters are assembled from, so the contracts are
strict: "same" spatial size, deterministic output, no NaN/Inf leaking
through.

Padding conventions
-------------------
``padding="zero"`` is standard zero padding, the default for learned
convolutions.  ``padding="reflect"`` mirrors the border with the edge
pixel duplicated (``a b c`` -> ``b a | a b c | c b``), which is what the
image-space filters use; numpy calls this mode ``symmetric``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "conv2d",
    "residual_block",
    "pixel_shuffle",
    "pixel_unshuffle",
    "concat_channels",
    "relu",
]

# numpy's name for edge-duplicating reflection
_REFLECT = "symmetric"


def _check_chw(x: np.ndarray, name: str = "x") -> None:
    if x.ndim != 3:
        raise ValueError(f"{name} must have shape (channels, height, width), got {x.shape}")


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray | None = None,
    *,
    dilation: int = 1,
    padding: str = "zero",
) -> np.ndarray:
    """2-D "same" convolution (cross-correlation) of a (C,H,W) tensor.

    ``weight`` has shape (out_channels, in_channels, k, k) with odd k;
    ``bias`` has shape (out_channels,).  The effective pad is
    ``dilation * (k - 1) // 2`` per side so the spatial size is preserved
    for every dilation.

    Output ``out[o, i, j] = bias[o] + sum_{c,a,b} weight[o,c,a,b] *
    x_padded[c, i + a*dilation, j + b*dilation]``.
    """
    _check_chw(x)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ValueError(f"weight must have shape (out, in, k, k), got {weight.shape}")
    out_ch, in_ch, k, _ = weight.shape
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if x.shape[0] != in_ch:
        raise ValueError(f"input has {x.shape[0]} channels, weight expects {in_ch}")
    if padding not in ("zero", "reflect"):
        raise ValueError(f"padding must be 'zero' or 'reflect', got {padding!r}")
    if bias is not None and bias.shape != (out_ch,):
        raise ValueError(f"bias must have shape ({out_ch},), got {bias.shape}")

    h, w = x.shape[1], x.shape[2]
    pad = dilation * (k - 1) // 2
    if pad:
        mode = _REFLECT if padding == "reflect" else "constant"
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode=mode)
    else:
        xp = x

    if k == 1:
        out = np.tensordot(weight[:, :, 0, 0], x, axes=1)
    else:
        # gather the k*k dilated taps, then contract with one matmul
        taps = np.empty((in_ch, k, k, h, w), dtype=xp.dtype)
        for a in range(k):
            for b in range(k):
                taps[:, a, b] = xp[:, a * dilation : a * dilation + h, b * dilation : b * dilation + w]
        out = np.tensordot(weight, taps, axes=([1, 2, 3], [0, 1, 2]))

    if bias is not None:
        out = out + bias[:, None, None]
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def residual_block(
    x: np.ndarray,
    weight_a: np.ndarray,
    bias_a: np.ndarray | None,
    weight_b: np.ndarray,
    bias_b: np.ndarray | None,
    *,
    dilation: int = 1,
) -> np.ndarray:
    """conv -> ReLU -> conv -> add-skip residual block.

    The second conv must map back to the input channel count so the skip
    addition is well defined.
    """
    if weight_b.shape[0] != x.shape[0]:
        raise ValueError(
            f"skip addition needs {x.shape[0]} output channels, second conv has {weight_b.shape[0]}"
        )
    y = conv2d(x, weight_a, bias_a, dilation=dilation)
    y = relu(y)
    y = conv2d(y, weight_b, bias_b, dilation=dilation)
    return x + y


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Depth-to-space: (C*r*r, H, W) -> (C, H*r, W*r).

    Channel c of the input lands at output channel ``c // r**2``,
    sub-row ``(c // r) % r`` and sub-column ``c % r`` of each r-by-r
    block.  ``pixel_unshuffle`` inverts this exactly (both are pure index
    permutations).
    """
    _check_chw(x)
    if r < 1:
        raise ValueError(f"upscale factor must be >= 1, got {r}")
    c, h, w = x.shape
    if c % (r * r) != 0:
        raise ValueError(f"{c} channels not divisible by r^2 = {r * r}")
    cout = c // (r * r)
    return (
        x.reshape(cout, r, r, h, w)
        .transpose(0, 3, 1, 4, 2)
        .reshape(cout, h * r, w * r)
    )


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Space-to-depth: (C, H*r, W*r) -> (C*r*r, H, W); inverse of pixel_shuffle."""
    _check_chw(x)
    if r < 1:
        raise ValueError(f"upscale factor must be >= 1, got {r}")
    c, hr, wr = x.shape
    if hr % r != 0 or wr % r != 0:
        raise ValueError(f"spatial size {hr}x{wr} not divisible by r = {r}")
    h, w = hr // r, wr // r
    return (
        x.reshape(c, h, r, w, r)
        .transpose(0, 2, 4, 1, 3)
        .reshape(c * r * r, h, w)
    )


def concat_channels(xs: list[np.ndarray]) -> np.ndarray:
    """Concatenate (C,H,W) tensors along the channel axis, order preserved."""
    if not xs:
        raise ValueError("need at least one tensor to concatenate")
    for x in xs:
        _check_chw(x)
    hw = xs[0].shape[1:]
    for i, x in enumerate(xs[1:], start=1):
        if x.shape[1:] != hw:
            raise ValueError(f"spatial mismatch: input 0 is {hw}, input {i} is {x.shape[1:]}")
    return np.concatenate(xs, axis=0)
