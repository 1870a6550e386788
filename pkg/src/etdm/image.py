"""Image-space primitives: color, degradation kernels, resampling, mask
filters and quality metrics.

A :class:`Frame` is an image in [0,1] with float32 planes in (C,H,W)
layout plus a resolution-tier tag ("lr", "hr", or "up" for the cubic
upsample of an LR frame).  Keeping frames float32-valued while doing the
arithmetic in float64 is deliberate: differences of float32 values are
exact in float64, which is what makes the ground-truth residual path
reproduce HR frames bit for bit.

Boundary handling throughout is edge-duplicating reflection (numpy's
``symmetric``), matching the temporal padding of sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

__all__ = [
    "Frame",
    "QualityReport",
    "rgb_to_y",
    "gaussian_blur",
    "bicubic_resize",
    "median3",
    "morph_open_close",
    "psnr",
    "ssim",
    "quality",
]

_REFLECT = "symmetric"

LR, HR, UP = "lr", "hr", "up"
_TIERS = (LR, HR, UP)


@dataclass
class Frame:
    """One image: float32 planes (C,H,W) in [0,1] plus a tier tag.

    Residuals and feature maps are plain arrays; only things that live in
    image space (inputs, upsamples, reconstructions) are Frames.
    """

    planes: np.ndarray
    tier: str

    def __post_init__(self):
        if self.planes.ndim != 3:
            raise ValueError(f"planes must be (C,H,W), got shape {self.planes.shape}")
        if self.planes.shape[0] not in (1, 3):
            raise ValueError(f"expected 1 (Y) or 3 (RGB) channels, got {self.planes.shape[0]}")
        if self.tier not in _TIERS:
            raise ValueError(f"tier must be one of {_TIERS}, got {self.tier!r}")
        if self.planes.dtype != np.float32:
            self.planes = self.planes.astype(np.float32)

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]


@dataclass
class QualityReport:
    psnr_db: float  # math.inf when the two frames are identical
    ssim: float


# BT.601 studio-swing luma: Y in [16/255, 235/255] for RGB in [0,1].
_Y_COEF = (65.481, 128.553, 24.966)
_Y_OFFSET = 16.0


def rgb_to_y(frame: Frame) -> Frame:
    """Convert an RGB frame to its Y (luma) channel, BT.601 studio swing."""
    if frame.channels != 3:
        raise ValueError(f"rgb_to_y needs a 3-channel frame, got {frame.channels}")
    p = frame.planes.astype(np.float64)
    y = (_Y_COEF[0] * p[0] + _Y_COEF[1] * p[1] + _Y_COEF[2] * p[2] + _Y_OFFSET) / 255.0
    return Frame(y[None].astype(np.float32), frame.tier)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(frame: Frame, sigma: float) -> Frame:
    """Separable Gaussian blur with reflect boundaries, same size out."""
    k = gaussian_kernel_1d(sigma)
    p = frame.planes.astype(np.float64)
    p = correlate1d(p, k, axis=1, mode="reflect")
    p = correlate1d(p, k, axis=2, mode="reflect")
    return Frame(p.astype(np.float32), frame.tier)


def _cubic(x: np.ndarray) -> np.ndarray:
    # Keys cubic convolution kernel, a = -0.5
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    out = np.where(ax <= 1.0, 1.5 * ax3 - 2.5 * ax2 + 1.0, 0.0)
    mid = (ax > 1.0) & (ax <= 2.0)
    return np.where(mid, -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0, out)


def _reflect_index(j: np.ndarray, n: int) -> np.ndarray:
    # edge-duplicating mirror: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
    jj = np.mod(j, 2 * n)
    return np.where(jj < n, jj, 2 * n - 1 - jj)


def resize_matrix(n_in: int, n_out: int, scale: float, antialias: bool) -> np.ndarray:
    """Dense (n_out, n_in) row-stochastic matrix for 1-D cubic resampling.

    When downsampling with ``antialias`` the kernel is stretched by the
    scale factor so its support covers 4/scale input samples.  Rows are
    normalized to sum exactly to 1, and out-of-range taps are mirrored
    back into the signal.
    """
    if antialias and scale < 1.0:
        kscale = scale
    else:
        kscale = 1.0
    support = 2.0 / kscale
    x = (np.arange(n_out, dtype=np.float64) + 0.5) / scale - 0.5
    left = np.floor(x - support).astype(np.int64) + 1
    ntaps = int(math.ceil(2.0 * support)) + 1
    j = left[:, None] + np.arange(ntaps)[None, :]
    w = _cubic((x[:, None] - j) * kscale)
    w /= w.sum(axis=1, keepdims=True)
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.repeat(np.arange(n_out), ntaps)
    np.add.at(m, (rows, _reflect_index(j, n_in).ravel()), w.ravel())
    return m


def bicubic_resize(frame: Frame, scale: float, antialias: bool, tier: str | None = None) -> Frame:
    """Cubic-convolution resize (a = -0.5) with reflect boundaries.

    Output size is round(input * scale) per axis.  ``antialias`` stretches
    the kernel on downsampling; it has no effect when upsampling.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    c, h, w = frame.planes.shape
    h2 = int(round(h * scale))
    w2 = int(round(w * scale))
    if h2 < 1 or w2 < 1:
        raise ValueError(f"resize of {h}x{w} by {scale} would produce an empty image")
    p = frame.planes.astype(np.float64)
    if h2 != h or not math.isclose(scale, 1.0):
        mr = resize_matrix(h, h2, scale, antialias)
        p = np.tensordot(mr, p, axes=(1, 1)).transpose(1, 0, 2)
    if w2 != w or not math.isclose(scale, 1.0):
        mc = resize_matrix(w, w2, scale, antialias)
        p = np.tensordot(p, mc, axes=(2, 1))
    return Frame(np.ascontiguousarray(p, dtype=np.float64).astype(np.float32), tier or frame.tier)


def _check_binary(mask: np.ndarray) -> None:
    if mask.ndim != 3 or mask.shape[0] != 1:
        raise ValueError(f"mask must have shape (1,H,W), got {mask.shape}")
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise ValueError("mask must contain only 0 and 1")


def _neighborhood_sum3(mask: np.ndarray) -> np.ndarray:
    """Sum of each 3x3 reflect-padded neighborhood, exact small integers."""
    m = np.pad(mask[0].astype(np.int32), 1, mode=_REFLECT)
    h, w = mask.shape[1:]
    s = np.zeros((h, w), dtype=np.int32)
    for a in range(3):
        for b in range(3):
            s += m[a : a + h, b : b + w]
    return s


def median3(mask: np.ndarray) -> np.ndarray:
    """3x3 median of a binary mask = majority vote over 9 neighbors."""
    _check_binary(mask)
    return (_neighborhood_sum3(mask) >= 5)[None].astype(np.float32)


def _erode(mask: np.ndarray) -> np.ndarray:
    return (_neighborhood_sum3(mask) == 9)[None].astype(np.float32)


def _dilate(mask: np.ndarray) -> np.ndarray:
    return (_neighborhood_sum3(mask) >= 1)[None].astype(np.float32)


def morph_open_close(mask: np.ndarray) -> np.ndarray:
    """Opening then closing with a 3x3 all-ones structuring element.

    Opening (erode, dilate) removes speckles; closing (dilate, erode)
    fills pinholes.  Reflect padding keeps borders unbiased.
    """
    _check_binary(mask)
    opened = _dilate(_erode(mask))
    return _erode(_dilate(opened))


def psnr(a: Frame, b: Frame, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; math.inf when a == b exactly."""
    if a.planes.shape != b.planes.shape:
        raise ValueError(f"shape mismatch: {a.planes.shape} vs {b.planes.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    d = a.planes.astype(np.float64) - b.planes.astype(np.float64)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


def _window_filter(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable valid-mode correlation with the 1-D window w
    from numpy.lib.stride_tricks import sliding_window_view

    t = sliding_window_view(img, len(w), axis=1) @ w
    return sliding_window_view(t, len(w), axis=0) @ w


def ssim(a: Frame, b: Frame, peak: float = 1.0) -> float:
    """Mean single-scale SSIM with an 11x11 Gaussian window, sigma 1.5.

    Local statistics are taken over valid window positions only, so both
    images must be at least 11x11.
    """
    if a.planes.shape != b.planes.shape:
        raise ValueError(f"shape mismatch: {a.planes.shape} vs {b.planes.shape}")
    if a.channels != 1:
        raise ValueError("ssim expects single-channel (Y) frames")
    h, w = a.height, a.width
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} is smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")

    win = np.exp(
        -((np.arange(_SSIM_WINDOW) - _SSIM_WINDOW // 2) ** 2) / (2.0 * _SSIM_SIGMA**2)
    )
    win /= win.sum()

    x = a.planes[0].astype(np.float64)
    y = b.planes[0].astype(np.float64)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    mu_x = _window_filter(x, win)
    mu_y = _window_filter(y, win)
    var_x = _window_filter(x * x, win) - mu_x * mu_x
    var_y = _window_filter(y * y, win) - mu_y * mu_y
    cov = _window_filter(x * y, win) - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def quality(a: Frame, b: Frame, peak: float = 1.0) -> QualityReport:
    """PSNR and SSIM of two frames, converting RGB to luma first."""
    if a.channels == 3:
        a = rgb_to_y(a)
    if b.channels == 3:
        b = rgb_to_y(b)
    return QualityReport(psnr_db=psnr(a, b, peak), ssim=ssim(a, b, peak))
