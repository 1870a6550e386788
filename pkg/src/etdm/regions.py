"""Temporal-difference region decomposition.

Neighboring frames are split into low-variance and high-variance pixel
sets by thresholding the luma difference against the reference frame,
cleaning the low-variance mask with a 3x3 median filter plus a
morphological open/close pass, and taking the complement for the
high-variance mask.  The two masks partition every pixel exactly, so the
masked copies of the neighbor always sum back to the original frame bit
for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import LR, Frame, median3, morph_open_close, rgb_to_y

__all__ = [
    "DifferenceMasks",
    "RegionSplit",
    "DEFAULT_TAU",
    "difference_map",
    "build_masks",
    "split_regions",
]

# ~10/255: typical 8-bit noise floor on the luma channel
DEFAULT_TAU = 10.0 / 255.0


@dataclass
class DifferenceMasks:
    """Binary (1,H,W) masks; m_lv + m_hv == 1 at every pixel."""

    m_lv: np.ndarray
    m_hv: np.ndarray


@dataclass
class RegionSplit:
    """Masked copies of a neighbor frame; i_lv + i_hv reconstructs it."""

    i_lv: Frame
    i_hv: Frame


def _luma_plane(frame: Frame) -> np.ndarray:
    if frame.channels == 3:
        return rgb_to_y(frame).planes
    return frame.planes


def difference_map(ref: Frame, nbr: Frame) -> np.ndarray:
    """Absolute luma difference of two LR frames, single channel in [0,1]."""
    if ref.planes.shape != nbr.planes.shape:
        raise ValueError(f"shape mismatch: {ref.planes.shape} vs {nbr.planes.shape}")
    if ref.tier != LR or nbr.tier != LR:
        raise ValueError(f"difference_map expects LR frames, got {ref.tier!r} and {nbr.tier!r}")
    return np.abs(_luma_plane(ref) - _luma_plane(nbr))


def build_masks(diff: np.ndarray, tau: float = DEFAULT_TAU) -> DifferenceMasks:
    """Threshold a difference map and clean the low-variance mask.

    Pixels with difference below ``tau`` form the raw low-variance set;
    the median filter and open/close pass remove speckle on both sides of
    the boundary.  The high-variance mask is the exact complement.
    """
    if diff.ndim != 3 or diff.shape[0] != 1:
        raise ValueError(f"difference map must have shape (1,H,W), got {diff.shape}")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    raw_lv = (diff < tau).astype(np.float32)
    m_lv = morph_open_close(median3(raw_lv))
    return DifferenceMasks(m_lv=m_lv, m_hv=1.0 - m_lv)


def split_regions(nbr: Frame, masks: DifferenceMasks) -> RegionSplit:
    """Apply the masks to a neighbor frame, broadcasting over channels."""
    if masks.m_lv.shape[1:] != nbr.planes.shape[1:]:
        raise ValueError(
            f"mask size {masks.m_lv.shape[1:]} does not match frame {nbr.planes.shape[1:]}"
        )
    return RegionSplit(
        i_lv=Frame(nbr.planes * masks.m_lv, nbr.tier),
        i_hv=Frame(nbr.planes * masks.m_hv, nbr.tier),
    )
