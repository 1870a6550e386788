"""Frame and mask file I/O.

Sequences live in directories of ``frame_%05d.png`` (8-bit RGB) or
``frame_%05d.raw`` files.  The raw format is lossless float32 for oracle
tests: a 12-byte header of three little-endian u32 (channels, height,
width) followed by the planar float32 payload.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .image import Frame

__all__ = [
    "load_sequence",
    "save_frame_png",
    "save_frame_raw",
    "save_sequence_png",
    "save_mask_png",
    "save_tensor_raw",
]

_FRAME_RE = re.compile(r"^frame_(\d{5})\.(png|raw)$")


def load_frame_png(path: Path, tier: str) -> Frame:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    planes = arr.astype(np.float32).transpose(2, 0, 1) / np.float32(255.0)
    return Frame(planes, tier)


def load_frame_raw(path: Path, tier: str) -> Frame:
    data = path.read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: truncated raw frame header")
    c, h, w = struct.unpack("<3I", data[:12])
    expect = 12 + 4 * c * h * w
    if len(data) != expect:
        raise ValueError(f"{path}: raw frame payload is {len(data) - 12} bytes, expected {expect - 12}")
    planes = np.frombuffer(data, dtype="<f4", offset=12).reshape(c, h, w)
    return Frame(planes.copy(), tier)


def load_sequence(directory: str | Path, tier: str) -> list[Frame]:
    """Load all frame_%05d.png / .raw files of a directory, in index order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    found: list[tuple[int, Path]] = []
    for p in directory.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    if not found:
        raise FileNotFoundError(f"no frame_%05d.png or .raw files in {directory}")
    frames = []
    for _, p in sorted(found):
        if p.suffix == ".png":
            frames.append(load_frame_png(p, tier))
        else:
            frames.append(load_frame_raw(p, tier))
    return frames


def save_frame_png(frame: Frame, path: str | Path) -> None:
    arr = np.clip(np.rint(frame.planes * 255.0), 0, 255).astype(np.uint8)
    if frame.channels == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


def save_frame_raw(frame: Frame, path: str | Path) -> None:
    c, h, w = frame.planes.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3I", c, h, w))
        fh.write(np.ascontiguousarray(frame.planes, dtype="<f4").tobytes())


def save_sequence_png(frames: list[Frame], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        save_frame_png(f, directory / f"frame_{i:05d}.png")


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a binary (1,H,W) mask as an 8-bit image of 0/255."""
    arr = (mask[0] > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def save_tensor_raw(tensor: np.ndarray, path: str | Path, sidecar: dict | None = None) -> None:
    """Dump a (C,H,W) tensor as raw little-endian float32 plus a text sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    lines = [f"shape: {tensor.shape[0]} {tensor.shape[1]} {tensor.shape[2]}"]
    for k, v in (sidecar or {}).items():
        lines.append(f"{k}: {v}")
    path.with_suffix(".txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
