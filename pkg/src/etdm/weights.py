"""Network parameter containers, seeded initialization, and the binary
weight-file format.

File layout (all integers little-endian u32):

    magic  b"ETDM"
    format version (currently 1)
    config block: the eight NetworkConfig fields in declaration order
    per-layer records, two per conv layer in architecture order:
        name length, ASCII name ("<layer>.weight" / "<layer>.bias")
        dims as 4 u32  (out, in, kh, kw; bias uses (out, 1, 1, 1))
        payload: IEEE-754 float32 little-endian, row-major
    crc32 of all payload bytes, in file order

Weights are float32 on disk and held as float64 in memory for compute;
values are float32-quantized at initialization so a save/load round trip
is bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkConfig",
    "ConvLayer",
    "WeightFormatError",
    "layer_table",
    "init_weights",
    "zero_weights",
    "save_weights",
    "load_weights",
]

MAGIC = b"ETDM"
FORMAT_VERSION = 1


class WeightFormatError(Exception):
    """Raised when a weight file is corrupt or inconsistent with its config."""


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture sizes.  Field order defines the file config block."""

    branch_channels: int = 96
    branch_blocks: int = 2
    trunk_blocks: int = 16
    refine_channels: int = 64
    refine_blocks: int = 16
    hv_dilation: int = 2
    scale: int = 4
    buffer_size: int = 3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v < (0 if f.name == "buffer_size" else 1):
                raise ValueError(f"{f.name} must be a positive integer, got {v!r}")

    @property
    def packed_channels(self) -> int:
        """Channel count of a space-to-depth packed RGB residual."""
        return 3 * self.scale * self.scale

    def to_block(self) -> tuple[int, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    @classmethod
    def from_block(cls, block: tuple[int, ...]) -> "NetworkConfig":
        names = [f.name for f in fields(cls)]
        return cls(**dict(zip(names, block)))


@dataclass
class ConvLayer:
    """One conv layer's parameters: weight (out,in,k,k), bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray
    dilation: int = 1


@dataclass(frozen=True)
class _LayerSpec:
    name: str
    out_ch: int
    in_ch: int
    kernel: int
    dilation: int


def layer_table(config: NetworkConfig) -> list[_LayerSpec]:
    """Architecture as an ordered list of conv layers.

    This is the single source of truth shared by initialization, the file
    format, and the forward pass.
    """
    c = config.branch_channels
    packed = config.packed_channels
    table: list[_LayerSpec] = []
    for branch, dil in (("lv", 1), ("hv", config.hv_dilation)):
        table.append(_LayerSpec(f"{branch}.in", c, c + 9, 3, dil))
        for i in range(config.branch_blocks):
            table.append(_LayerSpec(f"{branch}.b{i}.c1", c, c, 3, dil))
            table.append(_LayerSpec(f"{branch}.b{i}.c2", c, c, 3, dil))
    table.append(_LayerSpec("trunk.fuse", c, 2 * c, 3, 1))
    for i in range(config.trunk_blocks):
        table.append(_LayerSpec(f"trunk.b{i}.c1", c, c, 3, 1))
        table.append(_LayerSpec(f"trunk.b{i}.c2", c, c, 3, 1))
    for head in ("spatial", "past", "future"):
        table.append(_LayerSpec(f"head.{head}", packed, c, 3, 1))
    rc = config.refine_channels
    table.append(_LayerSpec("refine.in", rc, (2 * config.buffer_size + 1) * packed, 3, 1))
    for i in range(config.refine_blocks):
        table.append(_LayerSpec(f"refine.b{i}.c1", rc, rc, 3, 1))
        table.append(_LayerSpec(f"refine.b{i}.c2", rc, rc, 3, 1))
    table.append(_LayerSpec("refine.out", packed, rc, 3, 1))
    return table


def _quantize(a: np.ndarray) -> np.ndarray:
    # float32 value grid, float64 carrier
    return a.astype(np.float32).astype(np.float64)


def init_weights(config: NetworkConfig, seed: int) -> dict[str, ConvLayer]:
    """Seeded uniform init in +-1/sqrt(fan_in); same seed, same bits."""
    rng = np.random.default_rng(seed)
    out: dict[str, ConvLayer] = {}
    for spec in layer_table(config):
        bound = 1.0 / np.sqrt(spec.in_ch * spec.kernel * spec.kernel)
        w = rng.uniform(-bound, bound, (spec.out_ch, spec.in_ch, spec.kernel, spec.kernel))
        b = rng.uniform(-bound, bound, spec.out_ch)
        out[spec.name] = ConvLayer(_quantize(w), _quantize(b), spec.dilation)
    return out


def zero_weights(config: NetworkConfig) -> dict[str, ConvLayer]:
    """All-zero parameters; the network becomes a transparent passthrough."""
    out: dict[str, ConvLayer] = {}
    for spec in layer_table(config):
        w = np.zeros((spec.out_ch, spec.in_ch, spec.kernel, spec.kernel))
        out[spec.name] = ConvLayer(w, np.zeros(spec.out_ch), spec.dilation)
    return out


def _records(config: NetworkConfig, weights: dict[str, ConvLayer]):
    for spec in layer_table(config):
        layer = weights[spec.name]
        yield f"{spec.name}.weight", layer.weight.shape, layer.weight
        yield f"{spec.name}.bias", (layer.bias.shape[0], 1, 1, 1), layer.bias


def save_weights(path: str | Path, config: NetworkConfig, weights: dict[str, ConvLayer]) -> None:
    missing = [s.name for s in layer_table(config) if s.name not in weights]
    if missing:
        raise WeightFormatError(f"weights missing layers: {missing}")
    crc = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<8I", *config.to_block()))
        for name, dims, arr in _records(config, weights):
            encoded = name.encode("ascii")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<4I", *dims))
            payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            crc = zlib.crc32(payload, crc)
            fh.write(payload)
        fh.write(struct.pack("<I", crc))


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise WeightFormatError(f"truncated file while reading {what}")
    return data


def load_weights(path: str | Path) -> tuple[NetworkConfig, dict[str, ConvLayer]]:
    """Read and validate a weight file; no partial result on any failure."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise WeightFormatError(f"{path}: bad magic, not a weight file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise WeightFormatError(f"{path}: unsupported format version {version}")
        block = struct.unpack("<8I", _read_exact(fh, 32, "config block"))
        try:
            config = NetworkConfig.from_block(block)
        except ValueError as e:
            raise WeightFormatError(f"{path}: invalid config block: {e}") from e

        out: dict[str, ConvLayer] = {}
        for spec in layer_table(config):
            pending: dict[str, np.ndarray] = {}
            for kind in ("weight", "bias"):
                expected_name = f"{spec.name}.{kind}"
                (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "record name length"))
                name = _read_exact(fh, name_len, "record name").decode("ascii")
                if name != expected_name:
                    raise WeightFormatError(f"{path}: expected record {expected_name}, found {name}")
                dims = struct.unpack("<4I", _read_exact(fh, 16, f"{name} dims"))
                if kind == "weight":
                    expected_dims = (spec.out_ch, spec.in_ch, spec.kernel, spec.kernel)
                else:
                    expected_dims = (spec.out_ch, 1, 1, 1)
                if dims != expected_dims:
                    raise WeightFormatError(
                        f"{path}: layer {name} has dims {dims}, config requires {expected_dims}"
                    )
                count = dims[0] * dims[1] * dims[2] * dims[3]
                payload = _read_exact(fh, 4 * count, f"{name} payload")
                pending[kind] = (name, payload)
            out[spec.name] = pending

        (stored_crc,) = struct.unpack("<I", _read_exact(fh, 4, "checksum"))
        trailing = fh.read(1)
        if trailing:
            raise WeightFormatError(f"{path}: trailing bytes after checksum")

    crc = 0
    layers: dict[str, ConvLayer] = {}
    for spec in layer_table(NetworkConfig.from_block(block)):
        pending = out[spec.name]
        arrays = {}
        for kind in ("weight", "bias"):
            name, payload = pending[kind]
            crc = zlib.crc32(payload, crc)
            arrays[kind] = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        w = arrays["weight"].reshape(spec.out_ch, spec.in_ch, spec.kernel, spec.kernel)
        layers[spec.name] = ConvLayer(w, arrays["bias"], spec.dilation)
    if crc != stored_crc:
        raise WeightFormatError(f"{path}: checksum mismatch, file is corrupt")
    return config, layers
