"""Versioned binary container for named float64 tensors.

Layout (all integers little-endian):

    magic   4 bytes     b"NSB1"
    u32     tensor count
    table   per tensor: u16 name length, UTF-8 name, u8 ndim, ndim x u32 dims
    payload per tensor, in table order: float64 LE values, C order

Classifier tensors are namespaced ``cls.*`` and detector tensors
``det.*``, so one file can carry both models. Writing sorts names, which
makes the encoding canonical: equal tensor dicts produce equal bytes.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"NSB1"


class WeightsFormatError(ValueError):
    """Container unreadable: bad magic/version or corrupt table."""


class WeightsTruncatedError(WeightsFormatError):
    """File ends before the promised payload does."""


class WeightsShapeError(ValueError):
    """Container readable but a tensor is missing or has the wrong shape."""

    def __init__(self, tensor: str, message: str):
        super().__init__(f"tensor {tensor!r}: {message}")
        self.tensor = tensor


def write_container(path, tensors: dict[str, np.ndarray]) -> None:
    """Write tensors in sorted-name order (canonical bytes)."""
    names = sorted(tensors)
    parts = [MAGIC, struct.pack("<I", len(names))]
    for name in names:
        raw = name.encode("utf-8")
        arr = tensors[name]
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
        parts.append(arr.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != MAGIC:
        raise WeightsFormatError(f"{path}: bad magic (not an NSB1 weights file)")
    pos = 4
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    shapes: list[tuple[str, tuple[int, ...]]] = []
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            shapes.append((name, dims))
    except struct.error as exc:
        raise WeightsFormatError(f"{path}: corrupt tensor table ({exc})") from exc
    tensors: dict[str, np.ndarray] = {}
    for name, dims in shapes:
        n_vals = int(np.prod(dims)) if dims else 1
        end = pos + 8 * n_vals
        if end > len(data):
            raise WeightsTruncatedError(
                f"{path}: payload for {name!r} truncated ({len(data) - pos} of "
                f"{8 * n_vals} bytes)"
            )
        tensors[name] = (
            np.frombuffer(data[pos:end], dtype="<f8").reshape(dims).copy()
        )
        pos = end
    return tensors


def take_tensors(
    tensors: dict[str, np.ndarray], expected: dict[str, tuple[int, ...]]
) -> dict[str, np.ndarray]:
    """Extract and shape-check one model's tensors from a container dict."""
    out = {}
    for name, shape in expected.items():
        if name not in tensors:
            raise WeightsShapeError(name, "missing from container")
        arr = tensors[name]
        if arr.shape != shape:
            raise WeightsShapeError(name, f"shape {arr.shape}, expected {shape}")
        if not np.isfinite(arr).all():
            raise WeightsShapeError(name, "contains non-finite values")
        out[name] = arr
    return out


def merge_into_container(path, tensors: dict[str, np.ndarray]) -> None:
    """Update/insert tensors in a container file, keeping other namespaces."""
    try:
        existing = read_container(path)
    except FileNotFoundError:
        existing = {}
    existing.update(tensors)
    write_container(path, existing)
