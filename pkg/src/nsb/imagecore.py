"""Grayscale image carrier with bit-exact PGM (P5) file I/O.

Images live in one of two forms: 8-bit (uint8, what the files hold) and
normalized (float64 in [0, 1], what the networks consume). All pipeline
stages exchange this type; file format is binary PGM with maxval 255 and
a single canonical header on write, so identical images always produce
identical bytes.
"""

from __future__ import annotations

import os

import numpy as np


class PgmError(ValueError):
    """Malformed PGM header or payload."""


class PgmUnsupportedError(PgmError):
    """Valid PGM, but not the P5/maxval-255 subset this package reads."""


class PgmTruncatedError(PgmError):
    """Header promised more pixel bytes than the file contains."""


class GrayImage:
    """2-D grayscale raster, 8-bit or normalized.

    Wraps a numpy array of shape (height, width): uint8 for the 8-bit
    form, float64 in [0, 1] for the normalized form. Instances are
    treated as immutable values; the constructor copies and locks the
    buffer.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        px = np.asarray(pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"expected a nonempty 2-D array, got shape {px.shape}")
        if px.dtype == np.uint8:
            px = px.copy()
        elif np.issubdtype(px.dtype, np.floating):
            px = px.astype(np.float64)
            if not np.isfinite(px).all():
                raise ValueError("normalized image has non-finite values")
            if px.min() < 0.0 or px.max() > 1.0:
                raise ValueError("normalized image values must lie in [0, 1]")
        else:
            raise TypeError(f"unsupported pixel dtype {px.dtype}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_normalized(self) -> bool:
        return self.pixels.dtype == np.float64

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.pixels.dtype == other.pixels.dtype
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    def __hash__(self):
        raise TypeError("GrayImage is not hashable")

    def __repr__(self) -> str:
        form = "normalized" if self.is_normalized else "8-bit"
        return f"GrayImage({self.width}x{self.height}, {form})"


def _read_header_tokens(data: bytes, path: str):
    """Parse 'P5 <w> <h> <maxval>' with whitespace/comment tolerance.

    Returns (width, height, maxval, payload_offset).
    """
    if len(data) < 2 or data[:2] != b"P5":
        raise PgmError(f"{path}: not a binary PGM (missing P5 magic)")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        # skip whitespace and '#' comments
        while pos < len(data):
            c = data[pos : pos + 1]
            if c.isspace():
                pos += 1
            elif c == b"#":
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise PgmError(f"{path}: unterminated comment in header")
                pos = nl + 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise PgmError(f"{path}: malformed header (expected integer field)")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PgmError(f"{path}: malformed header (missing separator after maxval)")
    pos += 1  # exactly one whitespace byte before the payload
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmError(f"{path}: non-positive dimensions {width}x{height}")
    return width, height, maxval, pos


def read_image(path) -> GrayImage:
    """Read a binary P5 PGM with maxval 255, preserving exact pixel values."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, maxval, offset = _read_header_tokens(data, path)
    if maxval != 255:
        raise PgmUnsupportedError(f"{path}: unsupported maxval {maxval} (need 255)")
    need = width * height
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise PgmTruncatedError(
            f"{path}: truncated payload ({len(payload)} of {need} bytes)"
        )
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(px)


def write_image(img: GrayImage, path) -> None:
    """Write the canonical P5 encoding: header ``P5\\n<w> <h>\\n255\\n``."""
    if img.is_normalized:
        raise ValueError("write_image expects the 8-bit form (use denormalize first)")
    path = os.fspath(path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def downsample(img: GrayImage, target_w: int, target_h: int) -> GrayImage:
    """Block-mean downsample with half-up rounding, exact in integer math."""
    if img.is_normalized:
        raise ValueError("downsample expects the 8-bit form")
    if target_w <= 0 or target_h <= 0:
        raise ValueError("target dimensions must be positive")
    if img.width % target_w or img.height % target_h:
        raise ValueError(
            f"{img.width}x{img.height} not divisible into {target_w}x{target_h} blocks"
        )
    bh = img.height // target_h
    bw = img.width // target_w
    sums = (
        img.pixels.astype(np.int64)
        .reshape(target_h, bh, target_w, bw)
        .sum(axis=(1, 3))
    )
    n = bh * bw
    # round_half_up(s / n) == (2s + n) // (2n) for nonnegative integers
    out = (2 * sums + n) // (2 * n)
    return GrayImage(out.astype(np.uint8))


def normalize(img: GrayImage) -> GrayImage:
    """8-bit image to the normalized form (divide by 255)."""
    if img.is_normalized:
        raise ValueError("image is already normalized")
    return GrayImage(img.pixels.astype(np.float64) / 255.0)


def denormalize(img: GrayImage) -> GrayImage:
    """Normalized image back to 8-bit, rounding half-up."""
    if not img.is_normalized:
        raise ValueError("image is already 8-bit")
    px = np.floor(img.pixels * 255.0 + 0.5)
    return GrayImage(np.clip(px, 0, 255).astype(np.uint8))


def round_half_up_u8(values: np.ndarray) -> np.ndarray:
    """Round an intensity array half-up and clip to the 8-bit range."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
