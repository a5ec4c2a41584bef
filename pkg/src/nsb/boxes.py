"""Axis-aligned boxes in pixel-edge coordinates.

A pixel (row r, col c) covers the unit square [c, c+1] x [r, r+1], so the
tight box of a mask spanning columns c0..c1 inclusive has x_min = c0 and
x_max = c1 + 1, and a full-frame box on a WxH image is (0, 0, W, H).
Coordinates are real-valued; nothing is snapped to the pixel grid until a
consumer rasterizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateBoxError(ValueError):
    """Box collapsed to zero width or height."""


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def area(self) -> float:
        return self.width * self.height

    def clip(self, frame_w: float, frame_h: float) -> "BBox":
        """Clamp to [0, frame_w] x [0, frame_h]; raises if nothing remains."""
        x0 = min(max(self.x_min, 0.0), frame_w)
        y0 = min(max(self.y_min, 0.0), frame_h)
        x1 = min(max(self.x_max, 0.0), frame_w)
        y1 = min(max(self.y_max, 0.0), frame_h)
        if not (x0 < x1 and y0 < y1):
            raise DegenerateBoxError(f"box {self} lies outside {frame_w}x{frame_h}")
        return BBox(x0, y0, x1, y1)

    def scaled(self, factor: float) -> "BBox":
        return BBox(
            self.x_min * factor, self.y_min * factor,
            self.x_max * factor, self.y_max * factor,
        )

    def expanded(self, fraction: float, frame_w: float, frame_h: float) -> "BBox":
        """Grow each side by ``fraction`` of the box size, then clip."""
        mx = fraction * self.width
        my = fraction * self.height
        return BBox(
            self.x_min - mx, self.y_min - my, self.x_max + mx, self.y_max + my
        ).clip(frame_w, frame_h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Detection:
    box: BBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area, in [0, 1]."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area() + b.area() - inter)


def iou_matrix(boxes: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Pairwise IoU for (N,4) vs (M,4) arrays of (x0, y0, x1, y1) rows."""
    ax0, ay0, ax1, ay1 = (boxes[:, i : i + 1] for i in range(4))
    bx0, by0, bx1, by1 = (others[None, :, i] for i in range(4))
    ix = np.minimum(ax1, bx1) - np.maximum(ax0, bx0)
    iy = np.minimum(ay1, by1) - np.maximum(ay0, by0)
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    return inter / (area_a + area_b - inter)


def tight_bbox(mask: np.ndarray) -> BBox:
    """Tight box (pixel-edge coordinates) of a nonempty boolean mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("mask is empty; no tight box exists")
    return BBox(
        float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1)
    )
