"""Boxes, bbox-local pixel masks, IoU and the run-length mask codec.

Boxes are half-open ``[x_min, x_max) x [y_min, y_max)`` with y growing
downward, so integer boxes have exact integer areas and abutting boxes do
not overlap.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, MalformedMaskError


class BBox(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def checked(cls, x_min, y_min, x_max, y_max) -> "BBox":
        b = cls(x_min, y_min, x_max, y_max)
        if not (x_max > x_min and y_max > y_min):
            raise InvalidInputError(f"degenerate box {tuple(b)}")
        return b

    @classmethod
    def from_xywh(cls, x, y, w, h) -> "BBox":
        return cls.checked(x, y, x + w, y + h)

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def area(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self):
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    def xywh(self) -> list:
        return [self.x_min, self.y_min, self.x_max - self.x_min, self.y_max - self.y_min]

    def is_integral(self) -> bool:
        return all(float(v).is_integer() for v in self)

    def as_int(self) -> "BBox":
        return BBox(*(int(v) for v in self))


def iou_bbox(a, b) -> float:
    """Box IoU.  With integer coordinates both areas are exact before the single division."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


@dataclass(eq=False)
class PixelMask:
    """Binary grid local to ``bbox``; ``grid.shape == (bbox.height, bbox.width)``."""

    bbox: BBox
    grid: np.ndarray

    def __post_init__(self):
        self.bbox = BBox.checked(*(int(v) for v in self.bbox))
        self.grid = np.ascontiguousarray(self.grid, dtype=bool)
        if self.grid.shape != (self.bbox.height, self.bbox.width):
            raise MalformedMaskError(
                f"mask grid {self.grid.shape} does not match bbox {self.bbox.height}x{self.bbox.width}")

    @classmethod
    def full(cls, bbox) -> "PixelMask":
        b = BBox(*(int(v) for v in bbox))
        return cls(b, np.ones((b.height, b.width), dtype=bool))

    @property
    def count(self) -> int:
        return int(self.grid.sum())

    def __eq__(self, other):
        if not isinstance(other, PixelMask):
            return NotImplemented
        return tuple(self.bbox) == tuple(other.bbox) and np.array_equal(self.grid, other.grid)

    def __repr__(self):
        return f"PixelMask(bbox={tuple(self.bbox)}, count={self.count})"


def iou_mask(a: PixelMask, b: PixelMask) -> float:
    """Pixel-set IoU of two masks placed on the page by their boxes.

    Two empty masks give 0, never a match.
    """
    na, nb = a.count, b.count
    x0 = max(a.bbox.x_min, b.bbox.x_min)
    y0 = max(a.bbox.y_min, b.bbox.y_min)
    x1 = min(a.bbox.x_max, b.bbox.x_max)
    y1 = min(a.bbox.y_max, b.bbox.y_max)
    inter = 0
    if x1 > x0 and y1 > y0:
        ga = a.grid[y0 - a.bbox.y_min:y1 - a.bbox.y_min, x0 - a.bbox.x_min:x1 - a.bbox.x_min]
        gb = b.grid[y0 - b.bbox.y_min:y1 - b.bbox.y_min, x0 - b.bbox.x_min:x1 - b.bbox.x_min]
        inter = int(np.count_nonzero(ga & gb))
    union = na + nb - inter
    if union == 0:
        return 0.0
    return inter / union


_RLE_RE = re.compile(r"[01]:[1-9][0-9]*( [01]:[1-9][0-9]*)*")


def rle_encode(m: PixelMask) -> str:
    """Row-major ``value:length`` runs, e.g. ``"0:3 1:5 0:1"``."""
    flat = m.grid.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    return " ".join(f"{flat[s]}:{n}" for s, n in zip(starts, lengths))


def rle_decode(rle: str, bbox) -> PixelMask:
    bbox = BBox.checked(*(int(v) for v in bbox))
    text = rle.strip()
    if not _RLE_RE.fullmatch(text):
        raise MalformedMaskError(f"RLE does not follow '<0|1>:<n> ...' grammar: {rle[:40]!r}")
    pairs = [tok.split(":") for tok in text.split(" ")]
    values = np.array([int(v) for v, _ in pairs], dtype=bool)
    lengths = np.array([int(n) for _, n in pairs], dtype=np.int64)
    if len(values) > 1 and np.any(values[1:] == values[:-1]):
        raise MalformedMaskError("RLE values must alternate between 0 and 1")
    area = bbox.height * bbox.width
    total = int(lengths.sum())
    if total != area:
        raise MalformedMaskError(f"RLE covers {total} pixels but bbox area is {area}")
    grid = np.repeat(values, lengths).reshape(bbox.height, bbox.width)
    return PixelMask(bbox, grid)
