"""Synthetic score pages with known staff geometry.

Everything is drawn analytically in an unrotated frame and then sampled on
the rotated pixel grid, so ground truth is exact and not read back from the
raster.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ParameterError
from ..geometry import BBox
from ..pitch import position_to_pitch

DECOY_KINDS = ("noteheadBlack", "beam", "dynamicP")


@dataclass(frozen=True)
class SynthParams:
    staves: int = 2
    spacing: int = 12
    thickness: int = 2
    rotation: float = 0.0
    contrast: float = 1.0
    noise: float = 0.0
    decoys: int = 6
    notes: int = 0
    seed: int = 0
    width: int = 720
    height: int = 960

    def __post_init__(self):
        checks = [
            (self.staves >= 0, "staves must be >= 0"),
            (self.thickness >= 1, "thickness must be >= 1"),
            (self.spacing > self.thickness, "spacing must exceed thickness"),
            (abs(self.rotation) <= 5, "|rotation| must be <= 5 degrees"),
            (0.0 <= self.contrast <= 1.0, "contrast must lie in [0, 1]"),
            (0.0 <= self.noise <= 1.0, "noise density must lie in [0, 1]"),
            (self.decoys >= 0 and self.notes >= 0, "decoys and notes must be >= 0"),
            (self.width >= 64 and self.height >= 64, "page must be at least 64x64"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(f"{msg} (got {self})")
        if self.staves and self._layout_bottom() > self.height:
            raise ParameterError(
                f"{self.staves} staves at spacing {self.spacing} need {self._layout_bottom():.0f}px "
                f"but the page is {self.height}px tall")

    @property
    def top_margin(self) -> int:
        return 3 * self.spacing + 16

    @property
    def stave_pitch(self) -> int:
        return 10 * self.spacing

    @property
    def x_range(self):
        m = self.width // 12
        return m, self.width - m

    def _layout_bottom(self):
        return self.top_margin + (self.staves - 1) * self.stave_pitch + 4 * self.spacing + self.top_margin


@dataclass
class SynthNote:
    stave: int
    staff_position: int
    pitch: str
    bbox: BBox


@dataclass
class SynthPage:
    image: np.ndarray
    line_centers: list
    decoys: list = field(default_factory=list)
    decoy_categories: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    params: SynthParams | None = None


class _Frame:
    """Pixel-centre coordinates mapped back into the unrotated drawing frame."""

    def __init__(self, width, height, degrees):
        self.cx, self.cy = (width - 1) / 2, (height - 1) / 2
        t = math.radians(degrees)
        self.cos, self.sin = math.cos(t), math.sin(t)
        r, c = np.mgrid[0:height, 0:width].astype(np.float64)
        dx, dy = c - self.cx, r - self.cy
        self.u = self.cx + dx * self.cos + dy * self.sin
        self.v = self.cy - dx * self.sin + dy * self.cos

    def forward_y(self, u, v):
        """Page row of the drawing-frame point ``(u, v)``."""
        du, dv = u - self.cx, v - self.cy
        return self.cy + du * self.sin + dv * self.cos


def _pixel_bbox(mask):
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def _ellipse(frame, u0, v0, ru, rv):
    return ((frame.u - u0) / ru) ** 2 + ((frame.v - v0) / rv) ** 2 <= 1.0


def _rect(frame, u0, v0, w, h):
    return (frame.u >= u0) & (frame.u < u0 + w) & (frame.v >= v0) & (frame.v < v0 + h)


def synth_score(p: SynthParams) -> SynthPage:
    """Render a page of ``p.staves`` five-line staves plus decoys and noteheads.

    Line centres are reported in page coordinates at each line's midpoint,
    before noise.  Deterministic in ``p.seed``.
    """
    rng = np.random.default_rng(p.seed)
    frame = _Frame(p.width, p.height, p.rotation)
    ink = np.zeros((p.height, p.width), dtype=bool)
    s, t = p.spacing, p.thickness
    x0, x1 = p.x_range
    mid_u = (x0 + x1) / 2
    half = t / 2

    centers, bottoms = [], []
    for k in range(p.staves):
        top_row = p.top_margin + k * p.stave_pitch
        ys = []
        for j in range(5):
            yc = top_row + j * s + (t - 1) / 2
            ink |= (np.abs(frame.v - yc) < half) & (frame.u >= x0) & (frame.u < x1)
            ys.append(float(frame.forward_y(mid_u, yc)))
        centers.append(ys)
        bottoms.append(top_row + 4 * s + (t - 1) / 2)

    notes = []
    for k, bottom in enumerate(bottoms):
        for i in range(p.notes):
            pos = int(rng.integers(-2, 11))
            u = x0 + (i + 1) * (x1 - x0) / (p.notes + 1)
            v = bottom - pos * s / 2
            m = _ellipse(frame, u, v, 0.6 * s, 0.5 * s)
            ink |= m
            box = _pixel_bbox(m)
            if box is not None:
                notes.append(SynthNote(k, pos, position_to_pitch(pos, "treble"), box))

    # decoys live in the bands between and below staves, clear of any line
    bands = []
    for k, bottom in enumerate(bottoms):
        lo = bottom + 1.5 * s + t
        hi = (bottoms[k + 1] - 4 * s - 1.5 * s - t) if k + 1 < len(bottoms) else p.height - 0.5 * p.top_margin
        if hi - lo > 2 * s:
            bands.append((lo, hi))
    if not bands:
        bands = [(p.height * 0.1, p.height * 0.9)]
    decoys, cats = [], []
    placed = []
    for _ in range(p.decoys):
        kind = DECOY_KINDS[int(rng.integers(len(DECOY_KINDS)))]
        if kind == "beam":
            w, h = 3 * s, max(3, s // 2)
        elif kind == "noteheadBlack":
            w, h = 1.2 * s, 1.0 * s
        else:
            w, h = 0.8 * s, 0.8 * s
        lo, hi = bands[int(rng.integers(len(bands)))]
        for _attempt in range(20):
            u = float(rng.uniform(x0, x1 - w))
            v = float(rng.uniform(lo, max(lo, hi - h)))
            if all(u + w + 2 < a or a2 + 2 < u or v + h + 2 < b or b2 + 2 < v for a, b, a2, b2 in placed):
                break
        else:
            continue
        placed.append((u, v, u + w, v + h))
        if kind == "noteheadBlack":
            m = _ellipse(frame, u + w / 2, v + h / 2, w / 2, h / 2)
        else:
            m = _rect(frame, u, v, w, h)
        box = _pixel_bbox(m)
        if box is None:
            continue
        ink |= m
        decoys.append(box)
        cats.append(kind)

    ink_level = int(round(255 * (1.0 - p.contrast)))
    img = np.where(ink, ink_level, 255).astype(np.uint8)
    if p.noise > 0:
        hit = rng.random(img.shape) < p.noise
        salt = rng.integers(0, 2, size=img.shape).astype(bool)
        img[hit & salt] = 255
        img[hit & ~salt] = 0
    return SynthPage(img, centers, decoys, cats, notes, p)


def ground_truth_document(page: SynthPage) -> dict:
    """``gt.json`` written by ``omrkit synth``."""
    p = page.params
    return {
        "width": p.width,
        "height": p.height,
        "params": asdict(p),
        "staves": [{"index": i, "line_ys": [round(y, 4) for y in ys]} for i, ys in enumerate(page.line_centers)],
        "decoys": [{"category": c, "bbox": b.xywh()} for c, b in zip(page.decoy_categories, page.decoys)],
        "notes": [
            {"stave": n.stave, "staff_position": n.staff_position, "pitch": n.pitch, "bbox": n.bbox.xywh()}
            for n in page.notes
        ],
    }
