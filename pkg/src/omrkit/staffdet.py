"""Staff-line detection and stave grouping.

Pipeline: Otsu binarisation, horizontal opening, 8-connected components,
splitting of contours that span several lines, aspect/height classification
and greedy grouping of lines into five-line staves.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .errors import ParameterError, SchemaError
from .imaging import Contour

STAFF_GREEN = (0, 255, 0)
NON_STAFF_RED = (255, 0, 0)


@dataclass(frozen=True)
class StaffDetectParams:
    kernel_width_fraction: float = 1 / 30
    min_aspect: float = 20.0
    max_thickness_factor: float = 3.0
    group_gap_tolerance: float = 0.2

    def __post_init__(self):
        for name in ("kernel_width_fraction", "min_aspect", "max_thickness_factor", "group_gap_tolerance"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v!r}")

    def kernel_width(self, page_width: int) -> int:
        return max(2, int(round(self.kernel_width_fraction * page_width)))


@dataclass(eq=False)
class StaffLine:
    y_center: float
    x_start: int
    x_end: int
    thickness: int
    contour: Contour | None = field(default=None, repr=False)

    @property
    def contour_id(self):
        return None if self.contour is None else self.contour.id

    @classmethod
    def from_contour(cls, c: Contour) -> "StaffLine":
        x0, _, x1, _ = c.bbox
        thickness = max(1, int(round(c.area / (x1 - x0))))
        return cls(float(c.ys.mean()), x0, x1, thickness, c)


@dataclass
class StaffLineSet:
    staff_lines: list = field(default_factory=list)
    non_staff: list = field(default_factory=list)


@dataclass(eq=False)
class StaffSystem:
    """Five staff lines sorted top to bottom."""

    lines: list

    def __post_init__(self):
        if len(self.lines) != 5:
            raise ParameterError(f"a stave has exactly 5 lines, got {len(self.lines)}")
        self.lines = sorted(self.lines, key=lambda ln: ln.y_center)
        if self.spacing <= 0:
            raise ParameterError("stave line spacing must be positive")

    @property
    def line_ys(self):
        return [ln.y_center for ln in self.lines]

    @property
    def gaps(self):
        ys = self.line_ys
        return [b - a for a, b in zip(ys, ys[1:])]

    @property
    def spacing(self) -> float:
        return (self.lines[-1].y_center - self.lines[0].y_center) / 4

    @property
    def top_y(self) -> float:
        return self.lines[0].y_center

    @property
    def bottom_y(self) -> float:
        return self.lines[-1].y_center

    @property
    def x_span(self):
        return min(ln.x_start for ln in self.lines), max(ln.x_end for ln in self.lines)

    @classmethod
    def from_line_ys(cls, ys, x_span=(0, 1)) -> "StaffSystem":
        x0, x1 = x_span
        return cls([StaffLine(float(y), int(x0), int(x1), 1) for y in ys])

    def __repr__(self):
        ys = ", ".join(f"{y:.1f}" for y in self.line_ys)
        return f"StaffSystem(line_ys=[{ys}], spacing={self.spacing:.2f})"


def _median_height(contours):
    return float(np.median([c.height for c in contours]))


def classify_line_contours(contours, params: StaffDetectParams | None = None) -> StaffLineSet:
    """Split contours into staff lines (long, thin) and everything else."""
    params = params or StaffDetectParams()
    out = StaffLineSet()
    if not contours:
        return out
    limit = params.max_thickness_factor * _median_height(contours)
    for c in contours:
        if c.width / c.height >= params.min_aspect and c.height <= limit:
            out.staff_lines.append(StaffLine.from_contour(c))
        else:
            out.non_staff.append(c)
    out.staff_lines.sort(key=lambda ln: (ln.y_center, ln.x_start))
    return out


def split_spanning_contours(contours, median_thickness: float) -> list[Contour]:
    """Cut contours taller than twice the median thickness at projection valleys.

    Rows whose pixel count is below half the contour's busiest row are
    valleys; each run of non-valley rows becomes its own contour and
    valley pixels are dropped.  A contour without a valley is returned as is.
    """
    if median_thickness < 1:
        raise ParameterError("median_thickness must be >= 1")
    out = []
    for c in contours:
        if c.height <= 2 * median_thickness:
            out.append(c)
            continue
        y0 = c.bbox[1]
        proj = np.bincount(c.ys - y0, minlength=c.height)
        strong = proj * 2 >= proj.max()
        edges = np.diff(np.concatenate(([0], strong.astype(np.int8), [0])))
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1)
        if len(starts) < 2:
            out.append(c)
            continue
        rel = c.ys - y0
        for s, e in zip(starts, stops):
            sel = (rel >= s) & (rel < e)
            out.append(Contour(c.ys[sel], c.xs[sel]))
    return out


def _gaps_ok(gaps, tol):
    med = float(np.median(gaps))
    return med > 0 and max(abs(g - med) for g in gaps) <= tol * med


def group_staves(lines, params: StaffDetectParams | None = None):
    """Greedy top-to-bottom grouping of staff lines into five-line staves.

    A line joins the open group when its gap to the previous line is within
    ``group_gap_tolerance`` of the group's running median gap.  On a break,
    only the last line of the group is kept as the seed of a new group.

    Returns ``(staves, orphans)``.
    """
    params = params or StaffDetectParams()
    tol = params.group_gap_tolerance
    lines = sorted(lines, key=lambda ln: ln.y_center)
    staves, orphans = [], []
    group = []
    for ln in lines:
        if not group:
            group = [ln]
            continue
        gap = ln.y_center - group[-1].y_center
        if len(group) == 1:
            ok = gap > 0
        else:
            gaps = [b.y_center - a.y_center for a, b in zip(group, group[1:])]
            med = float(np.median(gaps))
            ok = abs(gap - med) <= tol * med
        if not ok:
            orphans.extend(group[:-1])
            group = [group[-1]]
            if gap > 0:
                group.append(ln)
            else:
                orphans.append(ln)
            continue
        group.append(ln)
        if len(group) == 5:
            gaps = [b.y_center - a.y_center for a, b in zip(group, group[1:])]
            if _gaps_ok(gaps, tol):
                staves.append(StaffSystem(group))
                group = []
            else:
                orphans.append(group.pop(0))
    orphans.extend(group)
    orphans.sort(key=lambda ln: ln.y_center)
    return staves, orphans


def binarize_page(gray, params: StaffDetectParams | None = None) -> np.ndarray:
    g = imaging.as_gray(gray)
    if g.min() == g.max():
        # no contrast, no ink
        return np.zeros(g.shape, dtype=bool)
    return imaging.binarize(g, imaging.otsu_threshold(g), dark_is_foreground=True)


def detect_staff(img, params: StaffDetectParams | None = None):
    """Run the full pipeline on a gray (or RGB) page.

    Returns ``(StaffLineSet, staves)``.  A blank page yields empty results.
    """
    params = params or StaffDetectParams()
    a = np.asarray(img)
    gray = imaging.to_grayscale(a) if a.ndim == 3 else imaging.as_gray(a)
    bits = binarize_page(gray, params)
    lines_img = imaging.extract_horizontal_lines(bits, params.kernel_width(gray.shape[1]))
    contours = imaging.connected_components(lines_img)
    if not contours:
        return StaffLineSet(), []
    contours = split_spanning_contours(contours, max(1.0, _median_height(contours)))
    for i, c in enumerate(contours):
        c.id = i
    line_set = classify_line_contours(contours, params)
    staves, _ = group_staves(line_set.staff_lines, params)
    return line_set, staves


def render_overlay(img, line_set: StaffLineSet) -> np.ndarray:
    """Gray page as RGB with staff-line pixels green and non-staff contours red."""
    a = np.asarray(img)
    gray = imaging.to_grayscale(a) if a.ndim == 3 else imaging.as_gray(a)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    for c in line_set.non_staff:
        rgb[c.ys, c.xs] = NON_STAFF_RED
    for ln in line_set.staff_lines:
        if ln.contour is not None:
            rgb[ln.contour.ys, ln.contour.xs] = STAFF_GREEN
    return rgb


def _r(v, nd=4):
    return round(float(v), nd)


def staff_document(page: str, line_set: StaffLineSet, staves) -> dict:
    """The ``staff.json`` document, keys in documented order."""
    return {
        "page": page,
        "staves": [
            {
                "index": i,
                "line_ys": [_r(y) for y in s.line_ys],
                "x_span": [int(s.x_span[0]), int(s.x_span[1])],
                "spacing": _r(s.spacing),
            }
            for i, s in enumerate(staves)
        ],
        "non_staff_count": len(line_set.non_staff),
    }


def staves_from_document(doc) -> list[StaffSystem]:
    """Rebuild staves from a parsed ``staff.json``; raises :class:`SchemaError`."""
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    raw = doc.get("staves")
    if not isinstance(raw, list):
        raise SchemaError("missing or non-list", field="staves")
    out = []
    for i, s in enumerate(raw):
        where = f"staves[{i}]"
        if not isinstance(s, dict):
            raise SchemaError("must be an object", field=where)
        ys = s.get("line_ys")
        if not (isinstance(ys, list) and len(ys) == 5 and all(isinstance(y, (int, float)) for y in ys)):
            raise SchemaError("must be a list of 5 numbers", field=f"{where}.line_ys")
        if sorted(ys) != list(ys) or ys[-1] <= ys[0]:
            raise SchemaError("must be strictly increasing", field=f"{where}.line_ys")
        span = s.get("x_span", [0, 1])
        if not (isinstance(span, list) and len(span) == 2):
            raise SchemaError("must be [x_start, x_end]", field=f"{where}.x_span")
        out.append(StaffSystem.from_line_ys(ys, span))
    return out


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
