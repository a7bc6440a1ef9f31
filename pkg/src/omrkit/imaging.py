"""Raster primitives: grayscale, Otsu, binary morphology, 8-connected components.

Gray images are ``(H, W)`` ``uint8`` arrays (0 black, 255 white); binary
images are ``(H, W)`` ``bool`` arrays with ``True`` meaning ink.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidInputError

# ITU-R BT.601 luma weights, scaled to integers for exact rounding
_LUMA = (299, 587, 114)


def to_grayscale(rgb) -> np.ndarray:
    """Convert an ``(H, W, 3)`` 8-bit RGB array to gray with BT.601 luma.

    Rounds half up, computed in integer arithmetic so results are bit-exact.
    """
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) array, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidInputError("zero-size image")
    if a.dtype != np.uint8:
        if a.min() < 0 or a.max() > 255:
            raise InvalidInputError("channels must be 8-bit")
    a = a.astype(np.int64)
    wr, wg, wb = _LUMA
    y = (wr * a[..., 0] + wg * a[..., 1] + wb * a[..., 2] + 500) // 1000
    return np.clip(y, 0, 255).astype(np.uint8)


def as_gray(img) -> np.ndarray:
    """Validate a gray image and return it as a ``uint8`` array."""
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D image, got shape {a.shape}")
    if a.dtype != np.uint8:
        if a.min() < 0 or a.max() > 255:
            raise InvalidInputError("gray levels must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def _between_class_terms(hist):
    levels = np.arange(256, dtype=np.int64)
    n0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    n = int(n0[-1])
    s = int(s0[-1])
    n1 = n - n0
    s1 = s - s0
    return n0, n1, s0, s1


def otsu_threshold(img) -> int:
    """Global Otsu threshold over the 256-bin histogram.

    Class 0 is ``pixel <= t``.  The between-class variance is maximised with
    ties resolved to the smallest ``t``; comparisons of near-equal candidates
    are made in exact integer arithmetic.  A constant image returns its own
    intensity.
    """
    g = as_gray(img)
    hist = np.bincount(g.ravel(), minlength=256).astype(np.int64)
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return int(nonzero[0])
    n0, n1, s0, s1 = _between_class_terms(hist)
    # sigma_b^2 * N^2 == (n1*s0 - n0*s1)^2 / (n0*n1)
    valid = (n0 > 0) & (n1 > 0)
    d = (n1 * s0 - n0 * s1).astype(np.float64)
    denom = np.where(valid, n0 * n1, 1).astype(np.float64)
    approx = np.where(valid, d * d / denom, -1.0)
    best = approx.max()
    cands = np.flatnonzero(approx >= best * (1 - 1e-9))
    best_t, best_num, best_den = None, 0, 1
    for t in cands:
        a0, a1 = int(n0[t]), int(n1[t])
        num = (a1 * int(s0[t]) - a0 * int(s1[t])) ** 2
        den = a0 * a1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = int(t), num, den
    return best_t


def binarize(img, t: int, dark_is_foreground: bool = True) -> np.ndarray:
    g = as_gray(img)
    if not 0 <= t <= 255:
        raise InvalidInputError(f"threshold {t} outside [0, 255]")
    return g <= t if dark_is_foreground else g > t


@dataclass(frozen=True)
class StructuringElement:
    """Rectangular all-true structuring element.

    The origin sits at ``(width // 2, height // 2)``, so the element covers
    x offsets ``[-(width // 2), width - 1 - width // 2]`` and likewise in y.
    """

    width: int
    height: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"structuring element must be at least 1x1, got {self.width}x{self.height}")

    @property
    def anchor(self):
        return self.width // 2, self.height // 2

    def reflected(self) -> "ReflectedElement":
        return ReflectedElement(self.width, self.height)


@dataclass(frozen=True)
class ReflectedElement(StructuringElement):
    """Point reflection of a :class:`StructuringElement` about its origin."""

    @property
    def anchor(self):
        return self.width - 1 - self.width // 2, self.height - 1 - self.height // 2

    def reflected(self) -> StructuringElement:
        return StructuringElement(self.width, self.height)


def _as_bits(img):
    a = np.asarray(img)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a 2-D binary image, got shape {a.shape}")
    return np.ascontiguousarray(a, dtype=bool)


def erode(img, se: StructuringElement) -> np.ndarray:
    bits = _as_bits(img)
    ax, ay = se.anchor
    out = bits
    if se.width > 1:
        out = kernels.erode_rows(out, se.width, ax)
    if se.height > 1:
        out = np.ascontiguousarray(kernels.erode_rows(np.ascontiguousarray(out.T), se.height, ay).T)
    return out.copy() if out is bits else out


def dilate(img, se: StructuringElement) -> np.ndarray:
    bits = _as_bits(img)
    ax, ay = se.anchor
    out = bits
    if se.width > 1:
        out = kernels.dilate_rows(out, se.width, ax)
    if se.height > 1:
        out = np.ascontiguousarray(kernels.dilate_rows(np.ascontiguousarray(out.T), se.height, ay).T)
    return out.copy() if out is bits else out


def morph(img, se: StructuringElement, op: str) -> np.ndarray:
    """Binary morphology with background outside the image.

    ``op`` is one of ``erode``, ``dilate``, ``open`` (dilate after erode) or
    ``close`` (erode after dilate).
    """
    if op == "erode":
        return erode(img, se)
    if op == "dilate":
        return dilate(img, se)
    if op == "open":
        return dilate(erode(img, se), se)
    if op == "close":
        return erode(dilate(img, se), se)
    raise InvalidInputError(f"unknown morphology op {op!r}")


def extract_horizontal_lines(img, kernel_width: int) -> np.ndarray:
    """Keep only horizontal runs at least ``kernel_width`` pixels long."""
    if kernel_width < 2:
        raise InvalidInputError("kernel_width must be >= 2")
    return morph(img, StructuringElement(int(kernel_width), 1), "open")


@dataclass(eq=False)
class Contour:
    """One 8-connected foreground component.

    ``ys``/``xs`` hold member pixel coordinates in raster order.  ``bbox`` is
    half-open ``(x_min, y_min, x_max, y_max)``.
    """

    ys: np.ndarray
    xs: np.ndarray
    id: int = -1
    bbox: tuple = field(init=False)

    def __post_init__(self):
        self.ys = np.asarray(self.ys, dtype=np.int64)
        self.xs = np.asarray(self.xs, dtype=np.int64)
        if self.ys.size == 0 or self.ys.shape != self.xs.shape:
            raise InvalidInputError("contour needs at least one pixel and matching coordinate arrays")
        self.bbox = (int(self.xs.min()), int(self.ys.min()), int(self.xs.max()) + 1, int(self.ys.max()) + 1)

    @property
    def area(self) -> int:
        return int(self.ys.size)

    @property
    def width(self) -> int:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> int:
        return self.bbox[3] - self.bbox[1]

    def __repr__(self):
        return f"Contour(id={self.id}, bbox={self.bbox}, area={self.area})"


def connected_components(img) -> list[Contour]:
    """Maximal 8-connected components sorted by ``(y_min, x_min)``."""
    bits = _as_bits(img)
    labels, n = kernels.label8(bits)
    if n == 0:
        return []
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    order = np.argsort(lab, kind="stable")
    idx = idx[order]
    counts = np.bincount(lab, minlength=n + 1)[1:]
    width = bits.shape[1]
    out = []
    for chunk in np.split(idx, np.cumsum(counts)[:-1]):
        out.append(Contour(chunk // width, chunk % width))
    # labels follow raster order of first pixel, which breaks (y_min, x_min) ties
    out.sort(key=lambda c: (c.bbox[1], c.bbox[0]))
    for i, c in enumerate(out):
        c.id = i
    return out


def read_image(path) -> np.ndarray:
    """Read a PNG/PGM/etc. file into an 8-bit gray or ``(H, W, 3)`` RGB array."""
    from PIL import Image

    with Image.open(Path(path)) as im:
        im.load()
        if im.mode in ("1", "L", "LA"):
            return np.array(im.convert("L"))
        if im.mode.startswith("I"):
            a = np.asarray(im, dtype=np.int64)
            return (a >> 8 if a.max() > 255 else a).astype(np.uint8)
        return np.array(im.convert("RGB"))


def load_gray(path) -> np.ndarray:
    a = read_image(path)
    return a if a.ndim == 2 else to_grayscale(a)


def write_image(path, img) -> None:
    """Write a gray or RGB ``uint8`` array.  Format follows the file suffix."""
    from PIL import Image

    a = np.asarray(img)
    if a.dtype == bool:
        a = np.where(a, 0, 255).astype(np.uint8)
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".ppm", ".pnm") else None
    Image.fromarray(a).save(path, format=fmt)
