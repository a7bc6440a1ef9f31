"""Detection geometry and reference loss math.

Grid anchors, centre-size box delta coding, greedy NMS, fixed-size mini
masks, the two-stage detector loss and the instance-segmentation loss sum.
Boxes are ``(x_min, y_min, x_max, y_max)`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InvalidInputError, ParameterError
from .geometry import BBox, PixelMask

# configuration reported for the trained models
ANCHOR_SCALES = (32, 64, 128, 256, 512)
ANCHOR_RATIOS = (0.5, 1.0, 2.0)
ANCHOR_STRIDE = 1
BBOX_STD = (0.1, 0.1, 0.2, 0.2)
MINI_MASK_SHAPE = (56, 56)
PROPOSAL_NMS = (0.5, 500)  # (IoU threshold, max proposals), first stage
RPN_NMS_THRESHOLD = 0.7
DETECTION_NMS_THRESHOLD = 0.3
DETECTION_MAX_INSTANCES = 100
DETECTION_MIN_CONFIDENCE = 0.9


@dataclass(frozen=True)
class AnchorConfig:
    scales: tuple = ANCHOR_SCALES
    ratios: tuple = ANCHOR_RATIOS
    stride: float = ANCHOR_STRIDE
    grid: tuple = (1, 1)  # (cols, rows)

    def __post_init__(self):
        if not self.scales or not self.ratios:
            raise ParameterError("scales and ratios must be non-empty")
        if any(v <= 0 for v in (*self.scales, *self.ratios, self.stride)):
            raise ParameterError("scales, ratios and stride must be positive")
        if len(self.grid) != 2 or any(int(g) != g or g < 1 for g in self.grid):
            raise ParameterError(f"grid must be two positive integers, got {self.grid}")

    @property
    def count(self) -> int:
        return self.grid[0] * self.grid[1] * len(self.scales) * len(self.ratios)


def generate_anchors(cfg: AnchorConfig) -> np.ndarray:
    """``(rows*cols*len(scales)*len(ratios), 4)`` anchors in row-major cell, scale, ratio order.

    Cell ``(ix, iy)`` is centred at ``(ix*stride, iy*stride)``; an anchor of
    scale ``s`` and ratio ``r`` is ``s*sqrt(r)`` wide and ``s/sqrt(r)`` high.
    """
    cols, rows = (int(g) for g in cfg.grid)
    scales = np.asarray(cfg.scales, dtype=np.float64)
    ratios = np.asarray(cfg.ratios, dtype=np.float64)
    s, r = np.meshgrid(scales, ratios, indexing="ij")
    w = (s * np.sqrt(r)).ravel()
    h = (s / np.sqrt(r)).ravel()
    iy, ix = np.mgrid[0:rows, 0:cols]
    cx = (ix.ravel() * cfg.stride)[:, None]
    cy = (iy.ravel() * cfg.stride)[:, None]
    out = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)
    return out.reshape(-1, 4)


def _center_size(b):
    b = np.asarray(b, dtype=np.float64)
    w = b[..., 2] - b[..., 0]
    h = b[..., 3] - b[..., 1]
    if np.any(w <= 0) or np.any(h <= 0):
        raise InvalidInputError("boxes must have positive width and height")
    return b[..., 0] + 0.5 * w, b[..., 1] + 0.5 * h, w, h


def encode_deltas(box, anchor, stds=BBOX_STD) -> np.ndarray:
    """Deltas ``(dy, dx, dh, dw)`` of ``box`` relative to ``anchor``, divided by ``stds``."""
    cx, cy, w, h = _center_size(box)
    ax, ay, aw, ah = _center_size(anchor)
    d = np.stack([(cy - ay) / ah, (cx - ax) / aw, np.log(h / ah), np.log(w / aw)], axis=-1)
    return d / np.asarray(stds, dtype=np.float64)


def decode_deltas(deltas, anchor, stds=BBOX_STD) -> np.ndarray:
    d = np.asarray(deltas, dtype=np.float64) * np.asarray(stds, dtype=np.float64)
    ax, ay, aw, ah = _center_size(anchor)
    cy = ay + d[..., 0] * ah
    cx = ax + d[..., 1] * aw
    h = ah * np.exp(d[..., 2])
    w = aw * np.exp(d[..., 3])
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def nms(boxes, scores, iou_threshold: float = PROPOSAL_NMS[0], max_out: int = PROPOSAL_NMS[1]) -> np.ndarray:
    """Greedy non-maximum suppression.

    Boxes are visited by descending score (ties: lower index first); a box
    is dropped when its IoU with an already kept box exceeds the threshold.
    Returns kept indices in visiting order, at most ``max_out`` of them.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if len(boxes) != len(scores):
        raise InvalidInputError(f"{len(boxes)} boxes but {len(scores)} scores")
    if len(boxes) == 0 or max_out <= 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    return kernels.nms_sorted(boxes, order, float(iou_threshold), int(max_out))


def resize_bilinear(a, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centres and edge clamping."""
    a = np.asarray(a, dtype=np.float64)
    in_h, in_w = a.shape

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    y0, y1, wy = axis(in_h, out_h)
    x0, x1, wx = axis(in_w, out_w)
    rows = a[y0] * (1 - wy)[:, None] + a[y1] * wy[:, None]
    return rows[:, x0] * (1 - wx)[None, :] + rows[:, x1] * wx[None, :]


def minimask_shrink(m: PixelMask, size=MINI_MASK_SHAPE) -> np.ndarray:
    """Resample a bbox-local mask to ``size`` (rows, cols) and threshold at 0.5."""
    return resize_bilinear(m.grid, *size) >= 0.5


def minimask_expand(mini, bbox) -> PixelMask:
    b = BBox.checked(*(int(v) for v in bbox))
    grid = resize_bilinear(np.asarray(mini, dtype=bool), b.height, b.width) >= 0.5
    return PixelMask(b, grid)


def smooth_l1(x, beta: float = 1.0):
    ax = np.abs(x)
    return np.where(ax < beta, 0.5 * ax * ax / beta, ax - 0.5 * beta)


@dataclass
class LossInputs:
    """Per-anchor terms of the region-proposal loss.

    ``p`` predicted objectness, ``p_star`` 0/1 labels, ``t``/``t_star``
    predicted and target deltas (``(n, 4)``), normalisers ``n_cls`` and
    ``n_reg``, balance weight ``lam``.
    """

    p: np.ndarray
    p_star: np.ndarray
    t: np.ndarray
    t_star: np.ndarray
    n_cls: float = 1.0
    n_reg: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64).ravel()
        self.p_star = np.asarray(self.p_star, dtype=np.float64).ravel()
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1, 4)
        self.t_star = np.asarray(self.t_star, dtype=np.float64).reshape(-1, 4)
        n = len(self.p)
        if not (len(self.p_star) == len(self.t) == len(self.t_star) == n):
            raise InvalidInputError(
                f"length mismatch: p={n} p*={len(self.p_star)} t={len(self.t)} t*={len(self.t_star)}")
        if np.any((self.p < 0) | (self.p > 1)):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        if not np.all(np.isin(self.p_star, (0.0, 1.0))):
            raise InvalidInputError("labels must be 0 or 1")
        if self.n_cls < 1 or self.n_reg < 1:
            raise InvalidInputError("normalisers must be >= 1")


class FasterRcnnLoss(NamedTuple):
    cls: float
    reg: float
    total: float


_EPS = 1e-12


def faster_rcnn_loss(x: LossInputs) -> FasterRcnnLoss:
    """Normalised log loss plus weighted smooth-L1 over positive anchors only."""
    p = np.clip(x.p, _EPS, 1.0)
    q = np.clip(1.0 - x.p, _EPS, 1.0)
    log_loss = -(x.p_star * np.log(p) + (1.0 - x.p_star) * np.log(q))
    cls = float(log_loss.sum() / x.n_cls)
    pos = x.p_star == 1.0
    reg_sum = float(smooth_l1(x.t[pos] - x.t_star[pos]).sum()) if pos.any() else 0.0
    reg = x.lam * reg_sum / x.n_reg
    return FasterRcnnLoss(cls, reg, cls + reg)


@dataclass
class LossComponents:
    rpn_class: float = 0.0
    rpn_bbox: float = 0.0
    mrcnn_class: float = 0.0
    mrcnn_bbox: float = 0.0
    mrcnn_mask: float = 0.0

    def values(self):
        return (self.rpn_class, self.rpn_bbox, self.mrcnn_class, self.mrcnn_bbox, self.mrcnn_mask)


def mask_rcnn_total_loss(c: LossComponents) -> float:
    vals = c.values()
    if any(v < 0 for v in vals):
        raise InvalidInputError(f"loss components must be non-negative, got {vals}")
    # fsum is exactly rounded, hence independent of term order
    return math.fsum(vals)


def anchors_document(cfg: AnchorConfig) -> dict:
    a = generate_anchors(cfg)
    return {
        "config": {
            "scales": list(cfg.scales),
            "ratios": list(cfg.ratios),
            "stride": cfg.stride,
            "grid": list(cfg.grid),
        },
        "count": int(len(a)),
        "anchors": [[round(float(v), 6) for v in row] for row in a],
    }
