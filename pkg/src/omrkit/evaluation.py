"""Greedy IoU matching, Pascal-VOC style Average Precision and mAP reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError, ParameterError
from .geometry import PixelMask, iou_bbox, iou_mask

SMALL_AREA = 32 ** 2
LARGE_AREA = 96 ** 2
BUCKETS = ("small", "medium", "large")


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    iou_kind: str = "box"  # or "mask"
    ap_style: str = "all-point"  # or "11-point"
    small_area: float = SMALL_AREA
    large_area: float = LARGE_AREA

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ParameterError(f"iou_threshold must lie in (0, 1), got {self.iou_threshold}")
        if self.iou_kind not in ("box", "mask"):
            raise ParameterError(f"iou_kind must be 'box' or 'mask', got {self.iou_kind!r}")
        if self.ap_style not in ("all-point", "11-point"):
            raise ParameterError(f"ap_style must be 'all-point' or '11-point', got {self.ap_style!r}")
        if not 0 < self.small_area <= self.large_area:
            raise ParameterError("size bucket bounds must satisfy 0 < small <= large")

    def bucket(self, area) -> str:
        if area < self.small_area:
            return "small"
        if area < self.large_area:
            return "medium"
        return "large"


def _as_mask(obj):
    if obj.mask is not None:
        return obj.mask
    if obj.bbox.is_integral():
        return PixelMask.full(obj.bbox)
    return None


def pair_iou(det, gt, kind: str = "box") -> float:
    if kind == "mask":
        a, b = _as_mask(det), _as_mask(gt)
        if a is not None and b is not None:
            return iou_mask(a, b)
    return iou_bbox(det.bbox, gt.bbox)


def score_order(dets) -> list[int]:
    """Indices by descending score, ties kept in input order."""
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def match_detections(dets, gts, cfg: EvalConfig | None = None) -> np.ndarray:
    """Match one page, per category.  Returns the matched gt index per detection, -1 for FP.

    In descending score order each detection takes the unclaimed
    same-category ground truth with the highest IoU, provided the IoU is
    strictly above the threshold.
    """
    cfg = cfg or EvalConfig()
    matched = np.full(len(dets), -1, dtype=np.int64)
    claimed = np.zeros(len(gts), dtype=bool)
    by_cat = {}
    for j, g in enumerate(gts):
        by_cat.setdefault(g.category, []).append(j)
    for i in score_order(dets):
        d = dets[i]
        best_j, best_iou = -1, cfg.iou_threshold
        for j in by_cat.get(d.category, ()):
            if claimed[j]:
                continue
            iou = pair_iou(d, gts[j], cfg.iou_kind)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            claimed[best_j] = True
            matched[i] = best_j
    return matched


def pr_curve(tp_flags, n_gt: int):
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.int64))
    fp = np.cumsum(1 - np.asarray(tp_flags, dtype=np.int64))
    recall = tp / n_gt if n_gt else np.zeros(len(tp))
    precision = tp / np.maximum(tp + fp, 1)
    return recall, precision


def average_precision(tp_flags, n_gt: int, style: str = "all-point"):
    """AP of a score-ordered TP/FP sequence.

    Returns ``None`` when there is neither ground truth nor a detection (the
    category does not take part), 0.0 for detections without ground truth.
    """
    flags = np.asarray(tp_flags, dtype=bool)
    if n_gt < 0:
        raise ParameterError("n_gt must be >= 0")
    if n_gt == 0:
        return None if flags.size == 0 else 0.0
    if flags.size == 0:
        return 0.0
    if int(flags.sum()) > n_gt:
        raise ParameterError(f"{int(flags.sum())} true positives exceed {n_gt} ground-truth objects")
    recall, precision = pr_curve(flags, n_gt)
    if style == "all-point":
        mrec = np.concatenate(([0.0], recall, [1.0]))
        mpre = np.concatenate(([0.0], precision, [0.0]))
        mpre = np.maximum.accumulate(mpre[::-1])[::-1]
        steps = np.flatnonzero(mrec[1:] != mrec[:-1])
        return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))
    if style == "11-point":
        tp_count = np.cumsum(flags.astype(np.int64))
        total = 0.0
        for k in range(11):
            # recall >= k/10, compared in integers
            reach = tp_count * 10 >= k * n_gt
            total += float(precision[reach].max()) if reach.any() else 0.0
        return total / 11
    raise ParameterError(f"unknown AP style {style!r}")


@dataclass
class CategoryResult:
    category: str
    ap: float | None
    n_gt: int
    tp: int
    fp: int
    fn: int
    recall: list = field(default_factory=list, repr=False)
    precision: list = field(default_factory=list, repr=False)


@dataclass
class EvalReport:
    config: EvalConfig
    categories: dict
    mAP: float | None
    size_mAP: dict

    @property
    def totals(self):
        cats = self.categories.values()
        return {k: sum(getattr(c, k) for c in cats) for k in ("tp", "fp", "fn")}


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _check_pages(det_pages, gt_pages):
    gt_ids = [g.page_id for g in gt_pages]
    if len(set(gt_ids)) != len(gt_ids):
        raise EvalError("duplicate ground-truth page ids")
    dets = {}
    for page_id, symbols in det_pages:
        if page_id in dets:
            raise EvalError(f"duplicate detection page id {page_id!r}")
        dets[page_id] = symbols
    orphans = sorted(set(dets) - set(gt_ids))
    if orphans:
        raise EvalError(f"detection pages without ground truth: {orphans}")
    return dets


def evaluate(det_pages, gt_pages, cfg: EvalConfig | None = None) -> EvalReport:
    """Pool matches over pages and report per-category AP, mAP and size-bucket mAP.

    ``det_pages`` is an iterable of ``(page_id, detections)`` pairs or of
    objects with ``page_id`` and ``detections``; ``gt_pages`` holds
    :class:`~omrkit.ingest.GroundTruthPage`.  Ground-truth pages without
    detections count as pages with none.  Size buckets go by the matched
    ground truth's box area for true positives and by the detection's own
    area for false positives.
    """
    cfg = cfg or EvalConfig()
    det_pages = [(p.page_id, p.detections) if hasattr(p, "detections") else tuple(p) for p in det_pages]
    gt_pages = sorted(gt_pages, key=lambda g: g.page_id)
    dets_by_page = _check_pages(det_pages, gt_pages)

    # rows: (score, page order, det index, category, tp, bucket)
    rows = []
    n_gt = {}
    n_gt_bucket = {}
    for order, gpage in enumerate(gt_pages):
        gts = gpage.objects
        for g in gts:
            n_gt[g.category] = n_gt.get(g.category, 0) + 1
            key = (g.category, cfg.bucket(g.bbox.area))
            n_gt_bucket[key] = n_gt_bucket.get(key, 0) + 1
        dets = list(dets_by_page.get(gpage.page_id, []))
        matched = match_detections(dets, gts, cfg)
        for i, d in enumerate(dets):
            j = matched[i]
            area = gts[j].bbox.area if j >= 0 else d.bbox.area
            rows.append((-d.score, order, i, d.category, j >= 0, cfg.bucket(area)))
    rows.sort(key=lambda r: r[:3])

    cats = sorted(set(n_gt) | {r[3] for r in rows})
    flags = {c: [] for c in cats}
    bucket_flags = {}
    for r in rows:
        flags[r[3]].append(r[4])
        bucket_flags.setdefault((r[3], r[5]), []).append(r[4])

    results = {}
    for c in cats:
        f = flags[c]
        ng = n_gt.get(c, 0)
        tp = int(sum(f))
        rec, prec = pr_curve(f, ng) if f else ([], [])
        results[c] = CategoryResult(
            c, average_precision(f, ng, cfg.ap_style), ng, tp, len(f) - tp, ng - tp,
            [float(v) for v in rec], [float(v) for v in prec])

    m = _mean(r.ap for r in results.values() if r.n_gt > 0)
    size_map = {}
    for b in BUCKETS:
        aps = []
        for c in cats:
            ng = n_gt_bucket.get((c, b), 0)
            if ng:
                aps.append(average_precision(bucket_flags.get((c, b), []), ng, cfg.ap_style))
        size_map[b] = _mean(aps)
    return EvalReport(cfg, results, m, size_map)


def _r(v):
    return None if v is None else round(float(v), 6)


def report_document(report: EvalReport) -> dict:
    cfg = report.config
    return {
        "iou_threshold": cfg.iou_threshold,
        "iou_kind": cfg.iou_kind,
        "ap_style": cfg.ap_style,
        "mAP": _r(report.mAP),
        "size_mAP": {b: _r(report.size_mAP.get(b)) for b in BUCKETS},
        "totals": report.totals,
        "categories": [
            {"category": c.category, "ap": _r(c.ap), "n_gt": c.n_gt, "tp": c.tp, "fp": c.fp, "fn": c.fn}
            for c in report.categories.values()
        ],
    }


def report_json(report: EvalReport) -> str:
    return json.dumps(report_document(report), indent=2, ensure_ascii=False) + "\n"


def report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category", "ap", "n_gt", "tp", "fp", "fn"])
    for c in report.categories.values():
        w.writerow([c.category, "" if c.ap is None else f"{c.ap:.6f}", c.n_gt, c.tp, c.fp, c.fn])
    return buf.getvalue()
