"""Detections interchange JSON and ground-truth-as-detection conversion."""
from __future__ import annotations

import json
import numbers
from dataclasses import dataclass, field
from pathlib import PurePath

from ..errors import InvalidInputError, MalformedMaskError, SchemaError
from ..geometry import BBox, rle_decode, rle_encode
from ..pitch import DetectedSymbol


@dataclass
class DetectionPage:
    image: str
    width: int
    height: int
    detections: list = field(default_factory=list)

    @property
    def page_id(self) -> str:
        return PurePath(self.image).stem


def _num(v):
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _read_symbol(d, where):
    if not isinstance(d, dict):
        raise SchemaError("must be an object", field=where)
    cat = d.get("category")
    if not isinstance(cat, str) or not cat:
        raise SchemaError("missing or empty", field=f"{where}.category")
    score = d.get("score")
    if not _num(score) or not 0.0 <= score <= 1.0:
        raise SchemaError(f"must be a number in [0, 1], got {score!r}", field=f"{where}.score")
    bbox = d.get("bbox")
    if not (isinstance(bbox, list) and len(bbox) == 4 and all(_num(v) for v in bbox)):
        raise SchemaError("must be [x_min, y_min, width, height]", field=f"{where}.bbox")
    x, y, w, h = bbox
    if w <= 0 or h <= 0:
        raise SchemaError("width and height must be positive", field=f"{where}.bbox")
    box = BBox(x, y, x + w, y + h)
    mask = None
    rle = d.get("mask_rle")
    if rle is not None:
        if not isinstance(rle, str):
            raise SchemaError("must be a string", field=f"{where}.mask_rle")
        if not box.is_integral():
            raise SchemaError("masks need an integer bbox", field=f"{where}.bbox")
        try:
            mask = rle_decode(rle, box)
        except MalformedMaskError as exc:
            raise SchemaError(str(exc), field=f"{where}.mask_rle") from None
    try:
        return DetectedSymbol(cat, score, box, mask)
    except InvalidInputError as exc:
        raise SchemaError(str(exc), field=where) from None


def read_detections(src) -> DetectionPage:
    """Parse a detections document from text, bytes or an already-loaded dict."""
    if isinstance(src, (str, bytes, bytearray)):
        try:
            doc = json.loads(src)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    else:
        doc = src
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    image = doc.get("image", "")
    if not isinstance(image, str):
        raise SchemaError("must be a string", field="image")
    for key in ("width", "height"):
        v = doc.get(key, 0)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SchemaError("must be a non-negative integer", field=key)
    dets = doc.get("detections")
    if not isinstance(dets, list):
        raise SchemaError("missing or non-list", field="detections")
    symbols = [_read_symbol(d, f"detections[{i}]") for i, d in enumerate(dets)]
    return DetectionPage(image, doc.get("width", 0), doc.get("height", 0), symbols)


def detection_document(page: DetectionPage) -> dict:
    dets = []
    for s in page.detections:
        d = {"category": s.category, "score": s.score, "bbox": s.bbox.xywh()}
        if s.mask is not None:
            d["mask_rle"] = rle_encode(s.mask)
        dets.append(d)
    return {"image": page.image, "width": page.width, "height": page.height, "detections": dets}


def write_detections(page: DetectionPage) -> str:
    return json.dumps(detection_document(page), indent=2, ensure_ascii=False) + "\n"


def gt_as_detections(page) -> list[DetectedSymbol]:
    """Every ground-truth object as a score-1.0 detection (a perfect detector)."""
    return [DetectedSymbol(o.category, 1.0, o.bbox, o.mask) for o in page.objects]
