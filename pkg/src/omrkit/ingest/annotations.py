"""DoReMi-style and MUSCIMA++-style annotation XML.

Both dialects describe one object per element with ``Id``, ``ClassName``,
``Top``, ``Left``, ``Width``, ``Height`` and an optional ``Mask`` holding a
bbox-local run-length string.  They differ in container element names; see
``docs/formats.md``.
"""
from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import PurePath

from ..errors import AnnotationParseError, MalformedMaskError
from ..geometry import BBox, PixelMask, rle_decode

log = logging.getLogger(__name__)

DOREMI_PAGE_SIZE = (2475, 3504)

_REQUIRED = ("Id", "Top", "Left", "Width", "Height")
_OPTIONAL = {"Mask", "Inlinks", "Outlinks", "Data", "UniqueId", "Selected", "Text"}

DIALECTS = {
    # object element names accepted for each dialect
    "doremi": {"objects": ("Node",), "class_tags": ("ClassName",)},
    "muscima": {"objects": ("CropObject", "Node"), "class_tags": ("ClassName", "MLClassName")},
}


@dataclass
class GroundTruthObject:
    id: str
    category: str
    bbox: BBox
    mask: PixelMask | None = None


@dataclass
class GroundTruthPage:
    page_id: str
    width: int = DOREMI_PAGE_SIZE[0]
    height: int = DOREMI_PAGE_SIZE[1]
    objects: list = field(default_factory=list)


def _int_field(el, tag, oid):
    node = el.find(tag)
    if node is None or node.text is None or not node.text.strip():
        raise AnnotationParseError(f"missing <{tag}>", object_id=oid)
    text = node.text.strip()
    try:
        v = float(text)
    except ValueError:
        raise AnnotationParseError(f"<{tag}> is not a number: {text!r}", object_id=oid) from None
    if not v.is_integer():
        raise AnnotationParseError(f"<{tag}> must be an integer pixel value, got {text}", object_id=oid)
    return int(v)


def _parse_object(el, dialect, strict, page_size):
    spec = DIALECTS[dialect]
    id_el = el.find("Id")
    oid = id_el.text.strip() if id_el is not None and id_el.text else None
    if oid is None:
        raise AnnotationParseError("object without <Id>")
    cls = next((el.find(t) for t in spec["class_tags"] if el.find(t) is not None), None)
    if cls is None or not (cls.text or "").strip():
        raise AnnotationParseError("missing class name", object_id=oid)
    if strict:
        known = set(_REQUIRED) | _OPTIONAL | set(spec["class_tags"])
        unknown = sorted({child.tag for child in el} - known)
        if unknown:
            raise AnnotationParseError(f"unknown fields {unknown}", object_id=oid)
    top, left = _int_field(el, "Top", oid), _int_field(el, "Left", oid)
    width, height = _int_field(el, "Width", oid), _int_field(el, "Height", oid)
    if width <= 0 or height <= 0 or top < 0 or left < 0:
        raise AnnotationParseError(
            f"invalid geometry top={top} left={left} width={width} height={height}", object_id=oid)
    bbox = BBox(left, top, left + width, top + height)
    pw, ph = page_size
    if bbox.x_max > pw or bbox.y_max > ph:
        if strict:
            raise AnnotationParseError(f"bbox {tuple(bbox)} exceeds page {pw}x{ph}", object_id=oid)
        log.warning("object %s: bbox %s exceeds page %dx%d", oid, tuple(bbox), pw, ph)
    mask = None
    mask_el = el.find("Mask")
    if mask_el is not None and (mask_el.text or "").strip():
        try:
            mask = rle_decode(mask_el.text, bbox)
        except MalformedMaskError as exc:
            raise AnnotationParseError(str(exc), object_id=oid) from None
    return GroundTruthObject(oid, cls.text.strip(), bbox, mask)


def _page_size(el, parent=None):
    src = el if el.get("width") is not None else parent
    if src is None or src.get("width") is None:
        return DOREMI_PAGE_SIZE
    try:
        w, h = int(src.get("width")), int(src.get("height"))
    except (TypeError, ValueError):
        raise AnnotationParseError("page width/height attributes must be integers") from None
    if w <= 0 or h <= 0:
        raise AnnotationParseError(f"non-positive page size {w}x{h}")
    return w, h


def _page_id(el, root, fallback, index):
    image = el.get("image") or root.get("image")
    if image:
        return PurePath(image).stem
    for key in ("id", "document"):
        v = el.get(key) or root.get(key)
        if v:
            return v
    if fallback:
        return fallback
    return el.get("pageIndex", str(index))


def parse_annotation_pages(data, dialect: str = "doremi", strict: bool = False, page_id=None):
    """Parse every page in an annotation document.

    ``page_id`` is used when the document does not name its pages (pass the
    file stem).  Errors are :class:`AnnotationParseError`, carrying the
    offending object id when there is one.
    """
    if dialect not in DIALECTS:
        raise AnnotationParseError(f"unknown dialect {dialect!r}")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise AnnotationParseError(f"malformed XML: {exc}") from None
    object_tags = DIALECTS[dialect]["objects"]
    if dialect == "doremi":
        page_els = [root] if root.tag == "Page" else root.findall("Page")
        if not page_els:
            page_els = [root]
    else:
        page_els = [root]
    pages = []
    for i, pel in enumerate(page_els):
        size = _page_size(pel, root)
        pid = _page_id(pel, root, page_id if len(page_els) == 1 else None, i)
        objs = []
        seen = set()
        for tag in object_tags:
            for el in pel.iter(tag):
                obj = _parse_object(el, dialect, strict, size)
                if obj.id in seen:
                    raise AnnotationParseError("duplicate id", object_id=obj.id)
                seen.add(obj.id)
                objs.append(obj)
        pages.append(GroundTruthPage(pid, size[0], size[1], objs))
    return pages


def parse_annotation_xml(data, dialect: str = "doremi", strict: bool = False, page_id=None) -> GroundTruthPage:
    """Parse a single-page annotation document."""
    pages = parse_annotation_pages(data, dialect, strict, page_id)
    if len(pages) != 1:
        raise AnnotationParseError(f"expected one page, found {len(pages)}; use parse_annotation_pages")
    return pages[0]
