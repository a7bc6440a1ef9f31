"""Annotation parsing, detection interchange and synthetic ground truth."""
from .annotations import (
    DOREMI_PAGE_SIZE,
    GroundTruthObject,
    GroundTruthPage,
    parse_annotation_pages,
    parse_annotation_xml,
)
from .detections import DetectionPage, detection_document, gt_as_detections, read_detections, write_detections
from .synth import SynthNote, SynthPage, SynthParams, ground_truth_document, synth_score

__all__ = [
    "DOREMI_PAGE_SIZE",
    "DetectionPage",
    "GroundTruthObject",
    "GroundTruthPage",
    "SynthNote",
    "SynthPage",
    "SynthParams",
    "detection_document",
    "ground_truth_document",
    "gt_as_detections",
    "parse_annotation_pages",
    "parse_annotation_xml",
    "read_detections",
    "synth_score",
    "write_detections",
]
