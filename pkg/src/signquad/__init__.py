"""Signboard quadrilaterals: geometry, rectification, label formats, scoring,
reading order and a box-refining Q-learning agent."""

__version__ = "0.1.0"

from .geometry import GeometryError, Quad, iou, min_area_rect, min_enclosing_quad
from .labels import LabelError, LabelFormat, SignRecord, DetectRecord, OcrRecord
from .evaluate import EvalReport, MatchConfig, evaluate_dataset, match_image

__all__ = [
    "__version__", "GeometryError", "Quad", "iou", "min_area_rect", "min_enclosing_quad",
    "LabelError", "LabelFormat", "SignRecord", "DetectRecord", "OcrRecord",
    "EvalReport", "MatchConfig", "evaluate_dataset", "match_image",
]
