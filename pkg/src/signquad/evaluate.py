"""Signboard recognition scoring.

A predicted board counts as correct only when its quad overlaps an unused
ground-truth board with IoU at or above the threshold *and* the store names
agree.  Corpus accuracy is correct / predicted, recall is correct / ground
truth, and the score is their harmonic mean ``2 * a * r / (a + r)``.
"""
from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .geometry import iou
from .labels import LabelFormat, SignRecord, load_label_file


class EvaluationError(ValueError):
    pass


class NameNormalization(str, enum.Enum):
    NONE = "none"
    STRIP_WHITESPACE = "strip-whitespace"


@dataclass(frozen=True)
class MatchConfig:
    """Matching knobs.

    ``augment`` repairs the greedy IoU-ordered assignment with augmenting
    paths so the number of correct pairs is always the maximum achievable.
    """

    iou_threshold: float = 0.5
    name_normalization: NameNormalization = NameNormalization.STRIP_WHITESPACE
    augment: bool = True

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ValueError("iou_threshold must be in (0, 1]")
        object.__setattr__(self, "name_normalization", NameNormalization(self.name_normalization))


def normalize_name(name: str, mode: NameNormalization | str = NameNormalization.STRIP_WHITESPACE) -> str:
    if NameNormalization(mode) is NameNormalization.NONE:
        return name
    return "".join(ch for ch in name if not ch.isspace())


@dataclass
class ImageResult:
    image_id: str
    n_gt: int
    n_pred: int
    matched: list[tuple[int, int, float]] = field(default_factory=list)  # (pred, gt, iou)
    misses: list[int] = field(default_factory=list)  # unmatched gt indices
    false_alarms: list[int] = field(default_factory=list)  # unmatched pred indices

    @property
    def n_correct(self) -> int:
        return len(self.matched)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "matched": [[p, g, v] for p, g, v in self.matched],
            "misses": list(self.misses),
            "false_alarms": list(self.false_alarms),
        }


def candidate_pairs(preds: Sequence[SignRecord], gts: Sequence[SignRecord],
                    cfg: MatchConfig) -> list[tuple[float, int, int]]:
    """All (iou, pred, gt) pairs passing both tests, best first."""
    pairs = []
    gt_names = [normalize_name(g.store_name, cfg.name_normalization) for g in gts]
    for i, p in enumerate(preds):
        name = normalize_name(p.store_name, cfg.name_normalization)
        for j, g in enumerate(gts):
            if name != gt_names[j]:
                continue
            v = iou(p.quad, g.quad)
            if v >= cfg.iou_threshold:
                pairs.append((v, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    return pairs


def _augment(pairs: list[tuple[float, int, int]], pred_of: dict[int, int],
             gt_of: dict[int, int], n_pred: int) -> None:
    adj: dict[int, list[int]] = {}
    for _, i, j in pairs:  # already best-first
        adj.setdefault(i, []).append(j)

    def try_pred(i: int, seen: set) -> bool:
        for j in adj.get(i, ()):
            if j in seen:
                continue
            seen.add(j)
            if j not in pred_of or try_pred(pred_of[j], seen):
                pred_of[j] = i
                gt_of[i] = j
                return True
        return False

    for i in range(n_pred):
        if i not in gt_of and i in adj:
            try_pred(i, set())


def match_image(preds: Sequence[SignRecord], gts: Sequence[SignRecord],
                cfg: MatchConfig = MatchConfig(), image_id: str = "") -> ImageResult:
    """One-to-one matching of predictions to ground truth for one image.

    Passing pairs are accepted greedily by descending IoU (ties: lower pred
    index, then lower gt index).  Augmenting paths then recover any pair the
    greedy pass blocked.
    """
    pairs = candidate_pairs(preds, gts, cfg)
    gt_of: dict[int, int] = {}
    pred_of: dict[int, int] = {}
    for _, i, j in pairs:
        if i in gt_of or j in pred_of:
            continue
        gt_of[i] = j
        pred_of[j] = i
    if cfg.augment:
        _augment(pairs, pred_of, gt_of, len(preds))
    scores = {(i, j): v for v, i, j in pairs}
    matched = sorted((i, j, scores[i, j]) for i, j in gt_of.items())
    return ImageResult(
        image_id=image_id,
        n_gt=len(gts),
        n_pred=len(preds),
        matched=matched,
        misses=[j for j in range(len(gts)) if j not in pred_of],
        false_alarms=[i for i in range(len(preds)) if i not in gt_of],
    )


def f_score(accuracy: float, recall: float) -> float:
    if accuracy + recall == 0:
        return 0.0
    return 2 * accuracy * recall / (accuracy + recall)


@dataclass
class EvalReport:
    n_gt: int
    n_pred: int
    n_correct: int
    accuracy: float
    recall: float
    f_score: float
    per_image: list[ImageResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "recall": self.recall,
            "f_score": self.f_score,
            "per_image": [r.to_dict() for r in self.per_image],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    def format_table(self) -> str:
        rows = [
            ("images", str(len(self.per_image))),
            ("ground truth", str(self.n_gt)),
            ("predicted", str(self.n_pred)),
            ("correct", str(self.n_correct)),
            ("accuracy", f"{self.accuracy:.5f}"),
            ("recall", f"{self.recall:.5f}"),
            ("f-score", f"{self.f_score:.5f}"),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        for r in self.per_image:
            if r.misses or r.false_alarms:
                lines.append(f"  {r.image_id}: correct {r.n_correct}/{r.n_gt}, "
                             f"misses {r.misses}, false alarms {r.false_alarms}")
        return "\n".join(lines) + "\n"


def aggregate(results: Iterable[ImageResult]) -> EvalReport:
    results = list(results)
    n_gt = sum(r.n_gt for r in results)
    n_pred = sum(r.n_pred for r in results)
    n_correct = sum(r.n_correct for r in results)
    accuracy = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gt if n_gt else 0.0
    return EvalReport(n_gt, n_pred, n_correct, accuracy, recall,
                      f_score(accuracy, recall), results)


def _label_files(directory: str | os.PathLike) -> dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise NotADirectoryError(f"not a directory: {d}")
    return {p.stem: p for p in sorted(d.glob("*.txt"))}


def evaluate_dataset(pred_dir: str | os.PathLike, gt_dir: str | os.PathLike,
                     cfg: MatchConfig = MatchConfig()) -> EvalReport:
    """Score a directory of per-image prediction files against ground truth.

    Files pair up by name.  A ground-truth image without a prediction file
    scores as zero predictions; a prediction file without ground truth is an
    error.
    """
    gt_files = _label_files(gt_dir)
    pred_files = _label_files(pred_dir)
    orphans = sorted(set(pred_files) - set(gt_files))
    if orphans:
        raise EvaluationError(
            f"prediction file(s) without ground truth: {', '.join(o + '.txt' for o in orphans)}")
    results = []
    for image_id in sorted(gt_files):
        gts, _ = load_label_file(gt_files[image_id], LabelFormat.SIGN, strict=True)
        preds: list = []
        if image_id in pred_files:
            preds, _ = load_label_file(pred_files[image_id], LabelFormat.SIGN, strict=True)
        results.append(match_image(preds, gts, cfg, image_id=image_id))
    return aggregate(results)
