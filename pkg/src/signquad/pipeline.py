"""Desk-scale composition of the four recognition stages.

Board quads (detect format, store boards only) and recognized text lines
(ocr format) stand in for the neural stages.  Each store board collects the
text lines whose centroid it contains, the lines are put in reading order and
concatenated, and the board is emitted as a sign-format prediction.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .geometry import GeometryError, Quad, min_enclosing_quad
from .labels import (BoardKind, DetectRecord, LabelFormat, NameRules, OcrRecord,
                     SignRecord, load_label_file, validate_store_name, write_label_file)
from .readorder import (ReadOrderError, TextBlock, assign_blocks_to_signboard,
                        merge_store_name, order_blocks)
from .rectify import DirectionRule, classify_direction

log = logging.getLogger(__name__)


@dataclass
class PipelineInput:
    boards: list[Quad] = field(default_factory=list)
    ocr: list[OcrRecord] = field(default_factory=list)


@dataclass(frozen=True)
class ComposeOptions:
    refit_quads: bool = False
    enforce_name_rules: bool = False
    name_rules: NameRules = NameRules()
    direction_rule: DirectionRule = DirectionRule()
    line_overlap: float = 0.5


def _quad_key(q: Quad):
    return q.flat()


def _refit(q: Quad) -> Quad:
    fitted = min_enclosing_quad(q.v)
    # labels carry integer coordinates
    rounded = [(round(x), round(y)) for x, y in fitted.v]
    try:
        return Quad(tuple(rounded))
    except GeometryError:
        return q


def compose_image(inp: PipelineInput, options: ComposeOptions = ComposeOptions(),
                  image_id: str = "") -> tuple[list[SignRecord], list[str]]:
    """Predictions for one image plus human-readable diagnostics."""
    diags: list[str] = []
    blocks = [TextBlock(r.quad, r.text, classify_direction(r.quad, options.direction_rule))
              for r in sorted(inp.ocr, key=lambda r: (_quad_key(r.quad), r.text))]
    out: list[SignRecord] = []
    for board in sorted(inp.boards, key=_quad_key):
        if options.refit_quads:
            board = _refit(board)
        mine = assign_blocks_to_signboard(blocks, board)
        if not mine:
            continue
        try:
            name = merge_store_name(order_blocks(mine, options.line_overlap))
        except ReadOrderError:
            diags.append(f"{image_id}: board {list(board.flat())} dropped: "
                         "mixed horizontal and vertical text")
            continue
        if not name:
            continue
        if options.enforce_name_rules:
            verdict = validate_store_name(name, options.name_rules)
            if not verdict:
                diags.append(f"{image_id}: board {list(board.flat())} dropped: "
                             f"name {name!r}: {verdict.reason}")
                continue
        out.append(SignRecord(board, name))
    return out, diags


def compose(inputs: Mapping[str, PipelineInput], options: ComposeOptions = ComposeOptions()
            ) -> tuple[dict[str, list[SignRecord]], list[str]]:
    results: dict[str, list[SignRecord]] = {}
    diags: list[str] = []
    for image_id in sorted(inputs):
        recs, d = compose_image(inputs[image_id], options, image_id)
        diags.extend(d)
        if recs:
            results[image_id] = recs
    return results, diags


def _txt_files(directory: str | os.PathLike) -> dict[str, Path]:
    d = Path(directory)
    if not d.is_dir():
        raise NotADirectoryError(f"not a directory: {d}")
    return {p.stem: p for p in sorted(d.glob("*.txt"))}


def load_inputs(detect_dir: str | os.PathLike, ocr_dir: str | os.PathLike,
                strict: bool = False) -> tuple[dict[str, PipelineInput], list[str]]:
    """Read per-image detect and ocr files; images are keyed by file stem."""
    diags: list[str] = []
    inputs: dict[str, PipelineInput] = {}
    det_files = _txt_files(detect_dir)
    ocr_files = _txt_files(ocr_dir)
    for image_id, path in det_files.items():
        recs, d = load_label_file(path, LabelFormat.DETECT, strict=strict)
        diags.extend(x.format(path) for x in d)
        boards = [r.quad for r in recs if isinstance(r, DetectRecord) and r.kind is BoardKind.STORE]
        inputs[image_id] = PipelineInput(boards=boards)
    for image_id, path in ocr_files.items():
        if image_id not in inputs:
            log.debug("ocr file %s has no detect counterpart; ignored", path)
            continue
        recs, d = load_label_file(path, LabelFormat.OCR, strict=strict)
        diags.extend(x.format(path) for x in d)
        inputs[image_id].ocr = list(recs)
    return inputs, diags


def write_predictions(out_dir: str | os.PathLike,
                      predictions: Mapping[str, Sequence[SignRecord]]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for image_id in sorted(predictions):
        path = out / f"{image_id}.txt"
        write_label_file(path, predictions[image_id])
        written.append(path)
    return written
