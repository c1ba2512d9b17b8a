"""Competition label files.

Three line formats share one layout: eight comma-separated integer
coordinates ``x1,y1,...,x4,y4`` (clockwise), then a payload running to the
end of the line.

* sign   -- payload is the store name
* detect -- payload is ``0`` (non-store board) or ``1`` (store board)
* ocr    -- payload is the text content of a text line

Prediction files use the sign format, one file per image.
"""
from __future__ import annotations

import enum
import os
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from ._io import write_text_atomic
from .geometry import GeometryError, Quad, ensure_clockwise


class LabelError(ValueError):
    """A malformed label line or file.  ``line`` is 1-based when known."""

    def __init__(self, reason: str, line: int | None = None, path: str | None = None):
        self.reason = reason
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + reason)


class LabelFormat(str, enum.Enum):
    SIGN = "sign"
    DETECT = "detect"
    OCR = "ocr"


class BoardKind(enum.IntEnum):
    NON_STORE = 0
    STORE = 1


@dataclass(frozen=True)
class SignRecord:
    quad: Quad
    store_name: str


@dataclass(frozen=True)
class DetectRecord:
    quad: Quad
    kind: BoardKind


@dataclass(frozen=True)
class OcrRecord:
    quad: Quad
    text: str


Record = Union[SignRecord, DetectRecord, OcrRecord]

_INT = re.compile(r"[+-]?\d+\Z")


def _strip_eol(line: str) -> str:
    if line.endswith("\n"):
        line = line[:-1]
    if line.endswith("\r"):
        line = line[:-1]
    return line


def _split(line: str) -> tuple[Quad, str]:
    line = _strip_eol(line)
    parts = line.split(",", 8)
    if len(parts) < 9:
        n = len(parts) if line else 0
        raise LabelError(f"expected 8 coordinates and a payload, found {n} field(s)")
    coords = []
    for i, tok in enumerate(parts[:8]):
        tok = tok.strip()
        if not _INT.match(tok):
            raise LabelError(f"coordinate {i + 1} is not an integer: {tok!r}")
        coords.append(int(tok))
    try:
        quad = ensure_clockwise([(coords[2 * i], coords[2 * i + 1]) for i in range(4)])
    except GeometryError as exc:
        raise LabelError(f"invalid quadrilateral: {exc}") from None
    return quad, parts[8].rstrip()


def parse_sign_line(line: str) -> SignRecord:
    quad, name = _split(line)
    if not name:
        raise LabelError("empty store name")
    return SignRecord(quad, name)


def parse_detect_line(line: str) -> DetectRecord:
    quad, flag = _split(line)
    if flag not in ("0", "1"):
        raise LabelError(f"board flag must be 0 or 1, got {flag!r}")
    return DetectRecord(quad, BoardKind(int(flag)))


def parse_ocr_line(line: str) -> OcrRecord:
    quad, text = _split(line)
    if not text:
        raise LabelError("empty text")
    return OcrRecord(quad, text)


PARSERS = {
    LabelFormat.SIGN: parse_sign_line,
    LabelFormat.DETECT: parse_detect_line,
    LabelFormat.OCR: parse_ocr_line,
}


def _coords(quad: Quad) -> str:
    out = []
    for c in quad.flat():
        if c != int(c):
            raise LabelError(f"coordinate {c} is not an integer")
        out.append(str(int(c)))
    return ",".join(out)


def _payload(text: str, what: str) -> str:
    if not text:
        raise LabelError(f"empty {what}")
    if text != text.rstrip():
        raise LabelError(f"{what} has trailing whitespace and would not round-trip")
    if "\n" in text or "\r" in text:
        raise LabelError(f"{what} contains a line break")
    return text


def _checked_quad(quad) -> Quad:
    if isinstance(quad, Quad):
        return quad
    try:
        return Quad(tuple(quad))
    except (GeometryError, TypeError) as exc:
        raise LabelError(f"refusing to serialize quad: {exc}") from None


def serialize_sign(rec: SignRecord) -> str:
    return f"{_coords(_checked_quad(rec.quad))},{_payload(rec.store_name, 'store name')}"


def serialize_detect(rec: DetectRecord) -> str:
    return f"{_coords(_checked_quad(rec.quad))},{int(BoardKind(rec.kind))}"


def serialize_ocr(rec: OcrRecord) -> str:
    return f"{_coords(_checked_quad(rec.quad))},{_payload(rec.text, 'text')}"


def serialize(rec: Record) -> str:
    if isinstance(rec, SignRecord):
        return serialize_sign(rec)
    if isinstance(rec, DetectRecord):
        return serialize_detect(rec)
    if isinstance(rec, OcrRecord):
        return serialize_ocr(rec)
    raise TypeError(f"not a label record: {rec!r}")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    reason: str

    def format(self, path: str | os.PathLike | None = None) -> str:
        return f"{path}:{self.line}: {self.reason}" if path is not None else f"{self.line}: {self.reason}"


def parse_lines(lines: Iterable[str], fmt: LabelFormat | str) -> tuple[list[Record], list[Diagnostic]]:
    parse = PARSERS[LabelFormat(fmt)]
    records: list[Record] = []
    diags: list[Diagnostic] = []
    for lineno, line in enumerate(lines, 1):
        if not _strip_eol(line).strip():
            continue
        try:
            records.append(parse(line))
        except LabelError as exc:
            diags.append(Diagnostic(lineno, exc.reason))
    return records, diags


def load_label_file(path: str | os.PathLike, fmt: LabelFormat | str,
                    strict: bool = False) -> tuple[list[Record], list[Diagnostic]]:
    """Parse a label file into records plus per-line diagnostics.

    Blank lines are skipped.  In strict mode the first diagnostic is raised
    as a :class:`LabelError` instead.  I/O problems propagate as ``OSError``;
    undecodable bytes raise ``LabelError``.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise LabelError(f"invalid UTF-8 at byte {exc.start}", path=str(path)) from None
    # split on LF only: str.splitlines would also break on U+2028 and friends
    records, diags = parse_lines(text.split("\n"), fmt)
    if strict and diags:
        d = diags[0]
        raise LabelError(d.reason, line=d.line, path=str(path))
    return records, diags


def dumps(records: Iterable[Record]) -> str:
    return "".join(serialize(r) + "\n" for r in records)


def write_label_file(path: str | os.PathLike, records: Iterable[Record]) -> None:
    write_text_atomic(path, dumps(records))


# --- store-name rule ----------------------------------------------------

def is_cjk_ideograph(ch: str) -> bool:
    cp = ord(ch)
    return 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF


def _is_english(ch: str) -> bool:
    return ch.isascii() and ch.isalpha()


DEFAULT_EXTRA_ALLOWED = frozenset("〇0123456789０１２３４５６７８９")


@dataclass(frozen=True)
class NameRules:
    """Store-name policy: enough CJK ideographs, no Latin letters, no symbols.

    ``extra_allowed`` whitelists non-ideograph characters (digits and the
    ideographic zero by default).
    """

    min_ideographs: int = 2
    extra_allowed: frozenset = field(default=DEFAULT_EXTRA_ALLOWED)


@dataclass(frozen=True)
class NameVerdict:
    valid: bool
    reason: str = ""
    offending: str | None = None

    def __bool__(self):
        return self.valid


def validate_store_name(name: str, rules: NameRules = NameRules()) -> NameVerdict:
    count = 0
    for ch in name:
        if is_cjk_ideograph(ch):
            count += 1
        elif _is_english(ch):
            return NameVerdict(False, f"English letter {ch!r} (U+{ord(ch):04X})", ch)
        elif ch not in rules.extra_allowed:
            label = unicodedata.name(ch, "unnamed")
            return NameVerdict(False, f"disallowed symbol {ch!r} (U+{ord(ch):04X} {label})", ch)
    if count < rules.min_ideographs:
        return NameVerdict(False, f"only {count} Chinese character(s), need {rules.min_ideographs}")
    return NameVerdict(True)
