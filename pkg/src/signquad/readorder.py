"""Reading order for the text blocks of one signboard.

Horizontal blocks are grouped into lines by vertical overlap, lines read top
to bottom, blocks left to right.  Vertical blocks are grouped into columns by
horizontal overlap, columns read right to left, blocks top to bottom.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import Quad, point_in_polygon
from .rectify import TextDirection


class ReadOrderError(ValueError):
    pass


@dataclass(frozen=True)
class TextBlock:
    quad: Quad
    text: str
    direction: TextDirection = TextDirection.HORIZONTAL

    def __post_init__(self):
        if not self.text:
            raise ReadOrderError("text block with empty text")


def _groups(spans: list[tuple[float, float]], min_overlap: float) -> list[list[int]]:
    # union-find over the "same line" relation
    parent = list(range(len(spans)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            (a0, a1), (b0, b1) = spans[i], spans[j]
            overlap = min(a1, b1) - max(a0, b0)
            if overlap >= min_overlap * min(a1 - a0, b1 - b0):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(spans)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def order_blocks(blocks: Sequence[TextBlock], min_overlap: float = 0.5) -> list[TextBlock]:
    """Return ``blocks`` in reading order.

    Two blocks share a line (column) when their bounding-box extents across
    the reading direction overlap by at least ``min_overlap`` of the smaller
    extent; the relation is closed transitively.  Exact ties keep input order.
    """
    blocks = list(blocks)
    if not blocks:
        return []
    directions = {b.direction for b in blocks}
    if len(directions) > 1:
        raise ReadOrderError("blocks mix horizontal and vertical text")
    vertical = directions.pop() is TextDirection.VERTICAL

    boxes = [b.quad.bounds() for b in blocks]
    cx = [(x0 + x1) / 2 for x0, _, x1, _ in boxes]
    cy = [(y0 + y1) / 2 for _, y0, _, y1 in boxes]
    if vertical:
        spans = [(x0, x1) for x0, _, x1, _ in boxes]
        across, along, sign = cx, cy, -1.0  # columns run right to left
    else:
        spans = [(y0, y1) for _, y0, _, y1 in boxes]
        across, along, sign = cy, cx, 1.0

    groups = _groups(spans, min_overlap)
    keyed = []
    for members in groups:
        center = sum(across[i] for i in members) / len(members)
        keyed.append((sign * center, members[0], sorted(members, key=lambda i: (along[i], i))))
    keyed.sort(key=lambda t: (t[0], t[1]))
    return [blocks[i] for _, _, members in keyed for i in members]


def merge_store_name(ordered: Sequence[TextBlock]) -> str:
    return "".join(b.text for b in ordered)


def assign_blocks_to_signboard(blocks: Sequence[TextBlock], board: Quad) -> list[TextBlock]:
    """Blocks whose vertex-mean centroid falls inside ``board`` (edges included)."""
    return [b for b in blocks if point_in_polygon(b.quad.centroid, board.v)]
