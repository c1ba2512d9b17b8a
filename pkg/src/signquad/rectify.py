"""Perspective rectification of quadrilateral regions.

Covers 4-point homography estimation, bilinear warping of rasters, binary
PGM/PPM I/O and the aspect-ratio rule that routes a text box to the
horizontal or vertical recognizer.
"""
from __future__ import annotations

import enum
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import write_atomic
from .geometry import GeometryError, Point, Quad, order_from_top_left


class RectifyError(ValueError):
    pass


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    scale = np.abs(a).max()
    if scale == 0:
        raise RectifyError("singular system")
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) <= 1e-12 * scale:
            raise RectifyError("singular system (degenerate correspondence)")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        f = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= np.outer(f, a[col, col:])
        b[col + 1:] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def _singular(m: np.ndarray) -> bool:
    """Rank test that ignores coordinate units.

    Entries mix pixels, plain ratios and inverse pixels, so the raw
    determinant says little.  Rows and columns are first rescaled until
    every one peaks at magnitude 1 (rank is unchanged), then |det| is
    compared with 1e-12.
    """
    a = np.abs(m)
    r, c = np.ones(3), np.ones(3)
    for _ in range(20):
        rows = (a * r[:, None] * c).max(axis=1)
        if not rows.all():
            return True
        r /= rows
        cols = (a * r[:, None] * c).max(axis=0)
        if not cols.all():
            return True
        c /= cols
    return abs(np.linalg.det(m * r[:, None] * c)) <= 1e-12


@dataclass(frozen=True, eq=False)
class Homography:
    """Projective map of the plane, stored with ``h[2, 2] == 1``."""

    h: np.ndarray

    def __post_init__(self):
        m = np.array(self.h, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise RectifyError("non-finite homography")
        if abs(m[2, 2]) < 1e-12:
            raise RectifyError("homography cannot be normalized (h22 = 0)")
        m = m / m[2, 2]
        if _singular(m):
            raise RectifyError("singular homography")
        m.setflags(write=False)
        object.__setattr__(self, "h", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        return cls(np.array([[1.0, 0, dx], [0, 1.0, dy], [0, 0, 1.0]]))

    def __matmul__(self, other: "Homography") -> "Homography":
        """``self @ other`` applies ``other`` first."""
        return Homography(self.h @ other.h)


def _normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def homography_from_quads(src: Quad, dst: Quad) -> Homography:
    """Exact homography taking each vertex of ``src`` to the same-index vertex of ``dst``."""
    sp = np.array(src.v)
    dp = np.array(dst.v)
    ts, td = _normalizer(sp), _normalizer(dp)
    sn = (np.c_[sp, np.ones(4)] @ ts.T)[:, :2]
    dn = (np.c_[dp, np.ones(4)] @ td.T)[:, :2]
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(sn, dn)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i], b[2 * i + 1] = u, v
    hn = np.append(_solve(a, b), 1.0).reshape(3, 3)
    return Homography(np.linalg.inv(td) @ hn @ ts)


def apply(h: Homography, p: Sequence[float]) -> Point:
    m = h.h
    x, y = float(p[0]), float(p[1])
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= 1e-12:
        raise RectifyError(f"point ({x}, {y}) maps to the line at infinity")
    return ((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
            (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w)


def invert(h: Homography) -> Homography:
    m = h.h
    det = np.linalg.det(m)
    if _singular(m):
        raise RectifyError("singular homography")
    adj = np.array([
        [m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1], m[0, 2] * m[2, 1] - m[0, 1] * m[2, 2],
         m[0, 1] * m[1, 2] - m[0, 2] * m[1, 1]],
        [m[1, 2] * m[2, 0] - m[1, 0] * m[2, 2], m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0],
         m[0, 2] * m[1, 0] - m[0, 0] * m[1, 2]],
        [m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0], m[0, 1] * m[2, 0] - m[0, 0] * m[2, 1],
         m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]],
    ])
    return Homography(adj / det)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _edge_means(q: Quad) -> tuple[float, float]:
    tl, tr, br, bl = order_from_top_left(q.v)
    width = (math.dist(tl, tr) + math.dist(bl, br)) / 2.0
    height = (math.dist(tl, bl) + math.dist(tr, br)) / 2.0
    return width, height


def rectify_quad(src: Quad) -> tuple[Homography, int, int]:
    """Homography sending ``src`` onto the upright rectangle ``(0, 0)-(w, h)``.

    The output size is the rounded mean of opposite edge lengths.  The source
    corner pointing most toward the top-left goes to the origin.
    """
    tl, tr, br, bl = order_from_top_left(src.v)
    width, height = _edge_means(src)
    w = max(1, _round_half_up(width))
    h = max(1, _round_half_up(height))
    try:
        dst = Quad(((0.0, 0.0), (float(w), 0.0), (float(w), float(h)), (0.0, float(h))))
        return homography_from_quads(Quad((tl, tr, br, bl)), dst), w, h
    except GeometryError as exc:
        raise RectifyError(f"degenerate quad: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Raster:
    """Image with intensities in [0, 1]; ``data`` has shape (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=float)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise RectifyError(f"raster must be HxW, HxWx1 or HxWx3, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def to_bytes(self) -> np.ndarray:
        return np.clip(np.floor(self.data * 255.0 + 0.5), 0, 255).astype(np.uint8)

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> "Raster":
        return Raster(self.data[y0:y1, x0:x1])


def _sample_bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # continuous coords: pixel (r, c) covers [c, c+1) x [r, r+1); zero outside
    hgt, wid, ch = img.shape
    fx = xs - 0.5
    fy = ys - 0.5
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    ax = (fx - x0)[..., None]
    ay = (fy - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    padded = np.zeros((hgt + 2, wid + 2, ch))
    padded[1:-1, 1:-1] = img

    def tap(yy, xx):
        yy = np.clip(yy + 1, 0, hgt + 1)
        xx = np.clip(xx + 1, 0, wid + 1)
        return padded[yy, xx]

    out = ((1 - ay) * ((1 - ax) * tap(y0, x0) + ax * tap(y0, x0 + 1))
           + ay * ((1 - ax) * tap(y0 + 1, x0) + ax * tap(y0 + 1, x0 + 1)))
    return out


def warp_patch(image: Raster, h: Homography, w: int, h_out: int) -> Raster:
    """Warp ``image`` by ``h`` (source to destination) into a ``w`` x ``h_out`` patch.

    Every destination pixel center is pulled back through ``h`` and sampled
    bilinearly; taps outside the source read as 0.
    """
    if w < 1 or h_out < 1:
        raise RectifyError("output size must be at least 1x1")
    m = invert(h).h
    cols, rows = np.meshgrid(np.arange(w) + 0.5, np.arange(h_out) + 0.5)
    den = m[2, 0] * cols + m[2, 1] * rows + m[2, 2]
    bad = np.abs(den) <= 1e-12
    den = np.where(bad, 1.0, den)
    xs = (m[0, 0] * cols + m[0, 1] * rows + m[0, 2]) / den
    ys = (m[1, 0] * cols + m[1, 1] * rows + m[1, 2]) / den
    # far-away samples are all zero taps; clamp so int conversion stays sane
    far = bad | ~np.isfinite(xs) | ~np.isfinite(ys)
    xs = np.clip(np.where(far, -10.0, xs), -10.0, image.width + 10.0)
    ys = np.clip(np.where(far, -10.0, ys), -10.0, image.height + 10.0)
    return Raster(_sample_bilinear(image.data, xs, ys))


def rectify_region(image: Raster, quad: Quad) -> Raster:
    h, w, hh = rectify_quad(quad)
    return warp_patch(image, h, w, hh)


class TextDirection(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class DirectionRule:
    horizontal_threshold: float = 1.0

    def __post_init__(self):
        if not self.horizontal_threshold > 0:
            raise ValueError("horizontal_threshold must be positive")


def classify_direction(q: Quad, rule: DirectionRule = DirectionRule()) -> TextDirection:
    """Horizontal iff width / height >= threshold (ties are horizontal).

    Uses the unrounded edge-length means behind :func:`rectify_quad`, so the
    answer does not change when the quad is uniformly scaled.
    """
    width, height = _edge_means(q)
    if width >= rule.horizontal_threshold * height:
        return TextDirection.HORIZONTAL
    return TextDirection.VERTICAL


_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*([^\s#]+)")


def read_pnm(path: str | os.PathLike) -> Raster:
    """Read a binary PGM (P5) or PPM (P6) with maxval 255."""
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PNM_TOKEN.match(raw, pos)
        if not m:
            raise RectifyError(f"{path}: truncated PNM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = tokens
    if magic not in (b"P5", b"P6"):
        raise RectifyError(f"{path}: unsupported PNM type {magic!r}")
    if int(maxval) != 255:
        raise RectifyError(f"{path}: only maxval 255 is supported")
    w, h = int(w), int(h)
    ch = 1 if magic == b"P5" else 3
    body = raw[pos + 1:pos + 1 + w * h * ch]
    if len(body) != w * h * ch:
        raise RectifyError(f"{path}: truncated pixel data")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(h, w, ch)
    return Raster(arr / 255.0)


def encode_pnm(image: Raster) -> bytes:
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    return header + image.to_bytes().tobytes()


def write_pnm(path: str | os.PathLike, image: Raster) -> None:
    write_atomic(path, encode_pnm(image))
