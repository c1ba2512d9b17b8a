"""Planar polygon primitives for quadrilateral text and signboard regions.

All coordinates live in the image frame (x to the right, y downward).  A
polygon is "clockwise" when it looks clockwise on screen, which is the same
thing as a positive shoelace sum ``sum(x_i * y_{i+1} - x_{i+1} * y_i) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

Point = Tuple[float, float]

EPS = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or otherwise invalid geometric input."""


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _as_points(points: Iterable[Sequence[float]]) -> list[Point]:
    out = []
    for p in points:
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError(f"non-finite vertex ({x}, {y})")
        out.append((x, y))
    return out


def signed_area(poly: Sequence[Sequence[float]]) -> float:
    """Shoelace area; positive iff the polygon is clockwise in the image frame."""
    if len(poly) < 3:
        raise GeometryError("signed_area needs at least 3 vertices")
    s = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i][0], poly[i][1]
        x1, y1 = poly[(i + 1) % n][0], poly[(i + 1) % n][1]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(p1, q1, q2):
        return True
    if d2 == 0 and _on_segment(p2, q1, q2):
        return True
    if d3 == 0 and _on_segment(q1, p1, p2):
        return True
    if d4 == 0 and _on_segment(q2, p1, p2):
        return True
    return False


def _simplicity_problem(v: Sequence[Point]) -> str | None:
    for i in range(4):
        if v[i] == v[(i + 1) % 4]:
            return "repeated vertex"
    # opposite edges must not meet
    if segments_intersect(v[0], v[1], v[2], v[3]) or segments_intersect(v[1], v[2], v[3], v[0]):
        return "self-intersecting quadrilateral"
    # adjacent edges folding back onto each other
    for i in range(4):
        a, b, c = v[i - 1], v[i], v[(i + 1) % 4]
        if _cross(a, b, c) == 0.0:
            dot = (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1])
            if dot < 0:
                return "self-intersecting quadrilateral"
    return None


@dataclass(frozen=True)
class Quad:
    """Four finite vertices in clockwise order forming a simple polygon.

    Construction validates; use :func:`ensure_clockwise` to accept either
    winding.
    """

    v: Tuple[Point, Point, Point, Point]

    def __post_init__(self):
        pts = _as_points(self.v)
        if len(pts) != 4:
            raise GeometryError(f"a quad needs exactly 4 vertices, got {len(pts)}")
        object.__setattr__(self, "v", tuple(pts))
        problem = _simplicity_problem(pts)
        if problem:
            raise GeometryError(problem)
        area = signed_area(pts)
        if area <= 0:
            raise GeometryError(
                "quad is not clockwise" if area < 0 else "quad has zero area")

    @classmethod
    def from_flat(cls, coords: Sequence[float]) -> "Quad":
        if len(coords) != 8:
            raise GeometryError(f"expected 8 coordinates, got {len(coords)}")
        return cls(tuple((coords[2 * i], coords[2 * i + 1]) for i in range(4)))

    def flat(self) -> tuple[float, ...]:
        return tuple(c for p in self.v for c in p)

    @property
    def area(self) -> float:
        return signed_area(self.v)

    @property
    def centroid(self) -> Point:
        """Mean of the four vertices."""
        return (sum(p[0] for p in self.v) / 4.0, sum(p[1] for p in self.v) / 4.0)

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.v]
        ys = [p[1] for p in self.v]
        return min(xs), min(ys), max(xs), max(ys)

    def is_convex(self) -> bool:
        return all(_cross(self.v[i - 1], self.v[i], self.v[(i + 1) % 4]) >= 0 for i in range(4))

    def translate(self, dx: float, dy: float) -> "Quad":
        return Quad(tuple((x + dx, y + dy) for x, y in self.v))

    def scale(self, s: float) -> "Quad":
        return Quad(tuple((x * s, y * s) for x, y in self.v))


def is_valid_quad(points: Sequence[Sequence[float]]) -> bool:
    try:
        Quad(tuple(points))
    except GeometryError:
        return False
    return True


def ensure_clockwise(points: Sequence[Sequence[float]]) -> Quad:
    """Return a Quad over ``points``, reversing the order if it winds the wrong way.

    Bow-ties and zero-area inputs are rejected rather than repaired.
    """
    pts = _as_points(points)
    if len(pts) != 4:
        raise GeometryError(f"a quad needs exactly 4 vertices, got {len(pts)}")
    problem = _simplicity_problem(pts)
    if problem:
        raise GeometryError(problem)
    if signed_area(pts) < 0:
        pts.reverse()
    return Quad(tuple(pts))


def order_from_top_left(v: Sequence[Point]) -> tuple[Point, ...]:
    """Rotate a clockwise vertex cycle so it starts at the top-left corner.

    The top-left corner is the vertex whose direction from the vertex mean is
    closest in angle to the up-left diagonal; ties go to the smallest
    ``(y, x)``.
    """
    n = len(v)
    cx = sum(p[0] for p in v) / n
    cy = sum(p[1] for p in v) / n
    best_i, best_key = 0, None
    for i, (x, y) in enumerate(v):
        dx, dy = x - cx, y - cy
        r = math.hypot(dx, dy)
        cos = (-dx - dy) / (math.sqrt(2.0) * r) if r > 0 else -1.0
        key = (-round(cos, 12), y, x)
        if best_key is None or key < best_key:
            best_i, best_key = i, key
    return tuple(v[best_i:]) + tuple(v[:best_i])


@dataclass(frozen=True)
class ConvexPolygon:
    """Clockwise convex vertex cycle; fewer than 3 vertices means degenerate."""

    vertices: Tuple[Point, ...]

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3 or self.area <= EPS

    @property
    def area(self) -> float:
        if len(self.vertices) < 3:
            return 0.0
        return signed_area(self.vertices)

    def __len__(self):
        return len(self.vertices)


def convex_hull(points: Iterable[Sequence[float]]) -> ConvexPolygon:
    """Monotone-chain hull, clockwise in the image frame, collinear points dropped.

    All-collinear input yields the two extreme points; a single distinct point
    yields itself.
    """
    pts = sorted(set(_as_points(points)))
    if not pts:
        raise GeometryError("convex_hull of an empty point set")
    if len(pts) < 3:
        return ConvexPolygon(tuple(pts))

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        # collinear: monotone chain returns the two endpoints (possibly twice)
        hull = [pts[0], pts[-1]]
    return ConvexPolygon(tuple(hull))


def _line_intersection(s: Point, e: Point, a: Point, b: Point) -> Point:
    # point on segment s-e where it crosses the infinite line a-b
    ds = _cross(a, b, s)
    de = _cross(a, b, e)
    t = ds / (ds - de)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def _clip_points(subject: Sequence[Point], clip: Sequence[Point]) -> list[Point]:
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a, b = clip[i], clip[(i + 1) % n]
        inp = output
        output = []
        s = inp[-1]
        s_in = _cross(a, b, s) >= 0
        for e in inp:
            e_in = _cross(a, b, e) >= 0
            if e_in:
                if not s_in:
                    output.append(_line_intersection(s, e, a, b))
                output.append(e)
            elif s_in:
                output.append(_line_intersection(s, e, a, b))
            s, s_in = e, e_in
    cleaned: list[Point] = []
    for p in output:
        if not cleaned or p != cleaned[-1]:
            cleaned.append(p)
    if len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    return cleaned


def clip_convex(subject: ConvexPolygon, clip: ConvexPolygon) -> ConvexPolygon:
    """Sutherland-Hodgman intersection of two clockwise convex polygons."""
    if len(subject) < 3 or len(clip) < 3:
        return ConvexPolygon(())
    pts = _clip_points(subject.vertices, clip.vertices)
    if len(pts) < 3:
        return ConvexPolygon(())
    return ConvexPolygon(tuple(pts))


def _convex_pieces(q: Quad) -> list[tuple[Point, ...]]:
    """Split a simple quad into convex pieces (itself, or two triangles)."""
    v = q.v
    for i in range(4):
        if _cross(v[i - 1], v[i], v[(i + 1) % 4]) < 0:
            # reflex vertex i: the diagonal from it lies inside the quad
            j = (i + 2) % 4
            return [(v[i], v[(i + 1) % 4], v[j]), (v[j], v[(j + 1) % 4], v[i])]
    return [v]


def intersection_area(a: Quad, b: Quad) -> float:
    total = 0.0
    for pa in _convex_pieces(a):
        for pb in _convex_pieces(b):
            pts = _clip_points(pa, pb)
            if len(pts) >= 3:
                total += signed_area(pts)
    return max(total, 0.0)


def iou(a: Quad, b: Quad) -> float:
    """Area intersection-over-union of two quads (concave quads allowed)."""
    area_a, area_b = a.area, b.area
    if area_a <= EPS or area_b <= EPS:
        raise GeometryError("iou of a zero-area quad")
    inter = intersection_area(a, b)
    union = area_a + area_b - inter
    return min(max(inter / union, 0.0), 1.0)


def point_in_polygon(p: Point, poly: Sequence[Point], eps: float = EPS) -> bool:
    """Even-odd containment for a simple polygon; boundary (within eps) counts."""
    x, y = p
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        if length == 0:
            continue
        if abs(_cross(a, b, p)) / length <= eps:
            t = ((x - a[0]) * (b[0] - a[0]) + (y - a[1]) * (b[1] - a[1])) / (length * length)
            if -eps <= t * length <= length + eps:
                return True
    inside = False
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xi > x:
                inside = not inside
    return inside


def _rect_quad(corners: list[Point]) -> Quad:
    return Quad(order_from_top_left(corners))


def min_area_rect(points: Iterable[Sequence[float]]) -> Quad:
    """Minimum-area enclosing rectangle by rotating calipers over the hull."""
    hull = convex_hull(points)
    if hull.degenerate:
        raise GeometryError("min_area_rect needs at least 3 non-collinear points")
    h = hull.vertices
    m = len(h)

    def dot(p: Point, d: Point) -> float:
        return p[0] * d[0] + p[1] * d[1]

    best = None
    j = k = l = None
    for i in range(m):
        p0, p1 = h[i], h[(i + 1) % m]
        length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
        u = ((p1[0] - p0[0]) / length, (p1[1] - p0[1]) / length)
        n = (-u[1], u[0])  # inward normal for a positive cycle
        if j is None:
            k = max(range(m), key=lambda t: dot(h[t], u))
            j = max(range(m), key=lambda t: dot(h[t], n))
            l = min(range(m), key=lambda t: dot(h[t], u))
        else:
            for _ in range(m):
                if dot(h[(k + 1) % m], u) >= dot(h[k], u):
                    k = (k + 1) % m
                else:
                    break
            for _ in range(m):
                if dot(h[(j + 1) % m], n) >= dot(h[j], n):
                    j = (j + 1) % m
                else:
                    break
            for _ in range(m):
                if dot(h[(l + 1) % m], u) <= dot(h[l], u):
                    l = (l + 1) % m
                else:
                    break
        base = dot(p0, u)
        umin = dot(h[l], u) - base
        umax = dot(h[k], u) - base
        height = dot(h[j], n) - dot(p0, n)
        area = (umax - umin) * height
        if best is None or area < best[0]:
            best = (area, p0, u, n, umin, umax, height)

    _, p0, u, n, umin, umax, height = best

    def at(a: float, b: float) -> Point:
        return (p0[0] + a * u[0] + b * n[0], p0[1] + a * u[1] + b * n[1])

    return _rect_quad([at(umin, 0.0), at(umax, 0.0), at(umax, height), at(umin, height)])


def _edge_normal_angles(v: Sequence[Point]) -> np.ndarray:
    """Unwrapped, strictly increasing outward-normal angles of a positive cycle."""
    angles = []
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        angles.append(math.atan2(-(b[0] - a[0]), b[1] - a[1]))
    out = [angles[0]]
    for a in angles[1:]:
        out.append(out[-1] + (a - out[-1]) % (2 * math.pi))
    return np.array(out)


class _SupportQuad:
    """Quadrilateral spanned by four tight supporting lines of a hull."""

    def __init__(self, hull: np.ndarray):
        self.hull = hull  # (m, 2)

    def offsets(self, phi: np.ndarray) -> np.ndarray:
        normals = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return (normals @ self.hull.T).max(axis=-1)

    @staticmethod
    def meet(p1, d1, p2, d2):
        # intersection of lines cos(p)x + sin(p)y = d for broadcast arrays
        c1, s1, c2, s2 = np.cos(p1), np.sin(p1), np.cos(p2), np.sin(p2)
        det = c1 * s2 - s1 * c2
        return np.stack([(d1 * s2 - s1 * d2) / det, (c1 * d2 - d1 * c2) / det], axis=-1)

    def vertices(self, phi: np.ndarray) -> np.ndarray:
        d = self.offsets(phi)
        return np.stack([self.meet(phi[i], d[i], phi[(i + 1) % 4], d[(i + 1) % 4])
                         for i in range(4)])

    @staticmethod
    def area(verts: np.ndarray) -> np.ndarray:
        x, y = verts[..., 0], verts[..., 1]
        return 0.5 * (x * np.roll(y, -1, axis=0) - np.roll(x, -1, axis=0) * y).sum(axis=0)

    def area_varying(self, phi: np.ndarray, i: int, cand: np.ndarray) -> np.ndarray:
        """Areas when the angle of line ``i`` is replaced by each candidate."""
        phis = np.repeat(phi[:, None], cand.size, axis=1)
        phis[i] = cand
        d = np.stack([self.offsets(phis[r]) for r in range(4)])
        verts = np.stack([self.meet(phis[r], d[r], phis[(r + 1) % 4], d[(r + 1) % 4])
                          for r in range(4)])
        return self.area(verts)


def min_enclosing_quad(points: Iterable[Sequence[float]], max_iters: int = 100,
                       tol: float = 1e-6) -> Quad:
    """Small enclosing quadrilateral of a point set.

    Starts from :func:`min_area_rect` and runs coordinate descent over the
    angles of the four edge lines.  Each line is always pushed back until it
    touches the hull, so containment is preserved by construction; a step is
    accepted only if it strictly lowers the area.  The result is never larger
    than the rectangle.  A hull that is itself a quadrilateral is returned as is
    (it is the optimum).
    """
    pts = _as_points(points)
    hull = convex_hull(pts)
    if hull.degenerate:
        raise GeometryError("min_enclosing_quad needs at least 3 non-collinear points")
    if len(hull) == 4:
        return Quad(order_from_top_left(hull.vertices))
    rect = min_area_rect(pts)

    H = np.array(hull.vertices)
    sq = _SupportQuad(H)
    phi = _edge_normal_angles(rect.v)
    best_area = rect.area
    best_phi = None
    edge_angles = _edge_normal_angles(hull.vertices)
    edge_angles = np.concatenate([edge_angles + 2 * math.pi * k for k in (-2, -1, 0, 1, 2)])
    margin = 1e-7

    for _ in range(max_iters):
        start_area = best_area
        for i in range(4):
            lo = (phi[i - 1] - (2 * math.pi if i == 0 else 0.0)) + margin
            hi = (phi[(i + 1) % 4] + (2 * math.pi if i == 3 else 0.0)) - margin
            lo = max(lo, (phi[(i + 1) % 4] + (2 * math.pi if i == 3 else 0.0)) - math.pi + margin)
            hi = min(hi, (phi[i - 1] - (2 * math.pi if i == 0 else 0.0)) + math.pi - margin)
            if hi <= lo:
                continue
            flush = edge_angles[(edge_angles > lo) & (edge_angles < hi)]
            cand = np.concatenate([np.linspace(lo, hi, 65), flush])
            a = lo
            b = hi
            for _zoom in range(8):
                areas = sq.area_varying(phi, i, cand)
                areas[~np.isfinite(areas)] = np.inf
                t = int(np.argmin(areas))
                if areas[t] < best_area * (1 - 1e-13):
                    best_area = float(areas[t])
                    phi = phi.copy()
                    phi[i] = cand[t]
                    best_phi = phi
                step = (b - a) / 64
                a = max(lo, phi[i] - step)
                b = min(hi, phi[i] + step)
                if b - a < 1e-13:
                    break
                cand = np.linspace(a, b, 33)
        if start_area - best_area <= tol * start_area:
            break

    if best_phi is None:
        return rect
    verts = sq.vertices(best_phi)
    try:
        return Quad(order_from_top_left([tuple(map(float, p)) for p in verts]))
    except GeometryError:
        return rect
