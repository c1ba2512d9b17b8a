import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signquad.geometry import (ConvexPolygon, GeometryError, Quad, clip_convex, convex_hull,
                               ensure_clockwise, intersection_area, iou, min_area_rect,
                               min_enclosing_quad, point_in_polygon, signed_area)

from oracles import raster_iou

UNIT = ((0, 0), (1, 0), (1, 1), (0, 1))


def ellipse_quad(rng, center=(0.5, 0.5), radii=(0.15, 0.35)):
    """Random convex clockwise quad (four points on an ellipse, sorted by angle)."""
    while True:
        angles = np.sort(rng.uniform(0, 2 * math.pi, 4))
        gaps = np.diff(np.r_[angles, angles[0] + 2 * math.pi])
        if gaps.min() > 0.3:
            break
    rx, ry = rng.uniform(*radii, size=2)
    return Quad(tuple((center[0] + rx * math.cos(a), center[1] + ry * math.sin(a)) for a in angles))


def contains_all(poly, pts, eps=1e-9):
    return all(point_in_polygon(tuple(p), poly, eps) for p in pts)


# --- orientation --------------------------------------------------------

def test_signed_area_examples():
    assert signed_area(UNIT) == 1.0
    assert signed_area(UNIT[::-1]) == -1.0
    assert signed_area(((0, 0), (1, 0), (2, 0))) == 0.0
    with pytest.raises(GeometryError):
        signed_area(((0, 0), (1, 0)))


coords = st.floats(-1e4, 1e4, allow_nan=False)


@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=12))
def test_signed_area_antisymmetric(pts):
    assert signed_area(pts[::-1]) == pytest.approx(-signed_area(pts), abs=1e-6)


def test_ensure_clockwise():
    q = ensure_clockwise(UNIT)
    assert q.v == UNIT
    assert ensure_clockwise(q.v) == q
    r = ensure_clockwise(UNIT[::-1])
    assert signed_area(r.v) > 0
    assert set(r.v) == set(UNIT)
    with pytest.raises(GeometryError):
        ensure_clockwise(((0, 0), (1, 1), (1, 0), (0, 1)))


def test_quad_rejects_bad_input():
    with pytest.raises(GeometryError):
        Quad(UNIT[::-1])
    with pytest.raises(GeometryError):
        Quad(((0, 0), (1, 0), (2, 0), (3, 0)))
    with pytest.raises(GeometryError):
        Quad(((0, 0), (1, 0), (1, float("nan")), (0, 1)))


# --- hull and clipping --------------------------------------------------

def test_convex_hull_examples():
    hull = convex_hull([*UNIT, (0.5, 0.5)])
    assert sorted(hull.vertices) == sorted(UNIT)
    assert signed_area(hull.vertices) > 0
    line = convex_hull([(0, 0), (1, 0), (2, 0), (0.5, 0)])
    assert line.degenerate and sorted(line.vertices) == [(0, 0), (2, 0)]
    with pytest.raises(GeometryError):
        convex_hull([])


def test_convex_hull_contains_random_points():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(100, 2)).tolist()
    hull = convex_hull(pts)
    assert contains_all(hull.vertices, pts)
    # brute force: every hull edge has all points on its inner side
    v = hull.vertices
    for k in range(len(v)):
        (ax, ay), (bx, by) = v[k], v[(k + 1) % len(v)]
        assert all((bx - ax) * (y - ay) - (by - ay) * (x - ax) >= -1e-9 for x, y in pts)


def test_clip_examples():
    p = ConvexPolygon(UNIT)
    assert clip_convex(p, p).area == pytest.approx(1.0, abs=1e-9)
    far = ConvexPolygon(((5, 5), (6, 5), (6, 6), (5, 6)))
    assert clip_convex(p, far).area == 0.0
    shifted = ConvexPolygon(((0.5, 0), (1.5, 0), (1.5, 1), (0.5, 1)))
    assert clip_convex(p, shifted).area == pytest.approx(0.5, abs=1e-12)


def test_clip_symmetric_and_bounded():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a = ConvexPolygon(ellipse_quad(rng).v)
        b = ConvexPolygon(ellipse_quad(rng, center=rng.uniform(0.3, 0.7, 2)).v)
        ab, ba = clip_convex(a, b).area, clip_convex(b, a).area
        assert ab == pytest.approx(ba, abs=1e-9)
        assert ab <= min(a.area, b.area) + 1e-12


# --- IoU ----------------------------------------------------------------

def test_iou_examples():
    q = Quad(UNIT)
    assert iou(q, q) == 1.0
    assert iou(q, q.translate(5, 5)) == 0.0
    half = q.translate(0.5, 0)
    assert iou(q, half) == pytest.approx(1 / 3, abs=1e-12)
    scaled = [[(x / 4 + 0.25, y / 4 + 0.25) for x, y in v] for v in (q.v, half.v)]
    assert raster_iou(*scaled) == pytest.approx(1 / 3, abs=1e-3)


def test_iou_concave_matches_raster():
    # arrowhead: the reflex vertex must be split off before clipping
    a = Quad(((0.1, 0.1), (0.9, 0.5), (0.1, 0.9), (0.4, 0.5)))
    b = Quad(((0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)))
    assert not a.is_convex()
    from oracles import raster_mask
    n = 1000
    c = (np.arange(n) + 0.5) / n
    xs, ys = np.meshgrid(c, c)
    # concave piece as union of two convex triangles
    t1 = raster_mask(((0.1, 0.1), (0.9, 0.5), (0.4, 0.5)), n)
    t2 = raster_mask(((0.4, 0.5), (0.9, 0.5), (0.1, 0.9)), n)
    ma, mb = t1 | t2, raster_mask(b.v, n)
    expect = np.count_nonzero(ma & mb) / np.count_nonzero(ma | mb)
    assert iou(a, b) == pytest.approx(expect, abs=1e-3)


quads = st.builds(lambda seed: ellipse_quad(np.random.default_rng(seed)), st.integers(0, 2**32 - 1))


@given(quads, quads)
def test_iou_properties(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(iou(b, a), abs=1e-12)
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)
    assert intersection_area(a, b) <= min(a.area, b.area) + 1e-12


# --- enclosing shapes ---------------------------------------------------

def brute_force_rect_area(points):
    """Smallest rectangle flush with some hull edge, by exhaustive projection."""
    hull = convex_hull(points).vertices
    pts = np.asarray(points, dtype=float)
    best = math.inf
    for k in range(len(hull)):
        d = np.subtract(hull[(k + 1) % len(hull)], hull[k])
        d /= np.linalg.norm(d)
        n = np.array([-d[1], d[0]])
        u, w = pts @ d, pts @ n
        best = min(best, (u.max() - u.min()) * (w.max() - w.min()))
    return best


def test_min_area_rect_examples():
    r = min_area_rect([(0, 0), (4, 0), (4, 2), (0, 2)])
    assert r.area == pytest.approx(8.0, abs=1e-9)
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    rot = [(3 + x * c - y * s, 3 + x * s + y * c) for x, y in UNIT]
    assert min_area_rect(rot).area == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(GeometryError):
        min_area_rect([(0, 0), (1, 1), (2, 2)])


def test_min_area_rect_against_sweep():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pts = (rng.normal(size=(30, 2)) * rng.uniform(1, 50, 2)).tolist()
        r = min_area_rect(pts)
        assert contains_all(r.v, pts)
        assert r.area <= brute_force_rect_area(pts) + 1e-9
        xs, ys = zip(*pts)
        assert r.area <= (max(xs) - min(xs)) * (max(ys) - min(ys)) + 1e-9


def test_min_enclosing_quad_examples():
    rect = [(0, 0), (4, 0), (4, 2), (0, 2)]
    q = min_enclosing_quad(rect)
    assert q.area == pytest.approx(8.0, rel=1e-9)
    trap = [(1, 0), (3, 0), (4, 2), (0, 2)]
    assert min_enclosing_quad(trap).area == pytest.approx(Quad(tuple(trap)).area, rel=1e-6)
    with pytest.raises(GeometryError):
        min_enclosing_quad([(0, 0), (1, 1), (2, 2)])


def test_min_enclosing_quad_beats_rectangle_on_triangle():
    # a triangle's best rectangle wastes half its area; a quad can hug it
    tri = [(0, 0), (10, 0), (5, 8)]
    q = min_enclosing_quad(tri)
    assert contains_all(q.v, tri)
    assert q.area < min_area_rect(tri).area - 1.0


def test_min_enclosing_quad_deterministic():
    pts = np.random.default_rng(9).normal(size=(40, 2)).tolist()
    assert min_enclosing_quad(pts) == min_enclosing_quad(pts)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-500, 500), st.integers(-500, 500)), min_size=3, max_size=40))
def test_min_enclosing_quad_contract(pts):
    if convex_hull(pts).degenerate:
        with pytest.raises(GeometryError):
            min_enclosing_quad(pts)
        return
    q = min_enclosing_quad(pts)
    assert contains_all(q.v, pts)
    assert q.area <= min_area_rect(pts).area + 1e-9
