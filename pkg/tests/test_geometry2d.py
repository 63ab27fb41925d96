import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forcemap.geometry2d import (
    EPS,
    ConvexPolygon,
    EmptyIntersection,
    GeometryError,
    SimplePolygon,
    Unbounded,
    UnitHalfspace,
    approximate_dilation_outline,
    contains,
    convex_hull,
    dilate,
    halfspace_offset,
    is_simple,
    point_in_polygon,
    polygon_from_halfspaces,
    signed_area,
    signed_distance,
)


def square_halfspaces(lo=0.0, hi=1.0):
    return [
        UnitHalfspace((1.0, 0.0), hi),
        UnitHalfspace((0.0, 1.0), hi),
        UnitHalfspace((-1.0, 0.0), -lo),
        UnitHalfspace((0.0, -1.0), -lo),
    ]


def random_convex(rng, n=None, scale=1.0):
    n = n or int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    rad = rng.uniform(0.3, 1.0, n) * scale
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1) + rng.uniform(-1, 1, 2)
    return ConvexPolygon(convex_hull(pts))


# halfspaces


def test_unit_normal_enforced():
    with pytest.raises(GeometryError):
        UnitHalfspace((1.0, 1.0), 0.0)
    hs = UnitHalfspace.from_row((3.0, 4.0), 10.0)
    assert np.allclose(hs.normal, [0.6, 0.8])
    assert hs.offset == pytest.approx(2.0)


def test_offset_axis_aligned():
    hs = halfspace_offset(UnitHalfspace((0.0, 1.0), 0.10), 0.0099)
    assert np.array_equal(hs.normal, [0.0, 1.0])
    assert hs.offset == pytest.approx(0.0901, abs=1e-15)


def test_offset_zero_is_identity():
    hs = UnitHalfspace((0.6, 0.8), 0.3)
    assert halfspace_offset(hs, 0.0) == hs


def test_offset_matches_slope_form():
    # the line y = -x + c with c = 0.2*sqrt(2) is the unit halfspace (1,1)/sqrt2 . p <= 0.2
    s = 1 / math.sqrt(2)
    hs = halfspace_offset(UnitHalfspace((s, s), 0.2), 0.01)
    assert hs.offset == pytest.approx(0.19, abs=1e-15)
    m, c = -1.0, 0.2 * math.sqrt(2)
    c_shifted = c - 0.01 * math.sqrt(m * m + 1)
    # both describe the same line: intercept of the unit form times sqrt2
    assert hs.offset * math.sqrt(2) == pytest.approx(c_shifted, abs=1e-15)


def test_negative_depth_rejected():
    with pytest.raises(ValueError):
        halfspace_offset(UnitHalfspace((1.0, 0.0), 1.0), -0.1)


@given(st.floats(0, 0.3), st.floats(0, 0.3), st.floats(-math.pi, math.pi))
def test_offset_composes(n, m, theta):
    hs = UnitHalfspace((math.cos(theta), math.sin(theta)), 0.7)
    a = halfspace_offset(halfspace_offset(hs, n), m)
    b = halfspace_offset(hs, n + m)
    assert a.offset == pytest.approx(b.offset, abs=1e-15)
    assert np.array_equal(a.normal, b.normal)


# vertex enumeration


def test_polygon_from_square_halfspaces():
    poly = polygon_from_halfspaces(square_halfspaces())
    assert np.allclose(poly.vertices, [[0, 0], [1, 0], [1, 1], [0, 1]])


def test_inset_square():
    hss = [halfspace_offset(h, 0.1) for h in square_halfspaces()]
    poly = polygon_from_halfspaces(hss)
    assert np.allclose(poly.vertices, [[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]])
    assert poly.area == pytest.approx(0.64)


def test_inset_collapses_to_empty():
    with pytest.raises(EmptyIntersection):
        polygon_from_halfspaces([halfspace_offset(h, 0.5) for h in square_halfspaces()])


def test_unbounded():
    with pytest.raises(Unbounded):
        polygon_from_halfspaces(square_halfspaces()[:3])


def test_triangle_from_halfspaces(rng):
    for _ in range(20):
        poly = random_convex(rng)
        back = polygon_from_halfspaces(poly.halfspaces)
        assert len(back) == len(poly)
        assert back.area == pytest.approx(poly.area, rel=1e-9)


# polygons


def test_convex_polygon_rejects_reflex():
    with pytest.raises(GeometryError):
        ConvexPolygon([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]])


def test_orientation_normalised():
    poly = SimplePolygon([[0, 1], [1, 1], [1, 0], [0, 0]])
    assert poly.area == pytest.approx(1.0)
    assert signed_area(poly.vertices) > 0
    assert {tuple(v) for v in poly.vertices} == {(0, 0), (1, 0), (1, 1), (0, 1)}


def test_bowtie_not_simple():
    bowtie = [[0, 0], [1, 1], [1, 0], [0, 1]]
    assert not is_simple(bowtie)
    with pytest.raises(GeometryError):
        SimplePolygon(bowtie)


# signed distance


def test_signed_distance_examples(unit_square):
    assert signed_distance([0.5, 0.5], unit_square) == pytest.approx(-0.5)
    assert signed_distance([2.0, 0.5], unit_square) == pytest.approx(1.0)
    assert signed_distance([1.3, 1.4], unit_square) == pytest.approx(0.5)
    assert signed_distance([1.0, 0.3], unit_square) == pytest.approx(0.0)


def test_signed_distance_nonconvex():
    ell = SimplePolygon([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]])
    assert signed_distance([1.5, 1.5], ell) == pytest.approx(0.5)
    assert signed_distance([0.5, 0.5], ell) == pytest.approx(-0.5)
    assert signed_distance([1.2, 1.1], ell) == pytest.approx(0.1)
    assert signed_distance([2.3, 1.4], ell) == pytest.approx(0.5)


# point in polygon


def test_point_in_polygon_examples(unit_square):
    assert point_in_polygon(unit_square.centroid, unit_square)
    assert not point_in_polygon([3.0, -1.0], unit_square)
    # boundary and vertices count as inside
    assert point_in_polygon([1.0, 0.5], unit_square)
    assert point_in_polygon([0.0, 0.0], unit_square)


def test_point_in_polygon_matches_signed_distance(rng):
    polys = [random_convex(rng) for _ in range(5)]
    polys.append(SimplePolygon([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]]))
    for poly in polys:
        pts = rng.uniform(-2.5, 2.5, (2000, 2))
        d = signed_distance(pts, poly)
        off = np.abs(d) > EPS
        assert np.array_equal(point_in_polygon(pts, poly)[off], (d <= 0)[off])


# dilation


def test_contains_boundary_point(unit_square):
    for r in (0.0, 0.1, 1.0):
        assert contains([1.0, 0.5], dilate(unit_square, r))


def test_contains_just_outside(unit_square):
    r = 0.25
    region = dilate(unit_square, r)
    assert contains([1.0 + r, 0.5], region)
    assert not contains([1.0 + r + 1e-6, 0.5], region)
    corner = np.array([1.0, 1.0]) + (r + 1e-6) / math.sqrt(2)
    assert not contains(corner, region)


def test_negative_radius_rejected(unit_square):
    with pytest.raises(GeometryError):
        dilate(unit_square, -0.1)


def test_contains_matches_disk_sampling(unit_square, rng):
    # a point is in the dilation iff some point of its disk lies in the square
    r = 0.3
    region = dilate(unit_square, r)
    pts = rng.uniform(-0.6, 1.6, (100_000, 2))
    ang = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    ring = r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    got = contains(pts, region)
    want = np.empty(len(pts), dtype=bool)
    for s in range(0, len(pts), 5000):
        p = pts[s : s + 5000]
        samples = np.concatenate([p[:, None, :], p[:, None, :] + ring[None]], axis=1)
        inside = np.all((samples >= 0.0) & (samples <= 1.0), axis=2).any(axis=1)
        # square corners inside the disk are hits the ring can step over
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        near_corner = (np.linalg.norm(p[:, None, :] - corners[None], axis=2) <= r).any(axis=1)
        want[s : s + 5000] = inside | near_corner
    # the 256-gon ring undershoots the circle by r(1 - cos(pi/256))
    band = np.abs(region.distance(pts) - r) < 1e-4 * r
    assert np.array_equal(got[~band], want[~band])
    assert band.mean() < 0.001


@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(-1, 2), st.floats(-1, 2))
def test_dilation_monotone(r1, r2, x, y):
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    lo, hi = sorted((r1, r2))
    if contains([x, y], dilate(sq, lo)):
        assert contains([x, y], dilate(sq, hi))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.5))
def test_dilation_is_distance_predicate(seed, r):
    rng = np.random.default_rng(seed)
    poly = random_convex(rng)
    pts = rng.uniform(-3, 3, (500, 2))
    d = signed_distance(pts, poly)
    off = np.abs(d - r) > 1e-9
    assert np.array_equal(contains(pts, dilate(poly, r))[off], (d <= r)[off])


def test_union_membership(unit_square):
    other = ConvexPolygon([[3, 0], [4, 0], [4, 1], [3, 1]])
    region = dilate([unit_square, other], 0.5)
    assert contains([2.9, 0.5], region)
    assert contains([1.4, 0.5], region)
    assert not contains([2.0, 0.5], region)


def test_empty_region_contains_nothing():
    region = dilate([], 1.0)
    assert region.is_empty
    assert not contains([0.0, 0.0], region)


# outlines


def test_outline_radius_zero_is_base(unit_square):
    (out,) = approximate_dilation_outline(dilate(unit_square, 0.0), 1e-3)
    assert out == unit_square


def test_outline_area_converges(unit_square):
    r = 0.2
    exact = unit_square.area + unit_square.perimeter * r + math.pi * r * r
    errs = []
    for tol in (1e-2, 1e-3, 1e-4, 1e-6):
        (out,) = approximate_dilation_outline(dilate(unit_square, r), tol)
        errs.append(exact - out.area)
    assert all(e >= 0 for e in errs)
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] / exact < 1e-5


def test_outline_vertex_count_grows(unit_square):
    counts = [
        len(approximate_dilation_outline(dilate(unit_square, 0.2), tol)[0]) for tol in (1e-2, 1e-3, 1e-4)
    ]
    assert counts[0] < counts[1] < counts[2]


def test_outline_within_tolerance(rng):
    poly = random_convex(rng)
    r, tol = 0.15, 1e-3
    (out,) = approximate_dilation_outline(dilate(poly, r), tol)
    d = signed_distance(out.vertices, poly)
    assert np.allclose(d, r, atol=1e-12)
    # chord midpoints sag by at most the tolerance
    a, b = out.edges
    mid = signed_distance((a + b) / 2, poly)
    assert np.all(mid >= r - tol - 1e-12)


def test_outline_rejects_bad_tolerance(unit_square):
    with pytest.raises(ValueError):
        approximate_dilation_outline(dilate(unit_square, 0.1), 0.0)


def test_convex_hull_drops_interior_and_collinear():
    pts = [[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1], [1, 2]]
    assert np.array_equal(convex_hull(pts), [[0, 0], [2, 0], [2, 2], [0, 2]])
