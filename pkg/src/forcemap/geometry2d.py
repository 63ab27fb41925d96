"""Planar geometry kernel.

Convex polygons are kept both as CCW vertex lists and as unit-normal
halfspace rows ``normal . x <= offset``.  Minkowski dilation by a disk is
never materialised for queries; membership is a distance predicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-9


class GeometryError(ValueError):
    pass


class EmptyIntersection(GeometryError):
    """The halfspaces have no common interior."""


class Unbounded(GeometryError):
    """The halfspaces do not bound a finite region."""


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper or touching intersection of closed segments p1p2 and p3p4."""
    d1 = cross2(p4 - p3, p1 - p3)
    d2 = cross2(p4 - p3, p2 - p3)
    d3 = cross2(p2 - p1, p3 - p1)
    d4 = cross2(p2 - p1, p4 - p1)
    if ((d1 > EPS * EPS and d2 < -EPS * EPS) or (d1 < -EPS * EPS and d2 > EPS * EPS)) and (
        (d3 > EPS * EPS and d4 < -EPS * EPS) or (d3 < -EPS * EPS and d4 > EPS * EPS)
    ):
        return True
    for a, b, c in ((p3, p4, p1), (p3, p4, p2), (p1, p2, p3), (p1, p2, p4)):
        if _point_segment_distance(c, a, b) <= EPS * 1e-3:
            return True
    return False


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(np.dot(ab, ab))
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float(np.dot(p - a, ab)) / denom))
    return float(np.hypot(*(p - (a + t * ab))))


def is_simple(vertices) -> bool:
    """True when no two non-adjacent edges of the closed polyline touch."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    a = v
    b = np.roll(v, -1, axis=0)
    if np.any(np.hypot(*(b - a).T) <= 0.0):
        return False
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for i in range(n):
        # bounding-box prefilter, then the exact test on survivors
        overlap = np.all((lo <= hi[i] + EPS) & (hi >= lo[i] - EPS), axis=1)
        for j in np.nonzero(overlap)[0]:
            if j <= i or j == (i + 1) % n or i == (j + 1) % n:
                continue
            if _segments_cross(a[i], b[i], a[j], b[j]):
                return False
    return True


@dataclass(frozen=True)
class UnitHalfspace:
    """Constraint ``normal . x <= offset`` with a unit normal."""

    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        n = math.hypot(*self.normal)
        if abs(n - 1.0) > 1e-12:
            raise GeometryError(f"halfspace normal must be unit length, got norm {n}")

    @classmethod
    def from_row(cls, row, rhs: float) -> "UnitHalfspace":
        """Normalise an arbitrary row ``row . x <= rhs``."""
        nx, ny = float(row[0]), float(row[1])
        n = math.hypot(nx, ny)
        if n == 0.0:
            raise GeometryError("zero halfspace row")
        return cls((nx / n, ny / n), float(rhs) / n)

    def value(self, p) -> np.ndarray:
        """Signed distance of points to the boundary line (positive = violated)."""
        p = np.asarray(p, dtype=float)
        return p[..., 0] * self.normal[0] + p[..., 1] * self.normal[1] - self.offset


def halfspace_offset(hs: UnitHalfspace, depth: float) -> UnitHalfspace:
    """Translate the boundary of ``hs`` inward by ``depth``."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth == 0:
        return hs
    return UnitHalfspace(hs.normal, hs.offset - depth)


def _clip(poly: list[np.ndarray], hs: UnitHalfspace) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        va, vb = float(hs.value(a)), float(hs.value(b))
        if va <= 0:
            out.append(a)
        if (va < 0 < vb) or (vb < 0 < va):
            t = va / (va - vb)
            out.append(a + t * (b - a))
    return out


def _dedupe(points: list[np.ndarray], tol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if not out or np.hypot(*(p - out[-1])) > tol:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= tol:
        out.pop()
    # drop collinear vertices
    changed = True
    while changed and len(out) > 3:
        changed = False
        for i in range(len(out)):
            a, b, c = out[i - 1], out[i], out[(i + 1) % len(out)]
            if abs(float(cross2(b - a, c - b))) <= tol * max(np.hypot(*(c - a)), tol):
                out.pop(i)
                changed = True
                break
    return out


def polygon_from_halfspaces(hss: list[UnitHalfspace]) -> "ConvexPolygon":
    """Enumerate the vertices of a bounded halfspace intersection (CCW)."""
    if len(hss) < 3:
        raise Unbounded("at least three halfspaces are needed to bound a polygon")
    normals = np.array([h.normal for h in hss])
    angles = np.sort(np.arctan2(normals[:, 1], normals[:, 0]))
    gaps = np.diff(np.concatenate([angles, angles[:1] + 2 * np.pi]))
    if np.max(gaps) >= np.pi - 1e-12:
        raise Unbounded("halfspace normals do not positively span the plane")
    scale = max(1.0, max(abs(h.offset) for h in hss))
    big = 1e3 * scale
    poly = [np.array(p, dtype=float) for p in ((-big, -big), (big, -big), (big, big), (-big, big))]
    for hs in hss:
        poly = _clip(poly, hs)
        if not poly:
            raise EmptyIntersection("halfspace intersection is empty")
    poly = _dedupe(poly, EPS * scale)
    if len(poly) < 3 or signed_area(poly) <= EPS * EPS:
        raise EmptyIntersection("halfspace intersection has no interior")
    if np.max(np.abs(poly)) >= 0.5 * big:
        raise Unbounded("halfspace intersection is unbounded")
    poly = np.array(poly)
    # start at the lowest (then leftmost) vertex so the output is canonical
    start = min(range(len(poly)), key=lambda i: (round(poly[i, 1] / (EPS * scale)), poly[i, 0]))
    return ConvexPolygon(np.roll(poly, -start, axis=0))


class SimplePolygon:
    """Closed simple polygon with CCW vertices, possibly nonconvex."""

    def __init__(self, vertices, validate: bool = True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 planar vertices")
        if signed_area(v) < 0:
            v = v[::-1].copy()
        if validate and not is_simple(v):
            raise GeometryError("polygon is not simple")
        v.setflags(write=False)
        self.vertices = v

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, SimplePolygon) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}({self.vertices.tolist()!r})"

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def perimeter(self) -> float:
        a, b = self.edges
        return float(np.sum(np.hypot(*(b - a).T)))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        c = cross2(v, w)
        a = 3.0 * np.sum(c)
        return np.array([np.sum((v[:, 0] + w[:, 0]) * c), np.sum((v[:, 1] + w[:, 1]) * c)]) / a

    def boundary_distance(self, points) -> np.ndarray:
        """Unsigned distance from each point to the polygon boundary."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self.edges
        ab = b - a
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(ap * ab, axis=-1) / np.sum(ab * ab, axis=-1), 0.0, 1.0)
        d = ap - t[..., None] * ab
        return np.sqrt(np.min(np.sum(d * d, axis=-1), axis=1))

    def winding_inside(self, points) -> np.ndarray:
        """Crossing-number interior test (boundary handling is unspecified)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self.edges
        px, py = p[:, 0:1], p[:, 1:2]
        ay, by = a[:, 1], b[:, 1]
        straddle = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (py - ay) * (b[:, 0] - a[:, 0]) / (by - ay)
        hits = straddle & (px < xint)
        return (np.count_nonzero(hits, axis=1) % 2) == 1


class ConvexPolygon(SimplePolygon):
    """Bounded convex polygon carrying its halfspace representation."""

    def __init__(self, vertices, validate: bool = True):
        super().__init__(vertices, validate=False)
        v = self.vertices
        if validate:
            d1 = np.roll(v, -1, axis=0) - v
            d2 = np.roll(d1, -1, axis=0)
            turns = cross2(d1, d2)
            if np.any(turns <= 0):
                raise GeometryError("polygon is not strictly convex")
            # a strictly convex CCW polygon with total turning 2*pi is simple
            ang = np.arctan2(turns, np.sum(d1 * d2, axis=1))
            if abs(float(np.sum(ang)) - 2 * np.pi) > 1e-6:
                raise GeometryError("polygon winds more than once")
        a, b = self.edges
        e = b - a
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / np.hypot(e[:, 0], e[:, 1])[:, None]
        offsets = np.sum(normals * a, axis=1)
        normals.setflags(write=False)
        offsets.setflags(write=False)
        self.normals = normals
        self.offsets = offsets

    @property
    def halfspaces(self) -> list[UnitHalfspace]:
        return [
            UnitHalfspace((float(n[0]), float(n[1])), float(h))
            for n, h in zip(self.normals, self.offsets)
        ]

    def facet(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints of edge ``index`` (from vertex ``index`` to the next)."""
        n = len(self.vertices)
        return self.vertices[index % n], self.vertices[(index + 1) % n]

    def signed_distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        viol = p @ self.normals.T - self.offsets
        inner = np.max(viol, axis=1)
        out = self.boundary_distance(p)
        return np.where(inner <= 0.0, inner, out)


def signed_distance(p, poly: SimplePolygon):
    """Signed Euclidean distance to the boundary; negative inside.

    Accepts a single point or an ``(m, 2)`` array.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if isinstance(poly, ConvexPolygon):
        d = poly.signed_distance(pts)
    else:
        d = poly.boundary_distance(pts)
        d = np.where(poly.winding_inside(pts), -d, d)
    return float(d[0]) if single else d


def point_in_polygon(p, poly: SimplePolygon):
    """Membership with the boundary counted as inside (within ``EPS``)."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    inside = poly.winding_inside(pts) | (poly.boundary_distance(pts) <= EPS)
    return bool(inside[0]) if single else inside


@dataclass(frozen=True)
class DilatedRegion:
    """Union of polygons grown by a disk of ``radius``.

    Membership is exact: a point belongs iff its distance to the union is at
    most ``radius`` (plus ``EPS``, so the boundary counts as inside).
    """

    base: tuple[SimplePolygon, ...]
    radius: float
    _boxes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        base = self.base
        if isinstance(base, SimplePolygon):
            base = (base,)
        object.__setattr__(self, "base", tuple(base))
        if self.radius < 0:
            raise GeometryError("dilation radius must be non-negative")
        boxes = np.array([p.bounds for p in self.base], dtype=float).reshape(-1, 4)
        object.__setattr__(self, "_boxes", boxes)

    @property
    def is_empty(self) -> bool:
        return len(self.base) == 0

    def distance(self, points) -> np.ndarray:
        """Signed distance from points to the base union (min over members)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.full(len(p), np.inf)
        for poly in self.base:
            d = np.minimum(d, signed_distance(p, poly))
        return d

    def contains_points(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(p), dtype=bool)
        reach = self.radius + EPS
        for poly, (x0, y0, x1, y1) in zip(self.base, self._boxes):
            near = (
                (p[:, 0] >= x0 - reach)
                & (p[:, 0] <= x1 + reach)
                & (p[:, 1] >= y0 - reach)
                & (p[:, 1] <= y1 + reach)
                & ~out
            )
            if np.any(near):
                idx = np.nonzero(near)[0]
                out[idx] = signed_distance(p[idx], poly) <= reach
        return out


def dilate(base, radius: float) -> DilatedRegion:
    if isinstance(base, SimplePolygon):
        base = (base,)
    return DilatedRegion(tuple(base), float(radius))


def contains(p, region: DilatedRegion):
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    res = region.contains_points(np.atleast_2d(pts))
    return bool(res[0]) if single else res


def approximate_dilation_outline(region: DilatedRegion, arc_tolerance: float) -> list[SimplePolygon]:
    """Polygonal outline of each dilated convex member, for drawing.

    Edges are translated outward by the radius and each corner is replaced by
    an arc sampled finely enough that the chord sagitta stays below
    ``arc_tolerance``.  Non-convex members are returned unchanged when the
    radius is zero and rejected otherwise.
    """
    if arc_tolerance <= 0:
        raise ValueError("arc_tolerance must be positive")
    r = region.radius
    out = []
    for poly in region.base:
        if r == 0:
            out.append(poly)
            continue
        if not isinstance(poly, ConvexPolygon):
            raise GeometryError("outline rendering only supports convex members")
        step = 2.0 * math.acos(max(-1.0, 1.0 - arc_tolerance / r)) if arc_tolerance < r else math.pi / 2
        pts = []
        normals = poly.normals
        k = len(poly.vertices)
        for i in range(k):
            n_in = normals[i - 1]
            n_out = normals[i]
            a0 = math.atan2(n_in[1], n_in[0])
            a1 = math.atan2(n_out[1], n_out[0])
            sweep = (a1 - a0) % (2 * math.pi)
            m = max(1, math.ceil(sweep / step))
            v = poly.vertices[i]
            for j in range(m + 1):
                a = a0 + sweep * j / m
                pts.append((v[0] + r * math.cos(a), v[1] + r * math.sin(a)))
        out.append(SimplePolygon(pts, validate=False))
    return out


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, CCW, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        h: list[tuple[float, float]] = []
        for p in seq:
            while len(h) >= 2 and (
                (h[-1][0] - h[-2][0]) * (p[1] - h[-2][1]) - (h[-1][1] - h[-2][1]) * (p[0] - h[-2][0])
            ) <= 0:
                h.pop()
            h.append(p)
        return h

    lower = half(pts)
    upper = half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])
