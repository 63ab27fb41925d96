"""Configuration-space obstacle maps and the real-time unsafe-set query.

The offline phase labels every joint-grid node by testing the backbone
against the dilated FODR union, splits the unsafe nodes into 4-connected
components and wraps each component in an alpha-shape polygon.  The online
phase answers membership of a joint-space point in the union of those
polygons through a bucketed edge index.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay

from .geometry2d import EPS, DilatedRegion, SimplePolygon, convex_hull
from .kinematics import RobotModel, backbone_batch

log = logging.getLogger(__name__)

ALPHA_GROWTH = 1.5
ALPHA_MAX_STEPS = 20
MIN_CONTAINMENT = 0.999
DEGENERATE_BUFFER = 0.25  # in grid cells


class Degenerate(ValueError):
    """Too few or collinear points for a triangulation."""


class NoValidAlpha(UserWarning):
    """No alpha in the sweep produced a valid polygon; the convex hull was used."""


@dataclass(frozen=True)
class JointGrid:
    """Uniform per-joint sample vectors covering the joint limits."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[float, ...]

    def __post_init__(self):
        for lo, hi, dq in zip(self.lower, self.upper, self.resolution):
            if not (hi > lo and dq > 0):
                raise ValueError("grid needs upper > lower and positive resolution")
            n = (hi - lo) / dq
            if abs(n - round(n)) > 1e-6:
                raise ValueError("joint range must be a whole number of grid steps")

    @classmethod
    def for_robot(cls, robot: RobotModel, resolution: float) -> "JointGrid":
        lim = robot.limits
        n = robot.n_segments
        return cls(tuple(lim[:, 0]), tuple(lim[:, 1]), (float(resolution),) * n)

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(
            int(round((hi - lo) / dq)) + 1 for lo, hi, dq in zip(self.lower, self.upper, self.resolution)
        )

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.shape)]

    def nodes(self, index) -> np.ndarray:
        """Joint values for integer node indices ``(..., ndim)``."""
        idx = np.asarray(index)
        axes = self.axes
        return np.stack([axes[d][idx[..., d]] for d in range(self.ndim)], axis=-1)

    def all_nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def nearest_index(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        lo = np.asarray(self.lower)
        dq = np.asarray(self.resolution)
        idx = np.rint((q - lo) / dq).astype(int)
        return np.clip(idx, 0, np.asarray(self.shape) - 1)


@dataclass(frozen=True)
class CObsGrid:
    bits: np.ndarray
    grid: JointGrid

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool, order="C")  # private copy, frozen below
        if b.shape != self.grid.shape:
            raise ValueError(f"bits shape {b.shape} does not match grid {self.grid.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.bits.shape

    @property
    def unsafe_fraction(self) -> float:
        return float(self.bits.mean())

    def __eq__(self, other):
        return (
            isinstance(other, CObsGrid) and self.grid == other.grid and np.array_equal(self.bits, other.bits)
        )


def _chi_rows(Q: np.ndarray, robot: RobotModel, region: DilatedRegion) -> np.ndarray:
    if region.is_empty:
        return np.zeros(len(Q), dtype=bool)
    B = backbone_batch(Q, robot)
    m, P, _ = B.shape
    return region.contains_points(B.reshape(-1, 2)).reshape(m, P).any(axis=1)


def chi_exact(q, robot: RobotModel, region: DilatedRegion):
    """Ground-truth indicator: 1 iff some backbone sample lies in ``region``.

    Accepts one configuration or an ``(m, n)`` batch.
    """
    Q = np.asarray(q, dtype=float)
    single = Q.ndim == 1
    Q = np.atleast_2d(Q)
    out = np.zeros(len(Q), dtype=np.uint8)
    for start in range(0, len(Q), 2048):
        out[start : start + 2048] = _chi_rows(Q[start : start + 2048], robot, region)
    return int(out[0]) if single else out


def build_cobs(
    robot: RobotModel, region: DilatedRegion, grid: JointGrid, workers: int = 1, chunk: int = 2048
) -> CObsGrid:
    """Label every grid node with ``chi_exact``."""
    nodes = grid.all_nodes()
    flat = np.zeros(len(nodes), dtype=bool)
    starts = range(0, len(nodes), chunk)

    def work(start):
        flat[start : start + chunk] = _chi_rows(nodes[start : start + chunk], robot, region)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return CObsGrid(flat.reshape(grid.shape), grid)


def connected_components(cobs: CObsGrid) -> list[np.ndarray]:
    """Face-connected components of unsafe cells, as joint-space point sets.

    Components are ordered by their first cell in row-major order; each is an
    ``(m, ndim)`` array of node coordinates, also in row-major order.
    """
    structure = ndimage.generate_binary_structure(cobs.bits.ndim, 1)
    labels, count = ndimage.label(cobs.bits, structure=structure)
    if count == 0:
        return []
    idx = np.argwhere(labels)
    lab = labels[tuple(idx.T)]
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    cuts = np.flatnonzero(np.diff(lab)) + 1
    return [cobs.grid.nodes(group) for group in np.split(idx, cuts)]


def _component_indices(cobs: CObsGrid) -> list[np.ndarray]:
    structure = ndimage.generate_binary_structure(cobs.bits.ndim, 1)
    labels, count = ndimage.label(cobs.bits, structure=structure)
    return [np.argwhere(labels == k + 1) for k in range(count)]


@dataclass(frozen=True)
class AlphaShapeResult:
    polygon: SimplePolygon | None
    containment: float
    reason: str = ""


def _is_degenerate(points: np.ndarray) -> bool:
    if len(points) < 3:
        return True
    c = points - points.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return bool(s[-1] <= 1e-12 * max(s[0], 1e-300))


def _alpha_shape(points: np.ndarray, alpha: float, tri: Delaunay | None = None) -> AlphaShapeResult:
    if _is_degenerate(points):
        raise Degenerate("alpha shape needs at least 3 non-collinear points")
    if tri is None:
        tri = Delaunay(points)
    simp = tri.simplices
    a, b, c = points[simp[:, 0]], points[simp[:, 1]], points[simp[:, 2]]
    la = np.hypot(*(b - c).T)
    lb = np.hypot(*(c - a).T)
    lc = np.hypot(*(a - b).T)
    area2 = np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        circ = la * lb * lc / (2.0 * area2)
    keep = (area2 > 1e-12 * (la * lb)) & (circ <= alpha * (1 + 1e-9))
    kept = simp[keep]
    if len(kept) == 0:
        return AlphaShapeResult(None, 0.0, "no triangle survives the filter")
    containment = np.unique(kept).size / len(points)

    edges = np.concatenate([kept[:, [0, 1]], kept[:, [1, 2]], kept[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    border = uniq[counts == 1]
    deg = np.bincount(border.ravel(), minlength=len(points))
    if np.any(deg[deg > 0] != 2):
        return AlphaShapeResult(None, containment, "boundary touches itself at a vertex")

    nbrs: dict[int, list[int]] = {}
    for i, j in border.tolist():
        nbrs.setdefault(i, []).append(j)
        nbrs.setdefault(j, []).append(i)
    start = int(border[0, 0])
    loop = [start]
    prev, cur = -1, start
    while True:
        n0, n1 = nbrs[cur]
        nxt = n0 if n0 != prev else n1
        if nxt == start:
            break
        loop.append(nxt)
        prev, cur = cur, nxt
    if len(loop) != len(border):
        return AlphaShapeResult(None, containment, "boundary is disconnected")
    return AlphaShapeResult(SimplePolygon(points[loop], validate=False), containment)


def alpha_shape(points, alpha: float) -> SimplePolygon | None:
    """Outer boundary of the alpha complex of ``points``.

    Convention: ``alpha`` is the probe-disk radius, so a Delaunay triangle is
    kept when its circumradius is at most ``alpha``.  Returns ``None`` when
    the kept triangles do not bound a single simple polygon (pinched,
    disconnected or holed boundary).
    """
    pts = np.asarray(points, dtype=float)
    return _alpha_shape(pts, alpha).polygon


def buffered_hull(points, buffer: float) -> SimplePolygon:
    """Convex hull of the points each grown into a square of half-width ``buffer``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    corners = (pts[:, None, :] + buffer * np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]])).reshape(-1, 2)
    return SimplePolygon(convex_hull(corners), validate=False)


def select_alpha(points, delta_q: float, c_alpha: float = 1.5) -> tuple[float, SimplePolygon]:
    """Smallest alpha in a geometric sweep that gives a valid, covering polygon.

    The sweep is ``alpha_0 * 1.5**k`` for ``k < 20`` with ``alpha_0 = c_alpha *
    delta_q``.  Degenerate inputs get a buffered hull (alpha reported as 0);
    if the sweep fails the convex hull is returned with a ``NoValidAlpha``
    warning (alpha reported as ``inf``).
    """
    if not c_alpha > 0:
        raise ValueError("c_alpha must be positive")
    pts = np.asarray(points, dtype=float)
    if _is_degenerate(pts):
        return 0.0, buffered_hull(pts, DEGENERATE_BUFFER * delta_q)
    tri = Delaunay(pts)
    alpha = c_alpha * delta_q
    for _ in range(ALPHA_MAX_STEPS):
        res = _alpha_shape(pts, alpha, tri)
        if res.polygon is not None and res.containment >= MIN_CONTAINMENT:
            return alpha, res.polygon
        alpha *= ALPHA_GROWTH
    warnings.warn(
        f"no alpha up to {alpha / ALPHA_GROWTH:.4g} gave a valid polygon for {len(pts)} points; "
        "using the convex hull",
        NoValidAlpha,
        stacklevel=2,
    )
    return math.inf, SimplePolygon(convex_hull(pts), validate=False)


class _EdgeIndex:
    """Uniform bucket grid over the polygons for O(1)-ish membership.

    Every cell is either uniformly outside, uniformly inside some polygon, or
    lists the edges that cross it together with a reference point whose
    membership is known.  A query counts crossings of the segment from the
    reference point to the query point against the listed edges only.
    Points within ``margin`` of a polygon boundary count as inside.
    """

    _REF_OFFSETS = ((0.5123, 0.4871), (0.3137, 0.7218), (0.6931, 0.2357), (0.1414, 0.1732))

    def __init__(self, polygons: list[SimplePolygon], cell: float, margin: float = 0.0):
        self.cell = float(cell)
        self.margin = float(margin)
        self.reach = max(EPS, self.margin)
        if not polygons:
            self.x0 = self.y0 = 0.0
            self.nx = self.ny = 0
            self.table: list = []
            return
        bounds = np.array([p.bounds for p in polygons])
        h = self.cell
        pad = h + self.margin
        self.x0 = float(bounds[:, 0].min()) - pad
        self.y0 = float(bounds[:, 1].min()) - pad
        self.nx = int(math.ceil((bounds[:, 2].max() + pad - self.x0) / h)) + 1
        self.ny = int(math.ceil((bounds[:, 3].max() + pad - self.y0) / h)) + 1
        nx, ny = self.nx, self.ny
        # per cell: None = outside, True = inside, list = mixed entries
        table: list = [None] * (nx * ny)
        for poly in polygons:
            self._add_polygon(poly, table)
        self.table = table
        self.state = np.array(
            [0 if c is None else (1 if c is True else 2) for c in table], dtype=np.int8
        )

    def _cell_range(self, lo, hi):
        h = self.cell
        g = self.reach
        i0 = max(int(math.floor((lo[0] - g - self.x0) / h)), 0)
        j0 = max(int(math.floor((lo[1] - g - self.y0) / h)), 0)
        i1 = min(int(math.floor((hi[0] + g - self.x0) / h)), self.nx - 1)
        j1 = min(int(math.floor((hi[1] + g - self.y0) / h)), self.ny - 1)
        return i0, j0, i1, j1

    def _add_polygon(self, poly: SimplePolygon, table: list):
        h = self.cell
        nx = self.nx
        a, b = poly.edges
        buckets: dict[int, list[int]] = {}
        for e in range(len(a)):
            lo = np.minimum(a[e], b[e])
            hi = np.maximum(a[e], b[e])
            i0, j0, i1, j1 = self._cell_range(lo, hi)
            for j in range(j0, j1 + 1):
                for i in range(i0, i1 + 1):
                    if _segment_hits_box(a[e], b[e], self.x0 + i * h, self.y0 + j * h, h, self.reach):
                        buckets.setdefault(j * nx + i, []).append(e)
        i0, j0, i1, j1 = self._cell_range(*np.split(np.array(poly.bounds), 2))
        # scanline fill of the uniform cells through their centres
        xs = self.x0 + (np.arange(i0, i1 + 1) + 0.5) * h
        for j in range(j0, j1 + 1):
            yc = self.y0 + (j + 0.5) * h
            inside = _scanline_inside(a, b, xs, yc)
            for k, i in enumerate(range(i0, i1 + 1)):
                cid = j * nx + i
                if cid in buckets or table[cid] is True:
                    continue
                if inside[k]:
                    table[cid] = True
        for cid, elist in sorted(buckets.items()):
            if table[cid] is True:
                continue
            i, j = cid % nx, cid // nx
            ea, eb = a[elist], b[elist]
            ref = None
            for ox, oy in self._REF_OFFSETS:
                cand = np.array([self.x0 + (i + ox) * h, self.y0 + (j + oy) * h])
                if _min_seg_dist(cand, ea, eb) > 1e-6 * h:
                    ref = cand
                    break
            if ref is None:  # pragma: no cover - offsets are irrational enough
                raise RuntimeError("could not place a reference point in a query cell")
            ref_in = bool(poly.winding_inside(ref[None, :])[0])
            entry = (ref_in, float(ref[0]), float(ref[1]), _edge_tuples(ea, eb))
            if table[cid] is None:
                table[cid] = [entry]
            else:
                table[cid].append(entry)

    def query(self, x: float, y: float) -> bool:
        h = self.cell
        i = int((x - self.x0) // h)
        j = int((y - self.y0) // h)
        if i < 0 or j < 0 or i >= self.nx or j >= self.ny:
            return False
        c = self.table[j * self.nx + i]
        if c is None or c is True:
            return c is True
        for ref_in, rx, ry, edges in c:
            if _cell_inside(ref_in, rx, ry, x, y, edges, self.reach):
                return True
        return False


def _edge_tuples(ea, eb):
    return tuple(
        (float(p[0]), float(p[1]), float(q[0]), float(q[1])) for p, q in zip(ea, eb)
    )


def _cell_inside(ref_in, rx, ry, x, y, edges, reach=EPS) -> bool:
    parity = ref_in
    reach2 = reach * reach
    dx, dy = x - rx, y - ry
    for ax, ay, bx, by in edges:
        ex, ey = bx - ax, by - ay
        # boundary (grown by the margin) counts as inside
        ll = ex * ex + ey * ey
        t = ((x - ax) * ex + (y - ay) * ey) / ll
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        px, py = ax + t * ex - x, ay + t * ey - y
        if px * px + py * py <= reach2:
            return True
        sa = dx * (ay - ry) - dy * (ax - rx) > 0.0
        sb = dx * (by - ry) - dy * (bx - rx) > 0.0
        if sa == sb:
            continue
        o1 = ex * (ry - ay) - ey * (rx - ax)
        o2 = ex * (y - ay) - ey * (x - ax)
        if (o1 > 0.0 and o2 < 0.0) or (o1 < 0.0 and o2 > 0.0):
            parity = not parity
    return parity


def _min_seg_dist(p, ea, eb) -> float:
    ab = eb - ea
    t = np.clip(np.sum((p - ea) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
    d = p - (ea + t[:, None] * ab)
    return float(np.sqrt(np.min(np.sum(d * d, axis=1))))


def _segment_hits_box(a, b, x0, y0, h, grow=EPS) -> bool:
    """Closed segment against the closed square ``[x0, x0+h] x [y0, y0+h]`` grown by ``grow``."""
    lo = np.array([x0 - grow, y0 - grow])
    hi = np.array([x0 + h + grow, y0 + h + grow])
    d = b - a
    t0, t1 = 0.0, 1.0
    for k in range(2):
        if d[k] == 0.0:
            if a[k] < lo[k] or a[k] > hi[k]:
                return False
            continue
        u = (lo[k] - a[k]) / d[k]
        v = (hi[k] - a[k]) / d[k]
        if u > v:
            u, v = v, u
        t0, t1 = max(t0, u), min(t1, v)
        if t0 > t1:
            return False
    return True


def _scanline_inside(a, b, xs, y) -> np.ndarray:
    ay, by = a[:, 1], b[:, 1]
    straddle = (ay > y) != (by > y)
    if not np.any(straddle):
        return np.zeros(len(xs), dtype=bool)
    aa, bb = a[straddle], b[straddle]
    xint = aa[:, 0] + (y - aa[:, 1]) * (bb[:, 0] - aa[:, 0]) / (bb[:, 1] - aa[:, 1])
    return (np.count_nonzero(xs[:, None] < xint[None, :], axis=1) % 2) == 1


@dataclass
class UnsafeRegionSet:
    """Union of reconstructed unsafe polygons with a query index."""

    polygons: list[SimplePolygon]
    alphas: list[float]
    source_components: list[int]
    cell: float = math.radians(1.0)
    margin: float = 0.0
    _index: _EdgeIndex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (len(self.polygons) == len(self.alphas) == len(self.source_components)):
            raise ValueError("polygons, alphas and source_components must align")
        if not self.margin >= 0:
            raise ValueError("margin must be non-negative")
        self._index = _EdgeIndex(self.polygons, self.cell, self.margin)

    def __eq__(self, other):
        return (
            isinstance(other, UnsafeRegionSet)
            and self.alphas == other.alphas
            and self.source_components == other.source_components
            and self.margin == other.margin
            and len(self.polygons) == len(other.polygons)
            and all(np.array_equal(p.vertices, o.vertices) for p, o in zip(self.polygons, other.polygons))
        )

    def __len__(self):
        return len(self.polygons)

    @property
    def vertex_count(self) -> int:
        return sum(len(p) for p in self.polygons)

    def contains(self, x: float, y: float) -> bool:
        return self._index.query(x, y)

    def contains_batch(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        idx = self._index
        out = np.zeros(len(Q), dtype=bool)
        if idx.nx == 0:
            return out
        i = np.floor((Q[:, 0] - idx.x0) / idx.cell).astype(np.int64)
        j = np.floor((Q[:, 1] - idx.y0) / idx.cell).astype(np.int64)
        ok = (i >= 0) & (j >= 0) & (i < idx.nx) & (j < idx.ny)
        state = np.zeros(len(Q), dtype=np.int8)
        state[ok] = idx.state[j[ok] * idx.nx + i[ok]]
        out[state == 1] = True
        for k in np.flatnonzero(state == 2):
            out[k] = idx.query(float(Q[k, 0]), float(Q[k, 1]))
        return out


def chi_fast(q, regions: UnsafeRegionSet) -> int:
    """Real-time indicator: 1 iff the joint-space point lies in any polygon
    (grown by the region set's query margin)."""
    return 1 if regions._index.query(float(q[0]), float(q[1])) else 0


def build_unsafe_set(cobs: CObsGrid, c_alpha: float = 1.5, margin_cells: float = 0.5) -> UnsafeRegionSet:
    """Components -> alpha-shapes -> region set (2-D grids only).

    ``margin_cells`` grows every polygon for queries, in grid steps.  The
    alpha-shape boundary passes through the outermost unsafe nodes while the
    true boundary lies somewhere in the next cell; half a step centres it.
    """
    if cobs.grid.ndim != 2:
        raise ValueError("polygon reconstruction is implemented for two joints")
    dq = float(max(cobs.grid.resolution))
    polys, alphas, sizes = [], [], []
    for pts in connected_components(cobs):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NoValidAlpha)
            alpha, poly = select_alpha(pts, dq, c_alpha)
        for w in caught:
            log.warning("%s", w.message)
            warnings.warn(w.message, w.category, stacklevel=2)
        polys.append(poly)
        alphas.append(float(alpha))
        sizes.append(len(pts))
    return UnsafeRegionSet(polys, alphas, sizes, cell=dq, margin=margin_cells * dq)


@dataclass(frozen=True)
class GridAudit:
    agreement: float
    disagreements: np.ndarray
    max_boundary_distance: int


def boundary_distance_map(cobs: CObsGrid) -> np.ndarray:
    """Chebyshev distance (in cells) from every node to the nearest boundary cell.

    A boundary cell is an unsafe node with at least one safe face neighbour.
    """
    bits = cobs.bits
    if not bits.any():
        return np.full(bits.shape, np.iinfo(np.int32).max, dtype=np.int64)
    eroded = ndimage.binary_erosion(
        bits, structure=ndimage.generate_binary_structure(bits.ndim, 1), border_value=1
    )
    boundary = bits & ~eroded
    if not boundary.any():
        return np.full(bits.shape, np.iinfo(np.int32).max, dtype=np.int64)
    return ndimage.distance_transform_cdt(~boundary, metric="chessboard").astype(np.int64)


def audit_grid(regions: UnsafeRegionSet, cobs: CObsGrid) -> GridAudit:
    """Compare polygon membership with the grid labels at every node."""
    nodes = cobs.grid.all_nodes()
    fast = regions.contains_batch(nodes).reshape(cobs.dims)
    bad = np.argwhere(fast != cobs.bits)
    dist = boundary_distance_map(cobs)
    worst = int(dist[tuple(bad.T)].max()) if len(bad) else 0
    return GridAudit(1.0 - len(bad) / nodes.shape[0], bad, worst)
