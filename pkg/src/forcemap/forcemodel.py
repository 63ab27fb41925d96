"""Elastic obstacles, FODR construction and simulated contact forces.

Each obstacle facet deflects along its inward normal with a linear law
``psi(n) = k_env * n``, discounted by the safety factor ``delta``.  The
deflection at which the discounted force reaches ``F_max`` is
``n_max = F_max / (delta * k_env)``; shifting every facet inward by that
amount gives the force-unsafe deformation region (FODR).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry2d import (
    EPS,
    ConvexPolygon,
    EmptyIntersection,
    halfspace_offset,
    polygon_from_halfspaces,
)


class ObstacleConsumed(ValueError):
    """The admissible deflection swallows the whole obstacle."""

    def __init__(self, obstacle_id, n_max):
        super().__init__(
            f"obstacle {obstacle_id!r}: inset depth {n_max:.6g} m leaves no force-unsafe region"
        )
        self.obstacle_id = obstacle_id
        self.n_max = n_max


@dataclass(frozen=True)
class ElasticObstacle:
    shape: ConvexPolygon
    k_env: float
    f_max: float
    delta: float = 1.0
    contact_facet: int | None = None
    name: str = "obstacle"

    def __post_init__(self):
        if not self.k_env > 0:
            raise ValueError("k_env must be positive")
        if not self.f_max > 0:
            raise ValueError("F_max must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.contact_facet is not None and not 0 <= self.contact_facet < len(self.shape):
            raise ValueError(f"contact facet {self.contact_facet} out of range")

    def psi(self, n):
        """Undiscounted facet force for deflection ``n`` (zero for ``n <= 0``)."""
        return self.k_env * np.maximum(np.asarray(n, dtype=float), 0.0)

    def psi_inv(self, force):
        return np.asarray(force, dtype=float) / self.k_env

    def force(self, n):
        """Discounted facet force ``delta * psi(n)``."""
        return self.delta * self.psi(n)

    @property
    def n_max(self) -> float:
        return max_deflection(self.f_max, self.delta, self.k_env)


def max_deflection(f_max: float, delta: float, k_env: float) -> float:
    if not (f_max > 0 and k_env > 0 and 0 < delta <= 1):
        raise ValueError("need F_max > 0, k_env > 0 and 0 < delta <= 1")
    return f_max / (delta * k_env)


@dataclass(frozen=True)
class Fodr:
    shape: ConvexPolygon
    source: ElasticObstacle
    n_max: float


def build_fodr(obs: ElasticObstacle) -> Fodr:
    n_max = obs.n_max
    if n_max == 0:
        return Fodr(obs.shape, obs, 0.0)
    try:
        shape = polygon_from_halfspaces([halfspace_offset(h, n_max) for h in obs.shape.halfspaces])
    except EmptyIntersection:
        raise ObstacleConsumed(obs.name, n_max) from None
    return Fodr(shape, obs, n_max)


@dataclass(frozen=True)
class ContactForceReading:
    obstacle_id: str
    force: float
    deepest_point_index: int
    raw_force: float = 0.0
    clearance: float = float("inf")

    def __post_init__(self):
        if self.force < 0:
            raise ValueError("force must be non-negative")


@dataclass(frozen=True)
class _ContactPatch:
    """Support segment of the FODR for one facet normal."""

    normal: np.ndarray
    a: np.ndarray
    b: np.ndarray
    support: float
    inset: float


def _patches(obs: ElasticObstacle, fodr: Fodr | None) -> list[_ContactPatch]:
    facets = range(len(obs.shape)) if obs.contact_facet is None else [obs.contact_facet]
    target = fodr.shape if fodr is not None else obs.shape
    inset = fodr.n_max if fodr is not None else 0.0
    tv = target.vertices
    out = []
    for i in facets:
        nu = obs.shape.normals[i]
        proj = tv @ nu
        top = float(proj.max())
        on = tv[proj >= top - EPS]
        tangent = np.array([-nu[1], nu[0]])
        t = on @ tangent
        a, b = on[np.argmin(t)], on[np.argmax(t)]
        out.append(_ContactPatch(nu, a, b, top, inset))
    return out


def facet_clearance(points, obs: ElasticObstacle, fodr: Fodr | None = None) -> np.ndarray:
    """Clearance ``n_k`` of points from the obstacle's contact facet(s).

    Within the extent of the FODR's contact face this is the signed distance
    to the undeformed facet line.  Past the ends of that face the overhang
    adds in quadrature, and inside the FODR the value keeps decreasing with
    penetration depth.  With several facets the smallest clearance is used.
    Returns shape ``points.shape[:-1]``.
    """
    p = np.asarray(points, dtype=float)
    shape = p.shape[:-1]
    p = p.reshape(-1, 2)
    target = fodr.shape if fodr is not None else obs.shape
    inside = np.max(p @ target.normals.T - target.offsets, axis=1) <= 0.0
    best = np.full(len(p), np.inf)
    for patch in _patches(obs, fodr):
        ab = patch.b - patch.a
        ap = p - patch.a
        denom = float(ab @ ab)
        t = np.zeros(len(p)) if denom == 0.0 else np.clip(ap @ ab / denom, 0.0, 1.0)
        d = np.hypot(*(ap - t[:, None] * ab).T)
        d = np.where(inside, p @ patch.normal - patch.support, d)
        best = np.minimum(best, d - patch.inset)
    return best.reshape(shape)


def contact_force(bb, obs: ElasticObstacle, r: float, fodr: Fodr | None = None) -> ContactForceReading:
    """Largest contact force any backbone sample exerts on ``obs``."""
    bb = np.asarray(bb, dtype=float)
    if bb.ndim != 2 or len(bb) == 0:
        raise ValueError("backbone must be a non-empty (m, 2) array")
    if fodr is None:
        fodr = _fodr_or_none(obs)
    n = facet_clearance(bb, obs, fodr)
    k = int(np.argmin(n))
    depth = r - float(n[k])
    return ContactForceReading(
        obs.name,
        float(obs.force(depth)),
        k,
        float(obs.psi(depth)),
        float(n[k]),
    )


def contact_forces_batch(B, obs: ElasticObstacle, r: float, fodr: Fodr | None = None):
    """Forces for a stack of backbones ``(m, P, 2)``; returns ``(force, index)``."""
    B = np.asarray(B, dtype=float)
    if fodr is None:
        fodr = _fodr_or_none(obs)
    n = facet_clearance(B, obs, fodr)
    idx = np.argmin(n, axis=1)
    depth = r - n[np.arange(len(n)), idx]
    return obs.force(depth), idx


def _fodr_or_none(obs: ElasticObstacle) -> Fodr | None:
    try:
        return build_fodr(obs)
    except ObstacleConsumed:
        return None


def force_safe_by_threshold(reading: ContactForceReading, f_max: float) -> bool:
    return reading.force < f_max


@dataclass(frozen=True)
class Scene:
    """Robot-independent obstacle set with its FODRs precomputed."""

    obstacles: tuple[ElasticObstacle, ...]
    fodrs: tuple[Fodr, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "fodrs", tuple(build_fodr(o) for o in self.obstacles))

    def forces(self, B, r: float) -> np.ndarray:
        """Per-obstacle max force for backbones ``(m, P, 2)`` -> ``(m, N)``."""
        B = np.asarray(B, dtype=float)
        if not self.obstacles:
            return np.zeros((len(B), 0))
        return np.stack(
            [contact_forces_batch(B, o, r, f)[0] for o, f in zip(self.obstacles, self.fodrs)], axis=1
        )
