"""Planar piecewise-constant-curvature forward kinematics.

Frame convention: each segment starts at its local origin heading along
local +y.  A positive bend angle curves the segment toward local +x, so a
point at arc length ``s`` sits at ``(R (1 - cos(k s)), R sin(k s))`` with
``k = q / L`` and ``R = 1 / k``.  The heading at the tip is rotated by ``q``
clockwise (toward +x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Q_STRAIGHT = 1e-6


@dataclass(frozen=True)
class SegmentSpec:
    arc_length: float
    joint_limits: tuple[float, float] = (-math.pi, math.pi)

    def __post_init__(self):
        if not self.arc_length > 0:
            raise ValueError("segment arc length must be positive")
        lo, hi = self.joint_limits
        if not lo < hi:
            raise ValueError("joint limits must satisfy q_min < q_max")


@dataclass(frozen=True)
class RobotModel:
    """n-segment planar PCC manipulator with body radius ``thickness``."""

    segments: tuple[SegmentSpec, ...]
    thickness: float
    backbone_samples: int = 150
    _s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) < 1:
            raise ValueError("robot needs at least one segment")
        if not self.thickness > 0:
            raise ValueError("thickness must be positive")
        if self.backbone_samples < 2:
            raise ValueError("need at least two backbone samples per segment")
        s = np.linspace(0.0, 1.0, self.backbone_samples)
        s.setflags(write=False)
        object.__setattr__(self, "_s", s)

    @classmethod
    def uniform(cls, n: int, arc_length: float, thickness: float, backbone_samples: int = 150,
                joint_limits=(-math.pi, math.pi)) -> "RobotModel":
        seg = SegmentSpec(arc_length, tuple(joint_limits))
        return cls(tuple([seg] * n), thickness, backbone_samples)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([seg.arc_length for seg in self.segments])

    @property
    def limits(self) -> np.ndarray:
        return np.array([seg.joint_limits for seg in self.segments], dtype=float)

    def within_limits(self, q, tol: float = 1e-12) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        lim = self.limits
        return np.all((q >= lim[:, 0] - tol) & (q <= lim[:, 1] + tol), axis=1)


def _arc_xy(q, L, s):
    """Local arc coordinates, broadcasting over ``q`` and ``s``."""
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    q_b, s_b = np.broadcast_arrays(q, s)
    straight = np.abs(q_b) < Q_STRAIGHT
    k = np.where(straight, 1.0, q_b) / L
    ks = k * s_b
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 - cos written as 2 sin^2 to keep precision for small bends
        x_arc = 2.0 * np.sin(0.5 * ks) ** 2 / k
        y_arc = np.sin(ks) / k
    x_lin = q_b * s_b * s_b / (2.0 * L)
    y_lin = s_b - (q_b / L) ** 2 * s_b ** 3 / 6.0
    x = np.where(straight, x_lin, x_arc)
    y = np.where(straight, y_lin, y_arc)
    return x, y


def segment_point(q_i: float, L_i: float, s: float) -> np.ndarray:
    """Position at arc length ``s`` on one segment, in the segment frame."""
    if not L_i > 0:
        raise ValueError("arc length must be positive")
    if not -1e-12 <= s <= L_i + 1e-12:
        raise ValueError("s must lie in [0, L_i]")
    x, y = _arc_xy(q_i, L_i, s)
    return np.array([float(x), float(y)])


def rotation(theta):
    """Heading rotation by ``theta`` toward +x (clockwise in the usual sense)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class Transform2D:
    """Rigid planar pose: ``x_parent = R @ x_local + t``."""

    angle: float
    translation: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(3)
        T[:2, :2] = rotation(self.angle)
        T[:2, 2] = self.translation
        return T

    def __matmul__(self, other: "Transform2D") -> "Transform2D":
        R = rotation(self.angle)
        return Transform2D(self.angle + other.angle, R @ other.translation + self.translation)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ rotation(self.angle).T + self.translation


IDENTITY = Transform2D(0.0, np.zeros(2))


def segment_transform(q_i: float, L_i: float) -> Transform2D:
    """Pose of a segment's tip frame in its base frame."""
    if not L_i > 0:
        raise ValueError("arc length must be positive")
    return Transform2D(float(q_i), segment_point(q_i, L_i, L_i))


def backbone(config, robot: RobotModel) -> np.ndarray:
    """Backbone samples, shape ``(n * N_s, 2)``, base at the origin."""
    q = np.asarray(config, dtype=float).reshape(1, -1)
    if q.shape[1] != robot.n_segments:
        raise ValueError(f"expected {robot.n_segments} joint angles, got {q.shape[1]}")
    return backbone_batch(q, robot)[0]


def backbone_batch(Q, robot: RobotModel) -> np.ndarray:
    """Vectorised backbone for many configurations, shape ``(m, n * N_s, 2)``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m, n = Q.shape
    if n != robot.n_segments:
        raise ValueError(f"expected {robot.n_segments} joint angles per row, got {n}")
    Ns = robot.backbone_samples
    out = np.empty((m, n * Ns, 2))
    heading = np.zeros(m)
    base = np.zeros((m, 2))
    for i, seg in enumerate(robot.segments):
        L = seg.arc_length
        s = robot._s * L
        x, y = _arc_xy(Q[:, i : i + 1], L, s[None, :])
        c = np.cos(heading)[:, None]
        sn = np.sin(heading)[:, None]
        # world = R(heading) @ local, R = [[c, s], [-s, c]]
        out[:, i * Ns : (i + 1) * Ns, 0] = base[:, 0:1] + c * x + sn * y
        out[:, i * Ns : (i + 1) * Ns, 1] = base[:, 1:2] - sn * x + c * y
        base = out[:, (i + 1) * Ns - 1, :].copy()
        heading = heading + Q[:, i]
    return out


def tip_pose(config, robot: RobotModel) -> Transform2D:
    T = IDENTITY
    for q_i, seg in zip(np.asarray(config, dtype=float), robot.segments):
        T = T @ segment_transform(q_i, seg.arc_length)
    return T
