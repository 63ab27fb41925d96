"""Open-loop sinusoidal simulation with per-step safety classification."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cspace import UnsafeRegionSet, chi_exact
from .forcemodel import ContactForceReading, Scene, contact_forces_batch
from .geometry2d import dilate
from .kinematics import RobotModel, backbone_batch

DEFAULT_FREQUENCY = 0.0071
DEFAULT_DT = 1.0 / 12.8


class MapMissing(RuntimeError):
    """The simulation needs a built or loaded unsafe-region map."""


@dataclass(frozen=True)
class TrajectorySpec:
    amplitude: tuple[float, ...] = (math.radians(30.0), math.radians(30.0))
    frequency: float = DEFAULT_FREQUENCY
    phase: tuple[float, ...] = (0.0, math.pi / 2)
    duration: float | None = None
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if len(self.amplitude) != len(self.phase):
            raise ValueError("amplitude and phase need one entry per joint")
        if self.duration is None:
            object.__setattr__(self, "duration", 1.0 / self.frequency)
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def n_steps(self) -> int:
        # a zero duration is an empty run, not a single sample
        if self.duration == 0:
            return 0
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1


def sinusoid_trajectory(spec: TrajectorySpec) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``q_j(t) = A_j sin(2 pi f t + phi_j)``; returns ``(t, Q)``."""
    t = np.arange(spec.n_steps) * spec.dt
    A = np.asarray(spec.amplitude, dtype=float)
    ph = np.asarray(spec.phase, dtype=float)
    Q = A[None, :] * np.sin(2 * np.pi * spec.frequency * t[:, None] + ph[None, :])
    return t, Q


@dataclass(frozen=True)
class SimRecord:
    t: float
    q: tuple[float, ...]
    chi_fast: int
    chi_exact: int
    forces: tuple[ContactForceReading, ...]
    chi_obstacles: tuple[int, ...] = ()

    @property
    def max_force(self) -> float:
        return max((f.force for f in self.forces), default=0.0)


def run_simulation(
    scene: Scene, robot: RobotModel, spec: TrajectorySpec, regions: UnsafeRegionSet | None
) -> list[SimRecord]:
    if regions is None:
        raise MapMissing("build or load a map before simulating")
    t, Q = sinusoid_trajectory(spec)
    if len(t) == 0:
        return []
    if Q.shape[1] != robot.n_segments:
        raise ValueError("trajectory joint count does not match the robot")
    region = dilate([f.shape for f in scene.fodrs], robot.thickness)
    exact = chi_exact(Q, robot, region)
    # per-obstacle ground truth, so confusion counts compare like with like
    own = [chi_exact(Q, robot, dilate([f.shape], robot.thickness)) for f in scene.fodrs]
    B = backbone_batch(Q, robot)
    per_obs = [
        contact_forces_batch(B, o, robot.thickness, f) for o, f in zip(scene.obstacles, scene.fodrs)
    ]
    records = []
    for k in range(len(t)):
        readings = []
        for o, (force, idx) in zip(scene.obstacles, per_obs):
            raw = float(force[k]) / o.delta
            readings.append(ContactForceReading(o.name, float(force[k]), int(idx[k]), raw))
        q = tuple(float(v) for v in Q[k])
        records.append(
            SimRecord(
                float(t[k]),
                q,
                int(regions.contains(*q[:2])),
                int(exact[k]),
                tuple(readings),
                tuple(int(c[k]) for c in own),
            )
        )
    return records


@dataclass(frozen=True)
class ObstacleCounts:
    """Confusion counts of one indicator against ``force >= F_max``.

    ``hit``: flagged and over threshold; ``false_alarm``: flagged, under;
    ``miss``: not flagged, over; ``clear``: neither.
    """

    hit: int = 0
    false_alarm: int = 0
    miss: int = 0
    clear: int = 0
    false_alarm_in_margin: int = 0

    @property
    def total(self) -> int:
        return self.hit + self.false_alarm + self.miss + self.clear


@dataclass(frozen=True)
class SimSummary:
    steps: int
    fast: dict[str, ObstacleCounts]
    exact: dict[str, ObstacleCounts]
    max_force: dict[str, float]
    transitions: dict[str, tuple[int, int]]
    unsafe_time_fraction: float
    soundness_violations: int
    fast_misses: int
    fast_exact_disagreements: int = 0
    extra: dict = field(default_factory=dict)


def _counts(flag: np.ndarray, over: np.ndarray, force: np.ndarray, lo: float, hi: float) -> ObstacleCounts:
    fa = flag & ~over
    return ObstacleCounts(
        hit=int(np.sum(flag & over)),
        false_alarm=int(np.sum(fa)),
        miss=int(np.sum(~flag & over)),
        clear=int(np.sum(~flag & ~over)),
        false_alarm_in_margin=int(np.sum(fa & (force >= lo) & (force < hi))),
    )


def transitions(unsafe: np.ndarray) -> tuple[int, int]:
    """``(safe->unsafe, unsafe->safe)`` edge counts of a boolean trace."""
    u = np.asarray(unsafe, dtype=bool)
    return int(np.sum(~u[:-1] & u[1:])), int(np.sum(u[:-1] & ~u[1:]))


def summarize(records: list[SimRecord], scene: Scene) -> SimSummary:
    """Confusion counts per obstacle.

    ``fast`` compares the global polygon verdict with each obstacle's force
    test; ``exact`` uses that obstacle's own backbone test when the records
    carry it.
    """
    if not records:
        raise ValueError("cannot summarize an empty run")
    fast = np.array([r.chi_fast for r in records], dtype=bool)
    exact = np.array([r.chi_exact for r in records], dtype=bool)
    F = np.array([[f.force for f in r.forces] for r in records]).reshape(len(records), -1)
    fast_c, exact_c, fmax, trans = {}, {}, {}, {}
    any_over = np.zeros(len(records), dtype=bool)
    for j, o in enumerate(scene.obstacles):
        over = F[:, j] >= o.f_max
        any_over |= over
        lo, hi = o.delta * o.f_max, o.f_max
        fast_c[o.name] = _counts(fast, over, F[:, j], lo, hi)
        own = np.array([r.chi_obstacles[j] if r.chi_obstacles else r.chi_exact for r in records], dtype=bool)
        exact_c[o.name] = _counts(own, over, F[:, j], lo, hi)
        fmax[o.name] = float(F[:, j].max())
        trans[o.name] = transitions(over)
    return SimSummary(
        steps=len(records),
        fast=fast_c,
        exact=exact_c,
        max_force=fmax,
        transitions=trans,
        unsafe_time_fraction=float(fast.mean()),
        soundness_violations=int(np.sum(~exact & any_over)),
        fast_misses=int(np.sum(~fast & any_over)),
        fast_exact_disagreements=int(np.sum(fast != exact)),
    )


def csv_header(scene: Scene) -> list[str]:
    cols = ["t", "q1_deg", "q2_deg", "chi_fast", "chi_exact"]
    return cols + [f"force_obs{j + 1}_N" for j in range(len(scene.obstacles))]


def records_to_csv(records: list[SimRecord], scene: Scene) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(scene))
    for r in records:
        row = [f"{r.t:.6f}"] + [f"{math.degrees(v):.6f}" for v in r.q[:2]]
        row += [r.chi_fast, r.chi_exact] + [f"{f.force:.9f}" for f in r.forces]
        w.writerow(row)
    return buf.getvalue()
