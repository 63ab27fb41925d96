"""Desk-scale acceptance checks.

Each check returns a ``CheckResult``; ``run_checks`` is what the ``selftest``
subcommand and ``tests/test_acceptance.py`` drive.  The brute-force
full-body oracle used for the Minkowski check lives here and shares no code
with the dilated-region predicate it audits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cspace import audit_grid, chi_exact, chi_fast
from .estimator import ForceSafetyMap
from .forcemodel import ElasticObstacle, Scene, max_deflection
from .geometry2d import ConvexPolygon, convex_hull, dilate
from .kinematics import RobotModel, backbone, backbone_batch
from .scenefile import SceneConfig, load_example_scene
from .simharness import TrajectorySpec, records_to_csv, run_simulation, summarize

REF_F_MAX = 0.105
REF_K_ENV = 11.16
REF_DELTA = 0.95
REF_LENGTH = 0.122
LATENCY_CEILING_S = 223e-6
LATENCY_SOFT_S = 5e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_fodr_inset() -> CheckResult:
    n = max_deflection(REF_F_MAX, REF_DELTA, REF_K_ENV)
    # 0.105 / (0.95 * 11.16) = 0.105 / 10.602
    expected = 0.009904
    ok = abs(n - expected) <= 1e-6
    return CheckResult("1 fodr-inset", ok, f"n_max={n:.7f} m vs {expected} (tol 1e-6)", data={"n_max": n})


def soundness_sweep(model: ForceSafetyMap, chunk: int = 2048):
    """Count grid nodes with chi_exact = 0 but some obstacle force >= F_max."""
    cfg = model.config_
    robot, scene = cfg.robot, cfg.scene
    nodes = cfg.grid.all_nodes()
    fmax = np.array([o.f_max for o in scene.obstacles])
    violations = 0
    worst = 0.0
    for s in range(0, len(nodes), chunk):
        Q = nodes[s : s + chunk]
        B = backbone_batch(Q, robot)
        m, P, _ = B.shape
        inside = model.region_.contains_points(B.reshape(-1, 2)).reshape(m, P).any(axis=1)
        F = scene.forces(B, robot.thickness)
        safe = ~inside
        if len(fmax):
            bad = safe & np.any(F >= fmax, axis=1)
            violations += int(bad.sum())
            if safe.any():
                worst = max(worst, float(np.max(F[safe] / fmax)))
        # the stored grid must agree with this independent re-evaluation
        stored = model.cobs_.bits.reshape(-1)[s : s + chunk]
        if not np.array_equal(stored, inside):
            raise AssertionError("grid labels differ from chi_exact re-evaluation")
    return violations, worst, len(nodes)


@_timed
def check_soundness(model: ForceSafetyMap) -> CheckResult:
    violations, worst, n = soundness_sweep(model)
    return CheckResult(
        "2 soundness-sweep",
        violations == 0,
        f"{violations} violations over {n} nodes; max force/F_max on safe nodes = {worst:.4f}",
        data={"violations": violations, "worst_ratio": worst, "nodes": n},
    )


@_timed
def check_latency(model: ForceSafetyMap, n: int = 1_000_000, seed: int = 0) -> CheckResult:
    robot = model.config_.robot
    lim = robot.limits
    rng = np.random.default_rng(seed)
    Q = rng.uniform(lim[:, 0], lim[:, 1], size=(n, 2))
    qs = [(float(a), float(b)) for a, b in Q]
    regions = model.regions_
    t0 = time.perf_counter()
    hits = 0
    for q in qs:
        hits += chi_fast(q, regions)
    mean = (time.perf_counter() - t0) / n
    ok = mean <= LATENCY_CEILING_S
    soft = "met" if mean <= LATENCY_SOFT_S else "missed"
    return CheckResult(
        "3 query-latency",
        ok,
        f"mean {mean * 1e6:.3f} us over {n} queries (ceiling 223 us; soft 5 us {soft}); {hits} unsafe",
        data={"mean_s": mean, "soft_met": mean <= LATENCY_SOFT_S},
    )


@_timed
def check_reconstruction(model: ForceSafetyMap) -> CheckResult:
    audit = audit_grid(model.regions_, model.cobs_)
    ok = audit.agreement >= 0.99 and audit.max_boundary_distance <= 1
    return CheckResult(
        "4 reconstruction-fidelity",
        ok,
        f"agreement {audit.agreement * 100:.4f}% ({len(audit.disagreements)} nodes differ, "
        f"max distance to a boundary cell {audit.max_boundary_distance})",
        data={"agreement": audit.agreement, "max_boundary_distance": audit.max_boundary_distance},
    )


def random_convex_obstacle(rng: np.random.Generator, reach: float) -> ConvexPolygon:
    """Random convex polygon 3-8 cm across, centred within the arm's reach."""
    while True:
        radius = rng.uniform(0.03, 0.08)
        ang = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(0.05, reach)
        centre = dist * np.array([np.sin(ang), np.cos(ang)])
        pts = centre + rng.uniform(-radius / 2, radius / 2, size=(8, 2))
        hull = convex_hull(pts)
        try:
            return ConvexPolygon(hull)
        except ValueError:
            continue


def brute_force_body_hits(Q, robot: RobotModel, fodrs, n_boundary: int = 64) -> np.ndarray:
    """Full-body test: disk samples (centre + ring) inside a FODR, or a FODR corner inside a disk."""
    ang = 2 * np.pi * np.arange(n_boundary) / n_boundary
    ring = robot.thickness * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ring = np.vstack([[0.0, 0.0], ring])
    out = np.zeros(len(Q), dtype=bool)
    r2 = robot.thickness**2
    for k, q in enumerate(Q):
        centres = backbone(q, robot)
        samples = (centres[:, None, :] + ring[None, :, :]).reshape(-1, 2)
        for poly in fodrs:
            # polygon corners poking into a disk fall between ring samples
            gap = poly.vertices[:, None, :] - centres[None, :, :]
            if np.any(np.sum(gap * gap, axis=-1) <= r2):
                out[k] = True
                break
            lo = poly.vertices.min(axis=0)
            hi = poly.vertices.max(axis=0)
            box = np.all((samples >= lo) & (samples <= hi), axis=1)
            if not box.any():
                continue
            cand = samples[box]
            a = poly.vertices
            b = np.roll(a, -1, axis=0)
            e = b - a
            # inside a CCW convex polygon: left of (or on) every edge
            cr = e[None, :, 0] * (cand[:, None, 1] - a[None, :, 1]) - e[None, :, 1] * (
                cand[:, None, 0] - a[None, :, 0]
            )
            if np.any(np.all(cr >= 0.0, axis=1)):
                out[k] = True
                break
    return out


@_timed
def check_minkowski_oracle(
    n_scenes: int = 10, n_configs: int = 1000, seed: int = 7, band: float = 1e-6
) -> CheckResult:
    rng = np.random.default_rng(seed)
    robot = RobotModel.uniform(2, REF_LENGTH, 0.02, 150)
    reach = float(robot.lengths.sum())
    total = agree = skipped = 0
    for _ in range(n_scenes):
        obstacles = []
        for j in range(int(rng.integers(1, 3))):
            for _attempt in range(50):
                obs = ElasticObstacle(
                    random_convex_obstacle(rng, reach),
                    k_env=rng.uniform(5.0, 20.0),
                    f_max=rng.uniform(0.05, 0.15),
                    delta=rng.uniform(0.8, 1.0),
                    name=f"r{j}",
                )
                try:
                    Scene((obs,))
                except ValueError:
                    continue
                obstacles.append(obs)
                break
        scene = Scene(tuple(obstacles))
        fodrs = [f.shape for f in scene.fodrs]
        region = dilate(fodrs, robot.thickness)
        Q = rng.uniform(-np.pi, np.pi, size=(n_configs, 2))
        exact = chi_exact(Q, robot, region).astype(bool)
        brute = brute_force_body_hits(Q, robot, fodrs)
        B = backbone_batch(Q, robot)
        dist = region.distance(B.reshape(-1, 2)).reshape(len(Q), -1).min(axis=1)
        keep = np.abs(dist - robot.thickness) > band
        skipped += int((~keep).sum())
        total += int(keep.sum())
        agree += int(np.sum(exact[keep] == brute[keep]))
    ok = agree == total
    return CheckResult(
        "5 minkowski-oracle",
        ok,
        f"{agree}/{total} agree off the {band:g} m band ({skipped} in band)",
        data={"agree": agree, "total": total},
    )


@_timed
def check_kinematics() -> CheckResult:
    robot = RobotModel.uniform(1, REF_LENGTH, 0.02, 150)
    worst = 0.0
    for q in np.radians([0.0, 30.0, 90.0, 180.0, -120.0]):
        pts = backbone([q], robot)
        chord = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        worst = max(worst, abs(chord - REF_LENGTH) / REF_LENGTH)
    tip = backbone([np.pi], robot)[-1]
    tip_err = float(np.hypot(tip[0] - 2 * REF_LENGTH / np.pi, tip[1]))
    ok = worst <= 1e-3 and tip_err <= 1e-9
    return CheckResult(
        "6 kinematics",
        ok,
        f"max chord-sum error {worst * 100:.5f}% (tol 0.1%); half-circle tip error {tip_err:.2e} m (tol 1e-9)",
        data={"chord_error": worst, "tip_error": tip_err},
    )


@_timed
def check_simulation(cfg: SceneConfig, model: ForceSafetyMap) -> CheckResult:
    spec = TrajectorySpec()
    recs = run_simulation(cfg.scene, cfg.robot, spec, model.regions_)
    summ = summarize(recs, cfg.scene)
    csv1 = records_to_csv(recs, cfg.scene)
    csv2 = records_to_csv(run_simulation(cfg.scene, cfg.robot, spec, model.regions_), cfg.scene)
    trans_ok = all(up >= 2 and down >= 2 for up, down in summ.transitions.values())
    ok = trans_ok and summ.soundness_violations == 0 and csv1 == csv2
    tr = ", ".join(f"{k}: {u} up/{d} down" for k, (u, d) in summ.transitions.items())
    return CheckResult(
        "7 simulation-regression",
        ok,
        f"{summ.steps} steps over {spec.duration:.2f} s; transitions [{tr}]; "
        f"{summ.soundness_violations} soundness violations; csv deterministic={csv1 == csv2}",
        data={"summary": summ},
    )


def check_hardware_note() -> CheckResult:
    return CheckResult(
        "8 hardware-substitution",
        True,
        "physical force measurements are out of scope; covered by checks 2, 5 and 7",
    )


def run_checks(quick: bool = False, log=print) -> list[CheckResult]:
    """Run every criterion; ``quick`` shrinks the sampled checks for ``selftest``."""
    results = []

    def emit(res):
        results.append(res)
        log(res.line())

    emit(check_fodr_inset())
    emit(check_kinematics())
    cfg = load_example_scene()
    t0 = time.perf_counter()
    model = ForceSafetyMap(cfg).fit()
    log(f"info map build {time.perf_counter() - t0:.2f}s dims={model.cobs_.dims}")
    emit(check_soundness(model))
    emit(check_latency(model, n=20_000 if quick else 1_000_000))
    emit(check_reconstruction(model))
    emit(check_minkowski_oracle(n_scenes=3 if quick else 10, n_configs=100 if quick else 1000))
    emit(check_simulation(cfg, model))
    emit(check_hardware_note())
    return results


__all__ = ["CheckResult", "run_checks"]
