"""``forcemap`` command line.

Exit codes: 0 ok, 1 scene schema error, 2 obstacle consumed by its inset,
3 write failure, 4 configuration outside joint limits, 5 stale map (scene
hash mismatch).  Result lines on stdout are ``key=value``.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .cspace import build_cobs, build_unsafe_set, chi_exact, connected_components
from .forcemodel import ObstacleConsumed, contact_force
from .geometry2d import dilate
from .kinematics import backbone
from .render import render_cspace, render_task, render_timelapse
from .scenefile import (
    MapFormatError,
    SceneError,
    StaleMap,
    load_scene,
    read_map,
    scene_from_document,
    write_map,
)
from .simharness import (
    DEFAULT_DT,
    DEFAULT_FREQUENCY,
    MapMissing,
    TrajectorySpec,
    records_to_csv,
    run_simulation,
    summarize,
)

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_CONSUMED = 2
EXIT_WRITE = 3
EXIT_LIMITS = 4
EXIT_STALE = 5

log = logging.getLogger("forcemap")


def _out(**kv):
    for k, v in kv.items():
        print(f"{k}={v}")


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def _load_scene(path):
    try:
        return load_scene(path), None
    except OSError as exc:
        _err(f"cannot read scene: {exc}")
        return None, EXIT_SCHEMA
    except SceneError as exc:
        _err(f"scene schema: {exc}")
        return None, EXIT_SCHEMA
    except ObstacleConsumed as exc:
        _err(str(exc))
        _out(consumed_obstacle=exc.obstacle_id)
        return None, EXIT_CONSUMED


def _load_map(path):
    try:
        return read_map(path), None
    except (OSError, MapFormatError) as exc:
        _err(f"cannot load map: {exc}")
        return None, EXIT_SCHEMA


def cmd_build(args) -> int:
    cfg, code = _load_scene(args.scene)
    if cfg is None:
        return code
    t0 = time.perf_counter()
    region = dilate([f.shape for f in cfg.scene.fodrs], cfg.robot.thickness)
    cobs = build_cobs(cfg.robot, region, cfg.grid, workers=args.threads)
    t_grid = time.perf_counter() - t0
    regions = build_unsafe_set(cobs, cfg.c_alpha, cfg.margin_cells)
    elapsed = time.perf_counter() - t0
    try:
        write_map(args.out, cfg, cobs, regions)
    except OSError as exc:
        _err(f"cannot write map: {exc}")
        return EXIT_WRITE
    _out(
        map=args.out,
        dims="x".join(map(str, cobs.dims)),
        grid_time_s=f"{t_grid:.3f}",
        build_time_s=f"{elapsed:.3f}",
        unsafe_fraction=f"{cobs.unsafe_fraction:.6f}",
        components=len(regions),
    )
    for k, (a, n) in enumerate(zip(regions.alphas, regions.source_components)):
        a_deg = "inf" if math.isinf(a) else f"{math.degrees(a):.4f}"
        print(f"component_{k}_alpha_deg={a_deg} component_{k}_points={n}")
    return EXIT_OK


def _map_scene(mp, scene_path):
    """Scene embedded in the map, checked against ``scene_path`` when given."""
    cfg = scene_from_document(mp.scene_document)
    if scene_path is not None:
        given, code = _load_scene(scene_path)
        if given is None:
            return None, code
        try:
            mp.check_scene(given)
        except StaleMap as exc:
            _err(str(exc))
            return None, EXIT_STALE
    return cfg, None


def cmd_query(args) -> int:
    mp, code = _load_map(args.map)
    if mp is None:
        return code
    cfg, code = _map_scene(mp, args.scene)
    if cfg is None:
        return code
    q = np.radians([args.q1_deg, args.q2_deg])
    if not cfg.robot.within_limits(q)[0]:
        _err(f"configuration ({args.q1_deg}, {args.q2_deg}) deg is outside the joint limits")
        return EXIT_LIMITS
    fast = int(mp.regions.contains(float(q[0]), float(q[1])))
    _out(verdict="UNSAFE" if fast else "SAFE", chi_fast=fast)
    if args.exact:
        region = dilate([f.shape for f in cfg.scene.fodrs], cfg.robot.thickness)
        exact = chi_exact(q, cfg.robot, region)
        _out(exact_verdict="UNSAFE" if exact else "SAFE", chi_exact=exact)
        bb = backbone(q, cfg.robot)
        for j, (o, f) in enumerate(zip(cfg.scene.obstacles, cfg.scene.fodrs)):
            reading = contact_force(bb, o, cfg.robot.thickness, f)
            print(f"force_obs{j + 1}_N={reading.force:.9f} force_obs{j + 1}_over={int(reading.force >= o.f_max)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, code = _load_scene(args.scene)
    if cfg is None:
        return code
    mp, code = _load_map(args.map)
    if mp is None:
        return code
    try:
        mp.check_scene(cfg)
    except StaleMap as exc:
        _err(str(exc))
        return EXIT_STALE
    n = cfg.robot.n_segments
    amp = args.amplitude_deg if args.amplitude_deg else [30.0] * n
    phase = args.phase_deg if args.phase_deg else [0.0, 90.0][:n] + [0.0] * max(0, n - 2)
    if len(amp) == 1:
        amp = amp * n
    try:
        spec = TrajectorySpec(
            tuple(math.radians(a) for a in amp),
            args.frequency,
            tuple(math.radians(p) for p in phase),
            args.duration,
            args.dt,
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_SCHEMA
    if not cfg.robot.within_limits(np.asarray(spec.amplitude))[0]:
        _err("trajectory amplitude exceeds the joint limits")
        return EXIT_LIMITS
    try:
        records = run_simulation(cfg.scene, cfg.robot, spec, mp.regions)
    except MapMissing as exc:  # pragma: no cover - map was loaded above
        _err(str(exc))
        return EXIT_STALE
    try:
        if args.csv:
            Path(args.csv).write_text(records_to_csv(records, cfg.scene))
        if args.svg:
            Path(args.svg).write_text(render_timelapse(cfg.robot, cfg.scene, records))
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_WRITE
    _out(steps=len(records))
    if records:
        s = summarize(records, cfg.scene)
        _out(
            soundness_violations=s.soundness_violations,
            fast_misses=s.fast_misses,
            fast_exact_disagreements=s.fast_exact_disagreements,
            unsafe_time_fraction=f"{s.unsafe_time_fraction:.6f}",
        )
        for j, o in enumerate(cfg.scene.obstacles):
            up, down = s.transitions[o.name]
            c = s.fast[o.name]
            print(
                f"obs{j + 1}_max_force_N={s.max_force[o.name]:.9f} obs{j + 1}_to_unsafe={up} "
                f"obs{j + 1}_to_safe={down} obs{j + 1}_hit={c.hit} obs{j + 1}_false_alarm={c.false_alarm} "
                f"obs{j + 1}_miss={c.miss} obs{j + 1}_clear={c.clear}"
            )
    return EXIT_OK


def cmd_render(args) -> int:
    mp, code = _load_map(args.map)
    if mp is None:
        return code
    cfg = scene_from_document(mp.scene_document)
    if args.space == "task":
        svg = render_task(cfg.robot, cfg.scene)
    else:
        svg = render_cspace(mp.cobs, mp.regions)
    try:
        Path(args.out).write_text(svg)
    except OSError as exc:
        _err(f"cannot write svg: {exc}")
        return EXIT_WRITE
    _out(svg=args.out, space=args.space, components=len(connected_components(mp.cobs)))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import run_checks

    results = run_checks(quick=not args.full)
    failed = [r.name for r in results if not r.passed]
    _out(checks=len(results), failed=len(failed))
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forcemap", description="Force-safe configuration-space maps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and persist a map from a scene file")
    b.add_argument("scene")
    b.add_argument("out")
    b.add_argument("--threads", type=int, default=1)
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="classify one configuration")
    q.add_argument("map")
    q.add_argument("q1_deg", type=float)
    q.add_argument("q2_deg", type=float)
    q.add_argument("--exact", action="store_true", help="also report backbone ground truth and forces")
    q.add_argument("--scene", help="refuse the map unless it was built from this scene")
    q.set_defaults(func=cmd_query)

    s = sub.add_parser("simulate", help="run the open-loop sinusoid")
    s.add_argument("scene")
    s.add_argument("map")
    s.add_argument("--amplitude-deg", type=float, nargs="+")
    s.add_argument("--phase-deg", type=float, nargs="+")
    s.add_argument("--frequency", type=float, default=DEFAULT_FREQUENCY)
    s.add_argument("--duration", type=float, default=None, help="seconds (default one period)")
    s.add_argument("--dt", type=float, default=DEFAULT_DT)
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("render", help="draw the task-space scene or the C-space map")
    r.add_argument("map")
    r.add_argument("out")
    r.add_argument("--space", choices=("task", "cspace"), default="cspace")
    r.set_defaults(func=cmd_render)

    t = sub.add_parser("selftest", help="run the acceptance checks (reduced sampling unless --full)")
    t.add_argument("--full", action="store_true")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
