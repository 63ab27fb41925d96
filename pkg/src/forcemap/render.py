"""Deterministic SVG drawings of task-space scenes and C-space maps."""

from __future__ import annotations

import math

import numpy as np

from .cspace import CObsGrid, UnsafeRegionSet
from .forcemodel import Scene
from .geometry2d import approximate_dilation_outline, dilate
from .kinematics import RobotModel, backbone

OBSTACLE_FILL = "#555555"
FODR_FILL = "#bbbbbb"
SAFE = "#2ca02c"
UNSAFE = "#d62728"


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _points(pts) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)


class _TaskCanvas:
    def __init__(self, robot: RobotModel, scene: Scene, px_per_m: float = 1500.0):
        reach = float(robot.lengths.sum()) + robot.thickness
        lo = np.array([-reach, -reach])
        hi = np.array([reach, reach])
        for o in scene.obstacles:
            lo = np.minimum(lo, o.shape.vertices.min(axis=0) - robot.thickness)
            hi = np.maximum(hi, o.shape.vertices.max(axis=0) + robot.thickness)
        self.lo, self.hi, self.s = lo, hi, px_per_m
        self.width = (hi[0] - lo[0]) * px_per_m
        self.height = (hi[1] - lo[1]) * px_per_m

    def map(self, pts):
        pts = np.atleast_2d(pts)
        x = (pts[:, 0] - self.lo[0]) * self.s
        y = (self.hi[1] - pts[:, 1]) * self.s
        return np.stack([x, y], axis=1)


def _scene_layer(c: _TaskCanvas, robot: RobotModel, scene: Scene) -> list[str]:
    out = []
    grown = dilate([f.shape for f in scene.fodrs], robot.thickness)
    for outline in approximate_dilation_outline(grown, robot.thickness * 0.01):
        out.append(
            f'<polygon points="{_points(c.map(outline.vertices))}" fill="none" '
            'stroke="#888888" stroke-dasharray="4 3" stroke-width="1"/>'
        )
    for o, f in zip(scene.obstacles, scene.fodrs):
        out.append(f'<polygon points="{_points(c.map(o.shape.vertices))}" fill="{OBSTACLE_FILL}"/>')
        out.append(f'<polygon points="{_points(c.map(f.shape.vertices))}" fill="{FODR_FILL}"/>')
    base = c.map([[0.0, 0.0]])[0]
    out.append(f'<circle cx="{_f(base[0])}" cy="{_f(base[1])}" r="4" fill="#000000"/>')
    return out


def _robot_path(c: _TaskCanvas, robot: RobotModel, q, colour: str) -> str:
    pts = c.map(backbone(q, robot))
    return (
        f'<polyline points="{_points(pts)}" fill="none" stroke="{colour}" '
        f'stroke-opacity="0.6" stroke-linecap="round" stroke-width="{_f(2 * robot.thickness * c.s)}"/>'
    )


def _document(width: float, height: float, body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}">\n'
        '<rect width="100%" height="100%" fill="#ffffff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def render_task(robot: RobotModel, scene: Scene, q=None, unsafe: bool | None = None) -> str:
    """Obstacles (dark), FODRs (light), grown outline (dashed), optional robot pose."""
    c = _TaskCanvas(robot, scene)
    body = _scene_layer(c, robot, scene)
    if q is not None:
        body.append(_robot_path(c, robot, q, UNSAFE if unsafe else SAFE))
    return _document(c.width, c.height, body)


def render_timelapse(robot: RobotModel, scene: Scene, records) -> str:
    """One ``<g class="frame">`` per record; only the first is displayed."""
    c = _TaskCanvas(robot, scene)
    body = _scene_layer(c, robot, scene)
    for k, r in enumerate(records):
        colour = UNSAFE if r.chi_fast else SAFE
        hidden = "" if k == 0 else ' display="none"'
        body.append(
            f'<g class="frame" id="frame-{k:05d}" data-t="{r.t:.4f}"{hidden}>'
            + _robot_path(c, robot, r.q, colour)
            + "</g>"
        )
    return _document(c.width, c.height, body)


def render_cspace(cobs: CObsGrid, regions: UnsafeRegionSet, cell_px: float = 2.0, trajectory=None) -> str:
    """C_obs raster (black = unsafe) with alpha-shape outlines; q1 across, q2 up."""
    n1, n2 = cobs.dims
    w, h = n1 * cell_px, n2 * cell_px
    lo1, lo2 = cobs.grid.lower
    d1, d2 = cobs.grid.resolution
    body = []
    bits = cobs.bits
    # one rect per vertical run of unsafe cells keeps the file small
    for i in range(n1):
        col = bits[i]
        if not col.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], col.astype(np.int8), [0]])))
        for start, stop in zip(edges[::2], edges[1::2]):
            y = h - stop * cell_px
            body.append(
                f'<rect x="{_f(i * cell_px)}" y="{_f(y)}" width="{_f(cell_px)}" '
                f'height="{_f((stop - start) * cell_px)}" fill="#000000"/>'
            )

    def to_px(q):
        q = np.atleast_2d(q)
        x = ((q[:, 0] - lo1) / d1 + 0.5) * cell_px
        y = h - ((q[:, 1] - lo2) / d2 + 0.5) * cell_px
        return np.stack([x, y], axis=1)

    for poly, alpha in zip(regions.polygons, regions.alphas):
        a = "inf" if math.isinf(alpha) else f"{math.degrees(alpha):.4f}"
        body.append(
            f'<polygon points="{_points(to_px(poly.vertices))}" fill="{UNSAFE}" fill-opacity="0.35" '
            f'stroke="{UNSAFE}" stroke-width="1" data-alpha-deg="{a}"/>'
        )
    if trajectory is not None and len(trajectory):
        body.append(
            f'<polyline points="{_points(to_px(np.asarray(trajectory)[:, :2]))}" fill="none" '
            'stroke="#1f77b4" stroke-width="1"/>'
        )
    return _document(w, h, body)
