"""Scene documents (YAML) and persisted map files."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .cspace import CObsGrid, JointGrid, UnsafeRegionSet
from .forcemodel import ElasticObstacle, Scene
from .geometry2d import ConvexPolygon, GeometryError, SimplePolygon
from .kinematics import RobotModel, SegmentSpec

MAP_MAGIC = b"FORCEMAP\n"
MAP_VERSION = 1

SCENE_SCHEMA = {
    "type": "object",
    "required": ["robot", "obstacles"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "robot": {
            "type": "object",
            "required": ["segment_lengths_m", "thickness_m"],
            "additionalProperties": False,
            "properties": {
                "segment_lengths_m": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "thickness_m": {"type": "number", "exclusiveMinimum": 0},
                "backbone_samples": {"type": "integer", "minimum": 2, "default": 150},
                "joint_limits_deg": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
                },
            },
        },
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["vertices_m", "k_env_N_per_m", "f_max_N"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "vertices_m": {
                        "type": "array",
                        "minItems": 3,
                        "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
                    },
                    "k_env_N_per_m": {"type": "number", "exclusiveMinimum": 0},
                    "f_max_N": {"type": "number", "exclusiveMinimum": 0},
                    "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "contact_facet": {"type": ["integer", "null"], "minimum": 0},
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"resolution_deg": {"type": "number", "exclusiveMinimum": 0}},
        },
        "alpha": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "c_alpha": {"type": "number", "exclusiveMinimum": 0},
                "query_margin_cells": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
    },
}


class SceneError(ValueError):
    """Scene document failed validation."""


class MapFormatError(ValueError):
    pass


class StaleMap(ValueError):
    """Map was built from a different scene."""


@dataclass(frozen=True)
class SceneConfig:
    document: dict
    robot: RobotModel
    scene: Scene
    resolution: float
    c_alpha: float
    margin_cells: float = 0.5

    @property
    def name(self) -> str:
        return self.document.get("name", "scene")

    @property
    def digest(self) -> str:
        return scene_hash(self.document)

    @property
    def grid(self) -> JointGrid:
        return JointGrid.for_robot(self.robot, self.resolution)


def canonical_document(doc: dict) -> dict:
    """Validate and fill defaults so equal scenes hash equally."""
    try:
        jsonschema.validate(doc, SCENE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SceneError(f"{path}: {exc.message}") from None
    doc = copy.deepcopy(doc)
    robot = doc["robot"]
    n = len(robot["segment_lengths_m"])
    robot.setdefault("backbone_samples", 150)
    robot.setdefault("joint_limits_deg", [[-180.0, 180.0]] * n)
    if len(robot["joint_limits_deg"]) != n:
        raise SceneError("robot/joint_limits_deg: need one [min, max] pair per segment")
    for i, obs in enumerate(doc["obstacles"]):
        obs.setdefault("name", f"obs{i + 1}")
        obs.setdefault("delta", 1.0)
        obs.setdefault("contact_facet", None)
    doc.setdefault("grid", {}).setdefault("resolution_deg", 1.0)
    doc.setdefault("alpha", {}).setdefault("c_alpha", 1.5)
    doc["alpha"].setdefault("query_margin_cells", 0.5)
    names = [o["name"] for o in doc["obstacles"]]
    if len(set(names)) != len(names):
        raise SceneError("obstacles: names must be unique")
    return _floats(doc)


def _floats(obj):
    if isinstance(obj, dict):
        return {k: _floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_floats(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    return float(obj)


def scene_hash(doc: dict) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def scene_from_document(doc: dict) -> SceneConfig:
    """Build model objects; raises ``SceneError`` or ``ObstacleConsumed``."""
    doc = canonical_document(doc)
    r = doc["robot"]
    try:
        segs = tuple(
            SegmentSpec(L, (math.radians(lo), math.radians(hi)))
            for L, (lo, hi) in zip(r["segment_lengths_m"], r["joint_limits_deg"])
        )
        robot = RobotModel(segs, r["thickness_m"], r["backbone_samples"])
        obstacles = []
        for o in doc["obstacles"]:
            shape = ConvexPolygon(o["vertices_m"])
            if not np.array_equal(shape.vertices, np.asarray(o["vertices_m"], dtype=float)):
                raise SceneError(f"obstacle {o['name']}: vertices must be listed counter-clockwise")
            obstacles.append(
                ElasticObstacle(
                    shape, o["k_env_N_per_m"], o["f_max_N"], o["delta"], o["contact_facet"], o["name"]
                )
            )
    except (GeometryError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(str(exc)) from None
    res = math.radians(doc["grid"]["resolution_deg"])
    # ObstacleConsumed propagates from here
    scene = Scene(tuple(obstacles))
    cfg = SceneConfig(doc, robot, scene, res, doc["alpha"]["c_alpha"], doc["alpha"]["query_margin_cells"])
    try:
        cfg.grid
    except ValueError as exc:
        raise SceneError(f"grid: {exc}") from None
    return cfg


def load_scene(path) -> SceneConfig:
    try:
        text = Path(path).read_text()
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SceneError(f"not a valid YAML document: {exc}") from None
    if not isinstance(doc, dict):
        raise SceneError("scene must be a mapping")
    return scene_from_document(doc)


def example_scene_path() -> Path:
    return Path(str(resources.files("forcemap") / "scenes" / "twin_plates.yaml"))


def load_example_scene() -> SceneConfig:
    return load_scene(example_scene_path())


@dataclass(frozen=True)
class MapFile:
    header: dict
    cobs: CObsGrid
    regions: UnsafeRegionSet

    @property
    def scene_document(self) -> dict:
        return self.header["scene"]

    @property
    def scene_hash(self) -> str:
        return self.header["scene_hash"]

    def check_scene(self, cfg: SceneConfig):
        if cfg.digest != self.scene_hash:
            raise StaleMap(f"map built for scene {self.scene_hash[:12]}, got {cfg.digest[:12]}")


def encode_map(cfg: SceneConfig, cobs: CObsGrid, regions: UnsafeRegionSet) -> bytes:
    """Serialise deterministically: magic, JSON header, packed bits, float64 vertices."""
    bits = np.packbits(cobs.bits.ravel(order="C"), bitorder="big").tobytes()
    verts = b"".join(np.ascontiguousarray(p.vertices, dtype="<f8").tobytes() for p in regions.polygons)
    header = {
        "version": MAP_VERSION,
        "scene_hash": cfg.digest,
        "scene": cfg.document,
        "dims": list(cobs.dims),
        "grid": {
            "lower": list(cobs.grid.lower),
            "upper": list(cobs.grid.upper),
            "resolution": list(cobs.grid.resolution),
        },
        "resolution_deg": cfg.document["grid"]["resolution_deg"],
        "bits_bytes": len(bits),
        "polygons": [
            {"vertices": len(p), "alpha": _json_float(a), "component_size": int(s)}
            for p, a, s in zip(regions.polygons, regions.alphas, regions.source_components)
        ],
        "cell": regions.cell,
        "margin": regions.margin,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAP_MAGIC + struct.pack("<I", len(hbytes)) + hbytes + bits + verts


def _json_float(a: float):
    return "inf" if math.isinf(a) else a


def decode_map(data: bytes) -> MapFile:
    if not data.startswith(MAP_MAGIC):
        raise MapFormatError("not a force map file")
    off = len(MAP_MAGIC)
    try:
        (hlen,) = struct.unpack_from("<I", data, off)
        off += 4
        header = json.loads(data[off : off + hlen])
        off += hlen
        if header.get("version") != MAP_VERSION:
            raise MapFormatError(f"unsupported map version {header.get('version')}")
        g = header["grid"]
        grid = JointGrid(tuple(g["lower"]), tuple(g["upper"]), tuple(g["resolution"]))
        dims = tuple(header["dims"])
        nb = header["bits_bytes"]
        bits = np.unpackbits(np.frombuffer(data, np.uint8, nb, off), bitorder="big")
        off += nb
        bits = bits[: int(np.prod(dims))].astype(bool).reshape(dims)
        polys, alphas, sizes = [], [], []
        for meta in header["polygons"]:
            k = meta["vertices"]
            v = np.frombuffer(data, "<f8", 2 * k, off).reshape(k, 2)
            off += 16 * k
            polys.append(SimplePolygon(v, validate=False))
            a = meta["alpha"]
            alphas.append(math.inf if a == "inf" else float(a))
            sizes.append(int(meta["component_size"]))
    except (struct.error, ValueError, KeyError) as exc:
        if isinstance(exc, MapFormatError):
            raise
        raise MapFormatError(f"corrupt map file: {exc}") from None
    if off != len(data):
        raise MapFormatError("trailing bytes in map file")
    return MapFile(header, CObsGrid(bits, grid), UnsafeRegionSet(polys, alphas, sizes, header["cell"], header["margin"]))


def write_map(path, cfg: SceneConfig, cobs: CObsGrid, regions: UnsafeRegionSet):
    Path(path).write_bytes(encode_map(cfg, cobs, regions))


def read_map(path) -> MapFile:
    return decode_map(Path(path).read_bytes())
