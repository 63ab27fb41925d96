"""scikit-learn style front end.

``ForceSafetyMap`` is a binary classifier over joint configurations:
``fit`` runs the offline map build for a scene and ``predict`` answers the
real-time polygon query (1 = force-unsafe).  ``ContactForceTransformer``
maps configurations to per-obstacle simulated contact forces.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .cspace import build_cobs, build_unsafe_set, chi_exact
from .forcemodel import Scene
from .geometry2d import dilate
from .kinematics import RobotModel, backbone_batch
from .scenefile import SceneConfig, load_scene, scene_from_document


class OutOfLimits(ValueError):
    """A configuration lies outside the robot's joint limits."""


def resolve_scene(scene) -> SceneConfig:
    """Accept a ``SceneConfig``, a scene document or a path to a YAML file."""
    if isinstance(scene, SceneConfig):
        return scene
    if isinstance(scene, dict):
        return scene_from_document(scene)
    if isinstance(scene, (str, Path)):
        return load_scene(scene)
    raise TypeError(f"cannot interpret {type(scene).__name__} as a scene")


def check_configurations(X, robot: RobotModel, degrees: bool = False) -> np.ndarray:
    """Validate a batch of joint configurations and return radians ``(m, n)``."""
    X = check_array(X, dtype=np.float64, ensure_2d=False)
    X = np.atleast_2d(X)
    if X.shape[1] != robot.n_segments:
        raise ValueError(f"expected {robot.n_segments} joint angles per row, got {X.shape[1]}")
    if degrees:
        X = np.radians(X)
    ok = robot.within_limits(X)
    if not ok.all():
        bad = np.flatnonzero(~ok)[0]
        raise OutOfLimits(f"configuration {np.degrees(X[bad]).round(3).tolist()} deg is outside the joint limits")
    return X


class ForceSafetyMap(ClassifierMixin, BaseEstimator):
    """Force-unsafe configuration classifier backed by a C-space obstacle map.

    Parameters
    ----------
    scene : SceneConfig, dict or path
        Robot and obstacle description.
    resolution_deg : float, optional
        Grid step; defaults to the scene's value.
    c_alpha : float, optional
        Initial alpha-shape scale in grid steps; defaults to the scene's value.
    n_jobs : int
        Worker threads for the grid build.
    degrees : bool
        Interpret ``X`` in degrees instead of radians.
    """

    def __init__(self, scene=None, resolution_deg=None, c_alpha=None, n_jobs=1, degrees=False):
        self.scene = scene
        self.resolution_deg = resolution_deg
        self.c_alpha = c_alpha
        self.n_jobs = n_jobs
        self.degrees = degrees

    def _config(self) -> SceneConfig:
        cfg = resolve_scene(self.scene)
        if self.resolution_deg is None and self.c_alpha is None:
            return cfg
        doc = dict(cfg.document)
        if self.resolution_deg is not None:
            doc["grid"] = {"resolution_deg": float(self.resolution_deg)}
        if self.c_alpha is not None:
            doc["alpha"] = dict(doc["alpha"], c_alpha=float(self.c_alpha))
        return scene_from_document(doc)

    def fit(self, X=None, y=None):
        """Build the grid and the unsafe polygons; ``X`` and ``y`` are ignored."""
        cfg = self._config()
        t0 = time.perf_counter()
        self.config_ = cfg
        self.region_ = dilate([f.shape for f in cfg.scene.fodrs], cfg.robot.thickness)
        self.cobs_ = build_cobs(cfg.robot, self.region_, cfg.grid, workers=self.n_jobs)
        self.regions_ = build_unsafe_set(self.cobs_, cfg.c_alpha, cfg.margin_cells)
        self.build_time_ = time.perf_counter() - t0
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = cfg.robot.n_segments
        return self

    @classmethod
    def from_parts(cls, cfg: SceneConfig, cobs, regions) -> "ForceSafetyMap":
        """Wrap an already built (e.g. loaded) map without rebuilding it."""
        est = cls(scene=cfg)
        est.config_ = cfg
        est.region_ = dilate([f.shape for f in cfg.scene.fodrs], cfg.robot.thickness)
        est.cobs_ = cobs
        est.regions_ = regions
        est.build_time_ = 0.0
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = cfg.robot.n_segments
        return est

    def predict(self, X) -> np.ndarray:
        """Polygon-membership verdict per row (the real-time path)."""
        check_is_fitted(self, "regions_")
        Q = check_configurations(X, self.config_.robot, self.degrees)
        return self.regions_.contains_batch(Q).astype(int)

    def predict_exact(self, X) -> np.ndarray:
        """Backbone-vs-dilated-FODR ground truth per row."""
        check_is_fitted(self, "regions_")
        Q = check_configurations(X, self.config_.robot, self.degrees)
        return chi_exact(Q, self.config_.robot, self.region_).astype(int)

    def query(self, q) -> int:
        """Single-configuration fast path without validation overhead."""
        return 1 if self.regions_.contains(float(q[0]), float(q[1])) else 0

    @property
    def grid_nodes_(self) -> np.ndarray:
        check_is_fitted(self, "cobs_")
        return self.cobs_.grid.all_nodes()

    def _more_tags(self):
        return {"requires_fit": True, "no_validation": True}


class ContactForceTransformer(TransformerMixin, BaseEstimator):
    """Configurations ``(m, n)`` -> per-obstacle max contact force ``(m, N)`` in newtons."""

    def __init__(self, scene=None, degrees=False, raw=False):
        self.scene = scene
        self.degrees = degrees
        self.raw = raw

    def fit(self, X=None, y=None):
        cfg = resolve_scene(self.scene)
        self.config_ = cfg
        self.n_features_in_ = cfg.robot.n_segments
        self.feature_names_out_ = np.array([f"force_{o.name}_N" for o in cfg.scene.obstacles])
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        cfg = self.config_
        Q = check_configurations(X, cfg.robot, self.degrees)
        out = np.empty((len(Q), len(cfg.scene.obstacles)))
        for start in range(0, len(Q), 2048):
            B = backbone_batch(Q[start : start + 2048], cfg.robot)
            out[start : start + 2048] = cfg.scene.forces(B, cfg.robot.thickness)
        if self.raw:
            out /= np.array([o.delta for o in cfg.scene.obstacles])
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_


def unsafe_by_force(forces: np.ndarray, scene: Scene) -> np.ndarray:
    """``(m, N)`` boolean: force at or above each obstacle's threshold."""
    return forces >= np.array([o.f_max for o in scene.obstacles])


__all__ = [
    "ContactForceTransformer",
    "ForceSafetyMap",
    "OutOfLimits",
    "check_configurations",
    "resolve_scene",
    "unsafe_by_force",
]
