"""Force-safe configuration-space obstacle maps for planar soft manipulators."""

from .cspace import (
    CObsGrid,
    JointGrid,
    UnsafeRegionSet,
    build_cobs,
    build_unsafe_set,
    chi_exact,
    chi_fast,
    connected_components,
)
from .estimator import ContactForceTransformer, ForceSafetyMap, check_configurations
from .forcemodel import ElasticObstacle, Fodr, ObstacleConsumed, Scene, build_fodr, contact_force, max_deflection
from .kinematics import RobotModel, SegmentSpec, backbone
from .scenefile import load_example_scene, load_scene

__version__ = "0.1.0"

__all__ = [
    "CObsGrid",
    "ContactForceTransformer",
    "ElasticObstacle",
    "Fodr",
    "ForceSafetyMap",
    "JointGrid",
    "ObstacleConsumed",
    "RobotModel",
    "Scene",
    "SegmentSpec",
    "UnsafeRegionSet",
    "backbone",
    "build_cobs",
    "build_fodr",
    "build_unsafe_set",
    "check_configurations",
    "chi_exact",
    "chi_fast",
    "connected_components",
    "contact_force",
    "load_example_scene",
    "load_scene",
    "max_deflection",
]
