"""Separating half-spaces for pairwise collision avoidance and the
sensing-sector membership test.

The collision constraint between two robots is the perpendicular bisector
of their (believed) positions, pushed back by the support function of the
robot's bounding box so that keeping the trajectory on the negative side
keeps the boxes disjoint.
"""

import math
from dataclasses import dataclass

import numpy as np

from .cbf import SensingModel
from .state import RobotState


@dataclass(frozen=True)
class HalfSpace:
    """{r : normal . r + offset <= 0} with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(2)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"normal must be unit length, got |n|={norm}")
        object.__setattr__(self, "normal", n)

    def value(self, point: np.ndarray) -> float:
        return float(self.normal @ np.asarray(point, dtype=float) + self.offset)

    def contains(self, point: np.ndarray) -> bool:
        return self.value(point) <= 0.0


@dataclass(frozen=True)
class RobotShape:
    """Axis-aligned box footprint given by half extents."""

    half_extents: np.ndarray

    def __post_init__(self):
        he = np.asarray(self.half_extents, dtype=float).reshape(2)
        if not np.all(he > 0):
            raise ValueError("half extents must be positive")
        object.__setattr__(self, "half_extents", he)

    def support(self, direction: np.ndarray) -> float:
        """max over the box at the origin of direction . y."""
        return float(np.abs(np.asarray(direction, dtype=float)) @ self.half_extents)


def voronoi_halfspace(r_i: np.ndarray, r_j: np.ndarray) -> HalfSpace:
    """Perpendicular-bisector half-space containing r_i.

    Coincident inputs are resolved by nudging r_j by 1e-6 m along +x so the
    caller always gets a usable (if arbitrary) separating direction.
    """
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    diff = r_j - r_i
    dist = np.linalg.norm(diff)
    if dist == 0.0:
        r_j = r_j + np.array([1e-6, 0.0])
        diff = r_j - r_i
        dist = np.linalg.norm(diff)
    normal = diff / dist
    offset = -float(normal @ (r_i + r_j)) / 2.0
    return HalfSpace(normal, offset)


def buffer_halfspace(hs: HalfSpace, shape: RobotShape) -> HalfSpace:
    """Tighten the half-space by the box support so box-vs-point clearance holds."""
    return HalfSpace(hs.normal, hs.offset + shape.support(hs.normal))


def in_sensing_sector(target: np.ndarray, observer: RobotState, sensing: SensingModel) -> bool:
    """True iff the target is inside the observer's closed sensing sector."""
    rel = np.asarray(target, dtype=float) - observer.position
    dist = float(np.linalg.norm(rel))
    if not sensing.min_distance <= dist <= sensing.range:
        return False
    if sensing.fov_angle == 2.0 * math.pi:
        return True
    c, s = math.cos(observer.yaw), math.sin(observer.yaw)
    body_x = c * rel[0] + s * rel[1]
    body_y = -s * rel[0] + c * rel[1]
    return abs(math.atan2(body_y, body_x)) <= sensing.fov_angle / 2.0
