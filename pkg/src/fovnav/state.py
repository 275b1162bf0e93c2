"""Shared robot state for the planar double-integrator model."""

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class RobotState:
    """Planar position/yaw and their rates; altitude is held constant."""

    position: np.ndarray
    yaw: float
    velocity: np.ndarray
    yaw_rate: float
    altitude: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        vel = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("state must be finite")
        if not (math.isfinite(self.yaw) and math.isfinite(self.yaw_rate)):
            raise ValueError("state must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def pose(self) -> np.ndarray:
        """(x, y, yaw) — the planner's output channels."""
        return np.array([self.position[0], self.position[1], self.yaw])

    @property
    def pose_rate(self) -> np.ndarray:
        """(vx, vy, yaw_rate)."""
        return np.array([self.velocity[0], self.velocity[1], self.yaw_rate])
