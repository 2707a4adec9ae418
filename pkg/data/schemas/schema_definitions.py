"""
Data Schema Definitions for the tracking pipeline

This module defines the value types shared by every other package: object
poses and states, actions, box dimensions, observations and whole object
trajectories. Vectorised code works on plain arrays laid out in the
column orders defined at the bottom of this module.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .geometry import wrap_angle


Point2D = Tuple[float, float]


def _require_finite(name: str, *values: float):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be finite, got {values}")


@dataclass(frozen=True)
class Pose2D:
    """2D pose; heading is counterclockwise from the world +x axis"""
    x: float  # meters
    y: float  # meters
    theta: float  # radians, stored wrapped to (-pi, pi]

    def __post_init__(self):
        _require_finite("Pose2D", self.x, self.y, self.theta)
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Pose2D":
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True)
class VehicleState:
    """Latent object state: pose, speed and curvature"""
    pose: Pose2D
    v: float  # m/s, may be negative
    kappa: float  # 1/m

    def __post_init__(self):
        _require_finite("VehicleState", self.v, self.kappa)

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.pose.x, self.pose.y, self.pose.theta, self.v, self.kappa],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values) -> "VehicleState":
        return cls(
            pose=Pose2D(float(values[0]), float(values[1]), float(values[2])),
            v=float(values[3]),
            kappa=float(values[4]),
        )


@dataclass(frozen=True)
class Action:
    """Latent action: linear acceleration and pinch (rate of curvature)"""
    accel: float  # m/s^2
    pinch: float  # 1/(m*s)

    def __post_init__(self):
        _require_finite("Action", self.accel, self.pinch)

    def to_array(self) -> np.ndarray:
        return np.array([self.accel, self.pinch], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Action":
        return cls(float(values[0]), float(values[1]))


@dataclass(frozen=True)
class BoxDims:
    """Bounding-box size of a road user"""
    length: float  # meters, along heading
    width: float  # meters

    def __post_init__(self):
        _require_finite("BoxDims", self.length, self.width)
        if self.length <= 0 or self.width <= 0:
            raise ValueError(f"BoxDims must be positive, got {self.length}x{self.width}")


@dataclass(frozen=True)
class Observation:
    """Peripheral points of one object at one time step (world frame)"""
    points: Tuple[Point2D, ...]
    timestamp_index: int

    def __post_init__(self):
        points = tuple((float(p[0]), float(p[1])) for p in self.points)
        if len(points) < 1:
            raise ValueError("Observation needs at least one point")
        _require_finite("Observation", *[c for p in points for c in p])
        object.__setattr__(self, "points", points)

    def to_array(self) -> np.ndarray:
        """Points as a (P, 2) array"""
        return np.asarray(self.points, dtype=np.float64)

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass
class ObjectTrajectory:
    """One tracked object: dims, observations, AV poses and optional ground truth"""
    dims: BoxDims
    observations: List[Observation]
    av_poses: List[Pose2D]
    states: Optional[List[VehicleState]] = None
    actions: Optional[List[Action]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def n_steps(self) -> int:
        """T, the index of the last observation"""
        return len(self.observations) - 1

    @property
    def has_ground_truth(self) -> bool:
        return self.states is not None

    def validate(self):
        """Check the length invariants between the per-step lists"""
        n_obs = len(self.observations)
        if n_obs < 1:
            raise ValueError("ObjectTrajectory needs at least one observation")
        if len(self.av_poses) != n_obs:
            raise ValueError(
                f"av_poses has {len(self.av_poses)} entries, expected {n_obs}"
            )
        if self.states is not None and len(self.states) != n_obs:
            raise ValueError(f"states has {len(self.states)} entries, expected {n_obs}")
        if self.actions is not None and len(self.actions) != n_obs - 1:
            raise ValueError(
                f"actions has {len(self.actions)} entries, expected {n_obs - 1}"
            )

    def states_array(self) -> np.ndarray:
        """Ground-truth states as a (T+1, 5) array"""
        if self.states is None:
            raise ValueError("trajectory carries no ground-truth states")
        return np.stack([s.to_array() for s in self.states])

    def actions_array(self) -> np.ndarray:
        """Ground-truth actions as a (T, 2) array"""
        if self.actions is None:
            raise ValueError("trajectory carries no ground-truth actions")
        if len(self.actions) == 0:
            return np.zeros((0, 2))
        return np.stack([a.to_array() for a in self.actions])

    def av_poses_array(self) -> np.ndarray:
        return np.stack([p.to_array() for p in self.av_poses])

    def window(self, start: int, stop: int) -> "ObjectTrajectory":
        """Sub-trajectory covering observation indices start..stop inclusive"""
        return ObjectTrajectory(
            dims=self.dims,
            observations=[
                Observation(o.points, i)
                for i, o in enumerate(self.observations[start:stop + 1])
            ],
            av_poses=self.av_poses[start:stop + 1],
            states=None if self.states is None else self.states[start:stop + 1],
            actions=None if self.actions is None else self.actions[start:stop],
            meta=dict(self.meta, window=(start, stop)),
        )


# Column layouts of the vectorised state/action arrays
STATE_COLUMNS = ["x", "y", "theta", "v", "kappa"]
ACTION_COLUMNS = ["accel", "pinch"]
STATE_DIM = len(STATE_COLUMNS)
ACTION_DIM = len(ACTION_COLUMNS)

# Box edges, counterclockwise: 0=front, 1=left, 2=rear, 3=right
EDGE_NAMES = ["front", "left", "rear", "right"]
N_EDGES = len(EDGE_NAMES)

# Synthetic-data time step (seconds)
DEFAULT_DT = 0.33
