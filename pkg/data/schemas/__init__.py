"""
Domain types and geometry
"""

from .geometry import (
    wrap_angle,
    box_corners,
    rotation,
    transform_states,
    principal_axis_angle,
)
from .schema_definitions import (
    Pose2D,
    VehicleState,
    Action,
    BoxDims,
    Observation,
    ObjectTrajectory,
    STATE_COLUMNS,
    ACTION_COLUMNS,
    STATE_DIM,
    ACTION_DIM,
    EDGE_NAMES,
    N_EDGES,
    DEFAULT_DT,
)

__all__ = [
    "wrap_angle",
    "box_corners",
    "rotation",
    "transform_states",
    "principal_axis_angle",
    "Pose2D",
    "VehicleState",
    "Action",
    "BoxDims",
    "Observation",
    "ObjectTrajectory",
    "STATE_COLUMNS",
    "ACTION_COLUMNS",
    "STATE_DIM",
    "ACTION_DIM",
    "EDGE_NAMES",
    "N_EDGES",
    "DEFAULT_DT",
]
