"""
Motion, observation and policy models of the tracking state-space model
"""

from .motion_model import (
    MotionConfig,
    propagate,
    propagate_batch,
    propagate_with_input_grads,
    propagate_with_input_grads_batch,
)
from .observation_model import (
    ObservationModel,
    ObsFeatures,
    ObsParams12,
    EdgeTriplet,
    point_from_triplet,
    triplet_from_point,
)
from .policy import SimplePolicy, NeuralPolicy, simple_policy_mean, make_policy
from .tracking_ssm import TrackingModel, TrackingSSM

__all__ = [
    "MotionConfig",
    "propagate",
    "propagate_batch",
    "propagate_with_input_grads",
    "propagate_with_input_grads_batch",
    "ObservationModel",
    "ObsFeatures",
    "ObsParams12",
    "EdgeTriplet",
    "point_from_triplet",
    "triplet_from_point",
    "SimplePolicy",
    "NeuralPolicy",
    "simple_policy_mean",
    "make_policy",
    "TrackingModel",
    "TrackingSSM",
]
