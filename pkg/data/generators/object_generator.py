"""
Object Generator

Rolls out single tracked objects: initial state and box size, actions from
the generating policy pushed through the motion model, and one sampled
observation per step from the generating observation model.
"""

import logging
from typing import Sequence

import numpy as np

from autodiff.params import ParamVector
from models.motion_model import propagate_batch
from models.tracking_ssm import TrackingModel
from ..schemas.geometry import wrap_angle
from ..schemas.schema_definitions import (
    Action,
    BoxDims,
    ObjectTrajectory,
    Pose2D,
    VehicleState,
)

logger = logging.getLogger(__name__)


class ObjectGenerator:
    """Generates synthetic object trajectories around an AV path"""

    def __init__(self, model: TrackingModel, true_params: ParamVector, config):
        """
        Args:
            model: tracking model whose policy/observation model generate the data
            true_params: generating parameters
            config: SceneConfig with sampler ranges and the AV pose noise
        """
        model.check_params(true_params)
        self.model = model
        self.true_params = true_params
        self.config = config

    def sample_initial_state(self, av_pose: Pose2D, rng: np.random.Generator) -> VehicleState:
        """Uniform over the annulus around the AV, heading uniform"""
        cfg = self.config
        radius = np.sqrt(rng.uniform(cfg.radius_min ** 2, cfg.radius_max ** 2))
        bearing = rng.uniform(-np.pi, np.pi)
        heading = rng.uniform(-np.pi, np.pi)
        speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        kappa = cfg.kappa_std * rng.standard_normal()
        return VehicleState(
            Pose2D(av_pose.x + radius * np.cos(bearing),
                   av_pose.y + radius * np.sin(bearing),
                   wrap_angle(heading)),
            float(speed),
            float(kappa),
        )

    def sample_dims(self, rng: np.random.Generator) -> BoxDims:
        cfg = self.config
        return BoxDims(float(rng.uniform(*cfg.length_range)),
                       float(rng.uniform(*cfg.width_range)))

    def noisy_pose(self, pose: Pose2D, rng: np.random.Generator) -> Pose2D:
        cfg = self.config
        if cfg.av_noise_xy == 0 and cfg.av_noise_theta == 0:
            return pose
        dx, dy = cfg.av_noise_xy * rng.standard_normal(2)
        return Pose2D(pose.x + dx, pose.y + dy,
                      wrap_angle(pose.theta + cfg.av_noise_theta * rng.standard_normal()))

    def rollout_states(self, initial: VehicleState, n_steps: int,
                       rng: np.random.Generator):
        """(T+1, 5) states and (T, 2) actions of one policy rollout"""
        states = np.empty((n_steps + 1, 5))
        actions = np.empty((n_steps, 2))
        states[0] = initial.to_array()
        with np.errstate(divide="ignore", invalid="ignore"):
            for t in range(1, n_steps + 1):
                action, _ = self.model.policy.sample_batch(self.true_params, states[t - 1:t], rng)
                actions[t - 1] = action[0]
                states[t] = propagate_batch(states[t - 1:t], action, self.model.motion)[0]
        return states, actions

    def generate_object(self, av_poses: Sequence[Pose2D], rng: np.random.Generator,
                        meta: dict = None) -> ObjectTrajectory:
        """One trajectory observed from the given (true) AV poses"""
        cfg = self.config
        n_steps = len(av_poses) - 1
        dims = self.sample_dims(rng)
        initial = self.sample_initial_state(av_poses[0], rng)
        states, actions = self.rollout_states(initial, n_steps, rng)

        state_list = [VehicleState.from_array(s) for s in states]
        observations = []
        for t, (state, av_pose) in enumerate(zip(state_list, av_poses)):
            n_points = int(rng.integers(cfg.points_min, cfg.points_max + 1))
            observations.append(self.model.observation_model.sample_observation(
                self.true_params, av_pose, state, dims, n_points, rng, t
            ))
        recorded_poses = [self.noisy_pose(p, rng) for p in av_poses]

        return ObjectTrajectory(
            dims=dims,
            observations=observations,
            av_poses=recorded_poses,
            states=state_list,
            actions=[Action.from_array(a) for a in actions],
            meta=dict(meta or {}, dt=self.model.motion.dt),
        )
