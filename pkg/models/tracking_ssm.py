"""
Tracking State-Space Model

Bundles the observation model, a policy and the motion model over one
shared parameter vector, and binds the bundle to a single object
trajectory so the particle filter and the score estimators can run on it.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from autodiff import tape as ad
from autodiff.params import ParamLayout, ParamVector, glorot_init
from data.schemas.geometry import principal_axis_angle, wrap_angle
from data.schemas.schema_definitions import ObjectTrajectory, STATE_DIM
from .motion_model import MotionConfig, propagate_batch, propagate_tape
from .observation_model import LOG_DENSITY_FLOOR, ObservationModel
from .policy import GaussianPolicy, SimplePolicy, make_policy

logger = logging.getLogger(__name__)


class TrackingModel:
    """Observation model + policy + motion model sharing one layout"""

    def __init__(self, policy: str = "simple", motion: Optional[MotionConfig] = None):
        """
        Args:
            policy: 'simple' (two log-stds) or 'neural'
            motion: motion-model settings; the dataset dt must match
        """
        self.policy_kind = policy
        self.observation_model = ObservationModel()
        self.policy: GaussianPolicy = make_policy(policy)
        self.motion = motion or MotionConfig()
        self.layout = ParamLayout(self.observation_model.segments() + self.policy.segments())

    def check_params(self, params: ParamVector):
        if params.layout != self.layout:
            raise ValueError(
                f"parameter layout does not belong to the '{self.policy_kind}' tracking model"
            )

    def init_params(self, rng: np.random.Generator, sigma_accel: float = 1.0,
                    sigma_pinch: float = 0.02) -> ParamVector:
        """Random networks; simple-policy stds set explicitly"""
        params = glorot_init(self.layout, rng)
        if isinstance(self.policy, SimplePolicy):
            self.policy.set_sigmas(params, sigma_accel, sigma_pinch)
        return params

    def true_params(self, edge_logits: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                    laplace_mu: float = 0.05, laplace_b: float = 0.15,
                    sigma_accel: float = 0.5, sigma_pinch: float = 0.01) -> ParamVector:
        """Hand-set generating parameters (simple policy only)"""
        if not isinstance(self.policy, SimplePolicy):
            raise ValueError("generating parameters are defined for the simple policy")
        params = ParamVector.zeros(self.layout)
        self.observation_model.hand_set_params(params, edge_logits, laplace_mu, laplace_b)
        self.policy.set_sigmas(params, sigma_accel, sigma_pinch)
        return params

    def bind(self, trajectory: ObjectTrajectory) -> "TrackingSSM":
        dt = trajectory.meta.get("dt")
        if dt is not None and abs(float(dt) - self.motion.dt) > 1e-12:
            raise ValueError(f"trajectory dt {dt} != motion model dt {self.motion.dt}")
        return TrackingSSM(self, trajectory)


class TrackingSSM:
    """Tracking model bound to one trajectory's observations"""

    def __init__(self, model: TrackingModel, trajectory: ObjectTrajectory):
        self.model = model
        self.layout = model.layout
        self.trajectory = trajectory
        self.dims = trajectory.dims
        self.observations = trajectory.observations
        self.av_poses = trajectory.av_poses_array()
        self.n_steps = trajectory.n_steps
        self.state_dim = STATE_DIM
        self.angle_columns = (2,)

    # Initial distribution: no parameters

    def sample_initial(self, params: ParamVector, n: int,
                       rng: np.random.Generator) -> np.ndarray:
        """
        Particles around the first observation

        Position: centroid + N(0, 1 m) per axis. Heading: principal axis of
        the points, flipped with probability 1/2, plus N(0, 0.3 rad).
        Speed U[0, 15] m/s, curvature N(0, 0.05).
        """
        points = self.observations[0].to_array()
        centroid = points.mean(axis=0)
        axis = principal_axis_angle(points)
        states = np.empty((n, STATE_DIM))
        states[:, 0:2] = centroid + INITIAL_POSITION_STD * rng.standard_normal((n, 2))
        flips = rng.integers(0, 2, size=n)
        heading_noise = INITIAL_HEADING_STD * rng.standard_normal(n)
        states[:, 2] = wrap_angle(axis + np.pi * flips + heading_noise)
        states[:, 3] = rng.uniform(0.0, INITIAL_SPEED_MAX, size=n)
        states[:, 4] = INITIAL_CURVATURE_STD * rng.standard_normal(n)
        return states

    def sample_initial_tape(self, flat, n: int, rng: np.random.Generator) -> ad.Var:
        return ad.Var(self.sample_initial(None, n, rng))

    def log_initial_tape(self, flat, states) -> Optional[ad.Var]:
        return None

    # Transition

    def propagate(self, params: ParamVector, states: np.ndarray,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(next_states, actions) sampled from the policy and pushed through the motion model"""
        actions, _ = self.model.policy.sample_batch(params, states, rng)
        return propagate_batch(states, actions, self.model.motion), actions

    def propagate_tape(self, flat, states, rng: np.random.Generator):
        """Reparameterised transition, differentiable through policy and motion"""
        states = ad.lift(states)
        eps = rng.standard_normal((states.shape[0], 2))
        actions = self.model.policy.sample_tape(flat, self.layout, states, eps)
        return propagate_tape(states, actions, self.model.motion), actions

    def log_policy_tape(self, flat, prev_states, actions) -> ad.Var:
        return self.model.policy.logpdf_tape(flat, self.layout, prev_states, actions)

    # Observation

    def log_obs_tape(self, flat, states, t: int) -> ad.Var:
        return self.model.observation_model.log_likelihood_observation_tape(
            flat, self.layout, self.av_poses[t], states, self.dims, self.observations[t]
        )

    def log_obs(self, params: ParamVector, states: np.ndarray, t: int) -> np.ndarray:
        return self.log_obs_tape(params.values, states, t).value

    def failure_threshold(self, t: int) -> float:
        """Log-weight of a particle whose every point hit the density floor"""
        return LOG_DENSITY_FLOOR * self.observations[t].n_points


# Initial particle distribution
INITIAL_POSITION_STD = 1.0
INITIAL_HEADING_STD = 0.3
INITIAL_SPEED_MAX = 15.0
INITIAL_CURVATURE_STD = 0.05
