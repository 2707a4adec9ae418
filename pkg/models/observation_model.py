"""
Edge/Offset Observation Model

Each observed point is generated around the object's bounding box by
picking an edge e (front, left, rear, right), a parallel offset alpha
uniform along that edge, and a perpendicular offset beta ~ Laplace(mu_e,
b_e), positive outward. Edge probabilities and the Laplace parameters come
from a 12-output network of (range, bearing, relative bearing, length,
width) seen from the AV. Points are independent given the state, so the
observation log-density is the sum of the per-point mixture log-densities.

Edge frames in the object body frame, counterclockwise:

    edge  start          direction  length
    0     ( l/2, -w/2)   ( 0,  1)   w
    1     ( l/2,  w/2)   (-1,  0)   l
    2     (-l/2,  w/2)   ( 0, -1)   w
    3     (-l/2, -w/2)   ( 1,  0)   l

The outward normal of an edge with direction (dx, dy) is (dy, -dx).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from autodiff import tape as ad
from autodiff.mlp import MLPArchitecture, mlp_forward
from autodiff.params import ParamLayout, ParamVector
from data.schemas.geometry import rotation, wrap_angle
from data.schemas.schema_definitions import (
    BoxDims,
    N_EDGES,
    Observation,
    Pose2D,
    VehicleState,
)


@dataclass(frozen=True)
class ObsFeatures:
    """Network inputs before normalisation"""
    range: float  # meters
    bearing: float  # radians, AV body frame
    relative_bearing: float  # radians
    length: float  # meters
    width: float  # meters

    def to_array(self) -> np.ndarray:
        return np.array([self.range, self.bearing, self.relative_bearing,
                         self.length, self.width])


@dataclass(frozen=True)
class EdgeTriplet:
    edge: int
    alpha: float  # along the edge from its first corner
    beta: float  # outward from the edge

    def __post_init__(self):
        if self.edge not in range(N_EDGES):
            raise ValueError(f"edge must be in 0..{N_EDGES - 1}, got {self.edge}")


@dataclass(frozen=True)
class ObsParams12:
    """Decoded network outputs"""
    edge_probs: np.ndarray  # (4,), sums to one
    laplace_mu: np.ndarray  # (4,)
    laplace_b: np.ndarray  # (4,), positive

    @property
    def log_edge_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.edge_probs)


def edge_frames(dims: BoxDims):
    """
    Body-frame edge geometry

    Returns:
        (starts (4, 2), directions (4, 2), normals (4, 2), lengths (4,))
    """
    half_l, half_w = dims.length / 2.0, dims.width / 2.0
    starts = np.array([
        [half_l, -half_w],
        [half_l, half_w],
        [-half_l, half_w],
        [-half_l, -half_w],
    ])
    directions = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
    normals = np.stack([directions[:, 1], -directions[:, 0]], axis=1)
    lengths = np.array([dims.width, dims.length, dims.width, dims.length])
    return starts, directions, normals, lengths


def point_from_triplet(triplet: EdgeTriplet, state: VehicleState,
                       dims: BoxDims) -> Tuple[float, float]:
    starts, directions, normals, _ = edge_frames(dims)
    e = triplet.edge
    local = starts[e] + triplet.alpha * directions[e] + triplet.beta * normals[e]
    world = rotation(state.pose.theta) @ local + np.array([state.pose.x, state.pose.y])
    return float(world[0]), float(world[1])


def triplet_from_point(point, edge: int, state: VehicleState,
                       dims: BoxDims) -> EdgeTriplet:
    """Orthogonal projection of a world point onto one edge frame"""
    starts, directions, normals, _ = edge_frames(dims)
    offset = np.asarray(point, dtype=np.float64) - np.array([state.pose.x, state.pose.y])
    local = rotation(state.pose.theta).T @ offset - starts[edge]
    return EdgeTriplet(edge, float(local @ directions[edge]), float(local @ normals[edge]))


def project_points(states, points: np.ndarray, dims: BoxDims):
    """
    Edge coordinates of every point for every state

    Args:
        states: (N, 5) array or tape value
        points: (P, 2) world-frame points

    Returns:
        (alpha, beta), each a Var of shape (N, P, 4)
    """
    states = ad.lift(states)
    starts, directions, normals, _ = edge_frames(dims)
    x = ad.expand_dims(states[:, 0], -1)
    y = ad.expand_dims(states[:, 1], -1)
    theta = ad.expand_dims(states[:, 2], -1)
    dx = points[None, :, 0] - x
    dy = points[None, :, 1] - y
    cos, sin = ad.cos(theta), ad.sin(theta)
    local_x = ad.expand_dims(cos * dx + sin * dy, -1) - starts[:, 0]
    local_y = ad.expand_dims(cos * dy - sin * dx, -1) - starts[:, 1]
    alpha = local_x * directions[:, 0] + local_y * directions[:, 1]
    beta = local_x * normals[:, 0] + local_y * normals[:, 1]
    return alpha, beta


def mixture_log_density(log_probs, mu, b, alpha, beta, lengths: np.ndarray) -> ad.Var:
    """
    Per-point log of sum_e p_e * U(alpha; 0, len_e) * Laplace(beta; mu_e, b_e)

    Args:
        log_probs, mu, b: (N, 4) per-state edge parameters
        alpha, beta: (N, P, 4) edge coordinates
        lengths: (4,) edge lengths

    Returns:
        Var (N, P), clamped below at LOG_DENSITY_FLOOR
    """
    log_probs, mu, b = ad.lift(log_probs), ad.lift(mu), ad.lift(b)
    alpha, beta = ad.lift(alpha), ad.lift(beta)
    mu = ad.expand_dims(mu, 1)
    b = ad.expand_dims(b, 1)
    laplace = ad.neg(ad.log(2.0 * b)) - ad.abs_(beta - mu) / b
    terms = ad.expand_dims(log_probs, 1) - np.log(lengths) + laplace
    in_support = (alpha.value >= 0.0) & (alpha.value <= lengths)
    masked = ad.where(in_support, terms, np.full(terms.shape, -np.inf))
    return ad.maximum(ad.logsumexp(masked, axis=-1), LOG_DENSITY_FLOOR)


class ObservationModel:
    """Network-parameterised edge/offset point model"""

    def __init__(self, prefix: str = "obs",
                 architecture: MLPArchitecture = None):
        """
        Args:
            prefix: segment name prefix inside the shared parameter vector
            architecture: network layers, 5 inputs and 12 outputs
        """
        self.prefix = prefix
        self.architecture = architecture or OBS_ARCHITECTURE
        if self.architecture.n_inputs != 5 or self.architecture.n_outputs != 12:
            raise ValueError("observation network must map 5 features to 12 outputs")

    def segments(self):
        return self.architecture.segments(self.prefix)

    @property
    def n_params(self) -> int:
        return self.architecture.n_params

    def hand_set_params(self, params: ParamVector,
                        edge_logits: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                        laplace_mu: float = 0.05,
                        laplace_b: float = 0.15) -> ParamVector:
        """
        Zero every weight and put the requested outputs in the last bias

        The resulting model ignores its inputs: constant edge logits and
        Laplace parameters shared by all edges.
        """
        for name, shape in self.segments():
            params.set_segment(name, np.zeros(shape))
        bias = np.zeros(12)
        bias[0:4] = edge_logits
        bias[MU_COLUMNS] = laplace_mu
        bias[SCALE_COLUMNS] = np.log(laplace_b)
        last = len(self.architecture.layer_sizes) - 2
        params.set_segment(f"{self.prefix}.b{last}", bias)
        return params

    # Features

    def features(self, av_pose: Pose2D, state: VehicleState, dims: BoxDims) -> ObsFeatures:
        dx, dy = state.pose.x - av_pose.x, state.pose.y - av_pose.y
        return ObsFeatures(
            range=float(np.hypot(dx, dy)),
            bearing=wrap_angle(np.arctan2(dy, dx) - av_pose.theta),
            relative_bearing=wrap_angle(state.pose.theta - av_pose.theta),
            length=dims.length,
            width=dims.width,
        )

    def features_tape(self, av_pose: np.ndarray, states, dims: BoxDims) -> ad.Var:
        """Unscaled (N, 5) features for (N, 5) states"""
        states = ad.lift(states)
        dx = states[:, 0] - av_pose[0]
        dy = states[:, 1] - av_pose[1]
        distance = ad.sqrt(ad.square(dx) + ad.square(dy))
        bearing = ad.wrap_angle(ad.atan2(dy, dx) - av_pose[2])
        relative = ad.wrap_angle(states[:, 2] - av_pose[2])
        n = states.shape[0]
        return ad.stack([
            distance, bearing, relative,
            np.full(n, dims.length), np.full(n, dims.width),
        ], axis=1)

    # Network outputs

    def _decode(self, flat, layout: ParamLayout, features):
        scaled = ad.lift(features) / FEATURE_SCALE
        out = mlp_forward(flat, layout, self.prefix, scaled, self.architecture)
        log_probs = ad.log_softmax(out[:, 0:4], axis=-1)
        mu = out[:, MU_COLUMNS]
        b = ad.exp(ad.clip(out[:, SCALE_COLUMNS], -SCALE_LOGIT_BOUND, SCALE_LOGIT_BOUND))
        return log_probs, mu, b

    def obs_params(self, theta: ParamVector, feats: ObsFeatures) -> ObsParams12:
        log_probs, mu, b = self._decode(theta.values, theta.layout, feats.to_array()[None, :])
        return ObsParams12(np.exp(log_probs.value[0]), mu.value[0], b.value[0])

    def obs_params_tape(self, flat, layout: ParamLayout, av_pose: np.ndarray,
                        states, dims: BoxDims):
        """(log_probs, mu, b), each a (N, 4) Var"""
        return self._decode(flat, layout, self.features_tape(av_pose, states, dims))

    # Densities

    def log_likelihood_points_tape(self, flat, layout: ParamLayout, av_pose: np.ndarray,
                                   states, dims: BoxDims, points: np.ndarray) -> ad.Var:
        """Per-point log-densities, Var (N, P)"""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        log_probs, mu, b = self.obs_params_tape(flat, layout, av_pose, states, dims)
        alpha, beta = project_points(states, points, dims)
        _, _, _, lengths = edge_frames(dims)
        return mixture_log_density(log_probs, mu, b, alpha, beta, lengths)

    def log_likelihood_observation_tape(self, flat, layout: ParamLayout, av_pose: np.ndarray,
                                        states, dims: BoxDims, obs: Observation) -> ad.Var:
        """Observation log-densities, Var (N,)"""
        per_point = self.log_likelihood_points_tape(
            flat, layout, av_pose, states, dims, obs.to_array()
        )
        return ad.sum_(per_point, axis=1)

    def log_likelihood_points(self, theta: ParamVector, av_pose: Pose2D,
                              state: VehicleState, dims: BoxDims, points) -> np.ndarray:
        return self.log_likelihood_points_tape(
            theta.values, theta.layout, av_pose.to_array(),
            state.to_array()[None, :], dims, points,
        ).value[0]

    def log_likelihood_point(self, theta: ParamVector, av_pose: Pose2D,
                             state: VehicleState, dims: BoxDims, point) -> float:
        return float(self.log_likelihood_points(theta, av_pose, state, dims, [point])[0])

    def log_likelihood_observation(self, theta: ParamVector, av_pose: Pose2D,
                                   state: VehicleState, dims: BoxDims,
                                   obs: Observation) -> float:
        return float(self.log_likelihood_points(theta, av_pose, state, dims, obs.to_array()).sum())

    def log_likelihood_observation_batch(self, theta: ParamVector, av_pose: Pose2D,
                                         states: np.ndarray, dims: BoxDims,
                                         obs: Observation) -> np.ndarray:
        return self.log_likelihood_observation_tape(
            theta.values, theta.layout, av_pose.to_array(), states, dims, obs
        ).value

    # Sampling

    def sample_observation(self, theta: ParamVector, av_pose: Pose2D, state: VehicleState,
                           dims: BoxDims, n_points: int, rng: np.random.Generator,
                           timestamp_index: int = 0) -> Observation:
        """Draw n_points i.i.d. points: edge, then alpha, then beta"""
        params = self.obs_params(theta, self.features(av_pose, state, dims))
        points = sample_points(params, state, dims, n_points, rng)
        return Observation(tuple(map(tuple, points)), timestamp_index)


def sample_points(params: ObsParams12, state: VehicleState, dims: BoxDims,
                  n_points: int, rng: np.random.Generator) -> np.ndarray:
    """(n_points, 2) world-frame draws from decoded parameters"""
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    starts, directions, normals, lengths = edge_frames(dims)
    probs = np.asarray(params.edge_probs, dtype=np.float64)
    edges = rng.choice(N_EDGES, size=n_points, p=probs / probs.sum())
    alpha = rng.uniform(0.0, lengths[edges])
    beta = rng.laplace(params.laplace_mu[edges], params.laplace_b[edges])
    local = starts[edges] + alpha[:, None] * directions[edges] + beta[:, None] * normals[edges]
    return local @ rotation(state.pose.theta).T + np.array([state.pose.x, state.pose.y])


def log_likelihood_points_from_params(params: ObsParams12, state: VehicleState,
                                      dims: BoxDims, points) -> np.ndarray:
    """Per-point log-densities for decoded parameters, no network involved"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    alpha, beta = project_points(state.to_array()[None, :], points, dims)
    _, _, _, lengths = edge_frames(dims)
    out = mixture_log_density(
        params.log_edge_probs[None, :], params.laplace_mu[None, :],
        params.laplace_b[None, :], alpha, beta, lengths,
    )
    return out.value[0]


OBS_ARCHITECTURE = MLPArchitecture((5, 16, 16, 16, 16, 12), "tanh")

# Network input normalisation: range, bearing, relative bearing, length, width
FEATURE_SCALE = np.array([50.0, np.pi, np.pi, 10.0, 3.0])

# Output columns of the Laplace means and log-scales
MU_COLUMNS = [4, 6, 8, 10]
SCALE_COLUMNS = [5, 7, 9, 11]
SCALE_LOGIT_BOUND = 10.0

# Per-point log-density when no edge supports the point
LOG_DENSITY_FLOOR = -1e3
