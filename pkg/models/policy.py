"""
Action Policies

Gaussian action distributions pi(a_t | x_{t-1}) over (accel, pinch),
described by a mean and a lower-triangular Cholesky factor

    L = [[l11, 0], [l21, l22]],  a = mean + L @ eps,  eps ~ N(0, I)

Two variants share the sampling and density code:

- SimplePolicy: hand-crafted speed law with two learnable log-stds
- NeuralPolicy: 2 -> 32 -> 32 -> 5 ReLU network of (speed, curvature)
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from autodiff import tape as ad
from autodiff.mlp import MLPArchitecture, mlp_forward
from autodiff.params import ParamLayout, ParamVector
from data.schemas.schema_definitions import Action, VehicleState


LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class SimplePolicyParams:
    log_sigma_accel: float
    log_sigma_pinch: float


@dataclass(frozen=True)
class NeuralPolicyOutputs:
    mean: np.ndarray  # (accel, pinch)
    chol: np.ndarray  # 2x2 lower triangular, positive diagonal

    @property
    def covariance(self) -> np.ndarray:
        return self.chol @ self.chol.T


def simple_policy_mean(v: float) -> Tuple[float, float]:
    """Mean (accel, pinch) of the hand-crafted policy at speed v"""
    return float(np.clip(1.5 * (1.0 - v / 8.0), -2.0, 1.5)), 0.0


def pinch_scale(v: float) -> float:
    """Multiplier of the pinch std; reversing speeds count as standstill"""
    return 1.0 / (1.0 + max(v, 0.0) / 5.0)


def gaussian_logpdf(mean, l11, l21, l22, actions) -> ad.Var:
    """Log-density of (N, 2) actions under per-row Cholesky Gaussians"""
    actions = ad.lift(actions)
    z1 = (actions[:, 0] - mean[:, 0]) / l11
    z2 = (actions[:, 1] - mean[:, 1] - l21 * z1) / l22
    quad = 0.5 * (ad.square(z1) + ad.square(z2))
    return ad.neg(quad + ad.log(l11) + ad.log(l22)) - LOG_2PI


class GaussianPolicy:
    """Shared sampling/density code; subclasses provide `gaussian_params`"""

    prefix = "policy"

    def segments(self):
        raise NotImplementedError

    def gaussian_params(self, flat, layout: ParamLayout, states):
        """(mean (N, 2), l11, l21, l22 each (N,)) as tape values"""
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.segments())

    def logpdf_tape(self, flat, layout: ParamLayout, prev_states, actions) -> ad.Var:
        mean, l11, l21, l22 = self.gaussian_params(flat, layout, prev_states)
        return gaussian_logpdf(mean, l11, l21, l22, actions)

    def sample_tape(self, flat, layout: ParamLayout, states, eps: np.ndarray) -> ad.Var:
        """Reparameterised actions mean + L @ eps"""
        mean, l11, l21, l22 = self.gaussian_params(flat, layout, states)
        accel = mean[:, 0] + l11 * eps[:, 0]
        pinch = mean[:, 1] + l21 * eps[:, 0] + l22 * eps[:, 1]
        return ad.stack([accel, pinch], axis=1)

    def logpdf_batch(self, theta: ParamVector, prev_states: np.ndarray,
                     actions: np.ndarray) -> np.ndarray:
        return self.logpdf_tape(theta.values, theta.layout, prev_states, actions).value

    def sample_batch(self, theta: ParamVector, states: np.ndarray,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(actions (N, 2), logpdf (N,)) for (N, 5) states"""
        states = np.asarray(states, dtype=np.float64)
        eps = rng.standard_normal((len(states), 2))
        mean, l11, l21, l22 = (ad.value_of(x) for x in
                               self.gaussian_params(theta.values, theta.layout, states))
        actions = np.stack([
            mean[:, 0] + l11 * eps[:, 0],
            mean[:, 1] + l21 * eps[:, 0] + l22 * eps[:, 1],
        ], axis=1)
        logpdf = -0.5 * (eps ** 2).sum(axis=1) - np.log(l11) - np.log(l22) - LOG_2PI
        return actions, logpdf

    def policy_sample(self, theta: ParamVector, state: VehicleState,
                      rng: np.random.Generator) -> Tuple[Action, float]:
        actions, logpdf = self.sample_batch(theta, state.to_array()[None, :], rng)
        return Action.from_array(actions[0]), float(logpdf[0])

    def policy_logpdf(self, theta: ParamVector, state: VehicleState, action: Action) -> float:
        return float(self.logpdf_batch(
            theta, state.to_array()[None, :], action.to_array()[None, :]
        )[0])


class SimplePolicy(GaussianPolicy):
    """Speed-dependent mean, independent accel/pinch noise with learnable stds"""

    def segments(self):
        return [(f"{self.prefix}.log_sigma", (2,))]

    def set_sigmas(self, params: ParamVector, sigma_accel: float,
                   sigma_pinch: float) -> ParamVector:
        params.set_segment(f"{self.prefix}.log_sigma",
                           [np.log(sigma_accel), np.log(sigma_pinch)])
        return params

    def read_params(self, params: ParamVector) -> SimplePolicyParams:
        log_sigma = params.segment(f"{self.prefix}.log_sigma")
        return SimplePolicyParams(float(log_sigma[0]), float(log_sigma[1]))

    def gaussian_params(self, flat, layout: ParamLayout, states):
        states = ad.lift(states)
        log_sigma = layout.take(flat, f"{self.prefix}.log_sigma")
        speed = states[:, 3]
        mean_accel = ad.clip(1.5 * (1.0 - speed / 8.0), -2.0, 1.5)
        mean = ad.stack([mean_accel, np.zeros(states.shape[0])], axis=1)
        scale = 1.0 / (1.0 + ad.clip(speed, 0.0, np.inf) / 5.0)
        l11 = ad.exp(log_sigma[0]) + np.zeros(states.shape[0])
        l22 = ad.exp(log_sigma[1]) * scale
        return mean, l11, np.zeros(states.shape[0]), l22

    def simple_policy_logpdf(self, params: SimplePolicyParams, state: VehicleState,
                             action: Action) -> float:
        mean_accel, mean_pinch = simple_policy_mean(state.v)
        sigma_a = np.exp(params.log_sigma_accel)
        sigma_p = np.exp(params.log_sigma_pinch) * pinch_scale(state.v)
        za = (action.accel - mean_accel) / sigma_a
        zp = (action.pinch - mean_pinch) / sigma_p
        return float(-0.5 * (za ** 2 + zp ** 2) - np.log(sigma_a) - np.log(sigma_p) - LOG_2PI)


class NeuralPolicy(GaussianPolicy):
    """Network mapping (speed, curvature) to mean and Cholesky factor"""

    def __init__(self, architecture: MLPArchitecture = None):
        self.architecture = architecture or POLICY_ARCHITECTURE
        if self.architecture.n_inputs != 2 or self.architecture.n_outputs != 5:
            raise ValueError("policy network must map 2 inputs to 5 outputs")

    def segments(self):
        return self.architecture.segments(self.prefix)

    def gaussian_params(self, flat, layout: ParamLayout, states):
        states = ad.lift(states)
        inputs = ad.stack([states[:, 3] / 10.0, states[:, 4] * 10.0], axis=1)
        out = mlp_forward(flat, layout, self.prefix, inputs, self.architecture)
        mean = out[:, 0:2]
        return mean, ad.softplus(out[:, 2]), out[:, 3], ad.softplus(out[:, 4])

    def neural_policy_forward(self, theta: ParamVector, state: VehicleState) -> NeuralPolicyOutputs:
        mean, l11, l21, l22 = self.gaussian_params(
            theta.values, theta.layout, state.to_array()[None, :]
        )
        l11, l21, l22 = (ad.value_of(x)[0] for x in (l11, l21, l22))
        chol = np.array([[l11, 0.0], [l21, l22]])
        return NeuralPolicyOutputs(mean.value[0].copy(), chol)


def make_policy(kind: str) -> GaussianPolicy:
    if kind == "simple":
        return SimplePolicy()
    if kind == "neural":
        return NeuralPolicy()
    raise ValueError(f"unknown policy kind '{kind}'")


POLICY_ARCHITECTURE = MLPArchitecture((2, 32, 32, 5), "relu")
