"""
Transition-density gradient check

For a motion model that is deterministic and injective in the action, the
transition density is the policy density times a Jacobian factor that does
not depend on the parameters, so both log-densities have the same
parameter gradient. This module checks that numerically on a scalar toy
model where the transition density is available in closed form:

    a_t ~ N(w0 * x_{t-1} + w1, exp(w2)^2),   x_t = x_{t-1} + c * a_t
    f(x_t | x_{t-1}) = N(x_t; x_{t-1} + c * mean, (|c| * std)^2)
"""

import logging
from dataclasses import dataclass

import numpy as np

from autodiff import tape as ad

logger = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * float(np.log(2.0 * np.pi))


@dataclass
class LemmaCheckResult:
    n_points: int
    max_abs_diff: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff <= self.tolerance


def _normal_logpdf(x, mean, std) -> ad.Var:
    z = (x - mean) / std
    return ad.neg(0.5 * ad.square(z) + ad.log(std)) - HALF_LOG_2PI


def _policy_moments(theta: ad.Var, x_prev: float):
    mean = theta[0] * x_prev + theta[1]
    std = ad.exp(theta[2])
    return mean, std


def toy_policy_grad(theta: np.ndarray, x_prev: float, action: float) -> np.ndarray:
    tape = ad.Tape()
    th = tape.variable(theta)
    mean, std = _policy_moments(th, x_prev)
    return tape.backward(_normal_logpdf(action, mean, std))[th]


def toy_transition_grad(theta: np.ndarray, x_prev: float, x_next: float,
                        gain: float) -> np.ndarray:
    tape = ad.Tape()
    th = tape.variable(theta)
    mean, std = _policy_moments(th, x_prev)
    density = _normal_logpdf(x_next, x_prev + gain * mean, abs(gain) * std)
    return tape.backward(density)[th]


def lemma_check(n_points: int = 100, seed: int = 0,
                tolerance: float = 1e-10) -> LemmaCheckResult:
    """Compare both gradients at random parameters, gains and states"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        theta = rng.normal(0.0, 0.5, size=3)
        gain = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 3.0)
        x_prev = rng.normal(0.0, 2.0)
        action = rng.normal(0.0, 1.5)
        x_next = x_prev + gain * action
        diff = np.abs(toy_policy_grad(theta, x_prev, action)
                      - toy_transition_grad(theta, x_prev, x_next, gain))
        worst = max(worst, float(diff.max()))
    result = LemmaCheckResult(n_points, worst, tolerance)
    logger.info("transition/policy gradient check: max diff %.3e over %d points",
                worst, n_points)
    return result
