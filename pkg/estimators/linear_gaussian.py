"""
Scalar Linear-Gaussian Oracle

    x_0 ~ N(m0, s0^2)
    a_t ~ pi(. | x_{t-1}) = N(coef * x_{t-1}, sigma_x^2),  x_t = a_t
    y_t ~ N(x_t, sigma_y^2)

The motion model is the identity on the action, so the model fits the
same policy/motion decomposition as the tracking model while the Kalman
filter gives the exact log-likelihood. Exact scores are central finite
differences of that log-likelihood in the unconstrained parameters
(coef, log sigma_x, log sigma_y, m0, log s0).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from autodiff import tape as ad
from autodiff.params import ParamLayout, ParamVector


LG_LAYOUT = ParamLayout([
    ("lg.coef", (1,)),
    ("lg.log_sigma_x", (1,)),
    ("lg.log_sigma_y", (1,)),
    ("lg.init_mean", (1,)),
    ("lg.log_init_std", (1,)),
])

HALF_LOG_2PI = 0.5 * float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LinearGaussianSSM:
    coef: float
    sigma_x: float
    sigma_y: float
    init_mean: float = 0.0
    init_std: float = 1.0

    def __post_init__(self):
        if min(self.sigma_x, self.sigma_y, self.init_std) <= 0:
            raise ValueError("LinearGaussianSSM standard deviations must be positive")

    def to_params(self) -> ParamVector:
        return ParamVector(LG_LAYOUT, np.array([
            self.coef, np.log(self.sigma_x), np.log(self.sigma_y),
            self.init_mean, np.log(self.init_std),
        ]))

    @classmethod
    def from_params(cls, params: ParamVector) -> "LinearGaussianSSM":
        v = params.values
        return cls(float(v[0]), float(np.exp(v[1])), float(np.exp(v[2])),
                   float(v[3]), float(np.exp(v[4])))

    def simulate(self, n_steps: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(states, observations), each of length n_steps + 1"""
        xs = np.empty(n_steps + 1)
        xs[0] = self.init_mean + self.init_std * rng.standard_normal()
        for t in range(1, n_steps + 1):
            xs[t] = self.coef * xs[t - 1] + self.sigma_x * rng.standard_normal()
        ys = xs + self.sigma_y * rng.standard_normal(n_steps + 1)
        return xs, ys

    def bind(self, observations) -> "LinearGaussianFilterModel":
        return LinearGaussianFilterModel(observations)


def _gaussian_logpdf(x, mean, std) -> ad.Var:
    z = (x - mean) / std
    return ad.neg(0.5 * ad.square(z) + ad.log(std)) - HALF_LOG_2PI


class LinearGaussianFilterModel:
    """Linear-Gaussian model bound to one observation sequence"""

    state_dim = 1
    angle_columns = ()

    def __init__(self, observations):
        self.observations = np.asarray(observations, dtype=np.float64)
        self.n_steps = len(self.observations) - 1
        self.layout = LG_LAYOUT

    def _unpack(self, flat):
        take = lambda name: self.layout.take(flat, name)[0]
        return (take("lg.coef"), ad.exp(take("lg.log_sigma_x")),
                ad.exp(take("lg.log_sigma_y")), take("lg.init_mean"),
                ad.exp(take("lg.log_init_std")))

    # Initial distribution depends on the parameters

    def sample_initial_tape(self, flat, n: int, rng: np.random.Generator) -> ad.Var:
        _, _, _, m0, s0 = self._unpack(flat)
        return ad.reshape(m0 + s0 * rng.standard_normal(n), (n, 1))

    def sample_initial(self, params: ParamVector, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sample_initial_tape(params.values, n, rng).value

    def log_initial_tape(self, flat, states) -> ad.Var:
        _, _, _, m0, s0 = self._unpack(flat)
        return _gaussian_logpdf(ad.lift(states)[:, 0], m0, s0)

    # Transition: the action is the next state

    def propagate_tape(self, flat, states, rng: np.random.Generator):
        coef, sigma_x, _, _, _ = self._unpack(flat)
        states = ad.lift(states)
        eps = rng.standard_normal((states.shape[0], 1))
        actions = coef * states + sigma_x * eps
        return actions, actions

    def propagate(self, params: ParamVector, states: np.ndarray,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        next_states, actions = self.propagate_tape(params.values, states, rng)
        return next_states.value, actions.value.copy()

    def log_policy_tape(self, flat, prev_states, actions) -> ad.Var:
        coef, sigma_x, _, _, _ = self._unpack(flat)
        prev = ad.lift(prev_states)[:, 0]
        return _gaussian_logpdf(ad.lift(actions)[:, 0], coef * prev, sigma_x)

    # Observation

    def log_obs_tape(self, flat, states, t: int) -> ad.Var:
        _, _, sigma_y, _, _ = self._unpack(flat)
        return _gaussian_logpdf(self.observations[t], ad.lift(states)[:, 0], sigma_y)

    def log_obs(self, params: ParamVector, states: np.ndarray, t: int) -> np.ndarray:
        return self.log_obs_tape(params.values, states, t).value

    def failure_threshold(self, t: int) -> float:
        return -np.inf


def kalman_filter(ssm: LinearGaussianSSM, observations):
    """
    Exact filtering recursion

    Returns:
        (log-likelihood, filtered means, filtered variances,
         predicted means, predicted variances)
    """
    ys = np.asarray(observations, dtype=np.float64)
    n = len(ys)
    filt_m, filt_p = np.empty(n), np.empty(n)
    pred_m, pred_p = np.empty(n), np.empty(n)
    m, p = ssm.init_mean, ssm.init_std ** 2
    mll = 0.0
    for t in range(n):
        if t > 0:
            m = ssm.coef * m
            p = ssm.coef ** 2 * p + ssm.sigma_x ** 2
        pred_m[t], pred_p[t] = m, p
        s = p + ssm.sigma_y ** 2
        mll += norm.logpdf(ys[t], loc=m, scale=np.sqrt(s))
        gain = p / s
        m = m + gain * (ys[t] - m)
        p = (1.0 - gain) * p
        filt_m[t], filt_p[t] = m, p
    return float(mll), filt_m, filt_p, pred_m, pred_p


def kalman_mll(ssm: LinearGaussianSSM, observations) -> float:
    return kalman_filter(ssm, observations)[0]


def kalman_exact(ssm: LinearGaussianSSM, observations,
                 fd_step: float = 1e-6) -> Tuple[float, np.ndarray]:
    """
    Exact log-likelihood and its gradient in the unconstrained parameters

    Returns:
        (mll, score) with score ordered like LG_LAYOUT
    """
    base = ssm.to_params()
    score = np.empty(LG_LAYOUT.size)
    for i in range(LG_LAYOUT.size):
        up, down = base.copy(), base.copy()
        up.values[i] += fd_step
        down.values[i] -= fd_step
        score[i] = (kalman_mll(LinearGaussianSSM.from_params(up), observations)
                    - kalman_mll(LinearGaussianSSM.from_params(down), observations)) / (2 * fd_step)
    return kalman_mll(ssm, observations), score


def kalman_smoothed_means(ssm: LinearGaussianSSM, observations) -> np.ndarray:
    """Rauch-Tung-Striebel posterior means E[x_t | y_{0:T}]"""
    _, filt_m, filt_p, pred_m, pred_p = kalman_filter(ssm, observations)
    smooth = filt_m.copy()
    for t in range(len(smooth) - 2, -1, -1):
        gain = filt_p[t] * ssm.coef / pred_p[t + 1]
        smooth[t] = filt_m[t] + gain * (smooth[t + 1] - pred_m[t + 1])
    return smooth


def kalman_fixed_lag_means(ssm: LinearGaussianSSM, observations, lag: int) -> np.ndarray:
    """E[x_t | y_{0:min(t+lag, T)}] for every t"""
    ys = np.asarray(observations, dtype=np.float64)
    n = len(ys)
    out = np.empty(n)
    for t in range(n):
        stop = min(t + lag, n - 1)
        out[t] = kalman_smoothed_means(ssm, ys[:stop + 1])[t]
    return out
