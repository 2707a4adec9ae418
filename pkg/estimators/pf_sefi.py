"""
Fixed-lag Fisher-identity score estimator

The score of the marginal log-likelihood is the smoothing expectation of
the complete-data log-density gradient. With a deterministic injective
motion model the transition term reduces to the policy log-density of the
sampled action, so every time index t contributes

    sum_i w_s^i [grad log g(y_t | x_t^i) + grad log pi(a_t^i | x_{t-1}^i)]

where the particles are the ancestors at t of the cloud at s = min(t+L, T)
and w_s are that cloud's weights. Gradients only flow through the density
evaluations at fixed (state, action) values: resampling and the motion
model are never differentiated. One backward pass per emitted time.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from autodiff import tape as ad
from autodiff.params import GradAccumulator, ParamVector, accumulate_weighted
from filtering.particle_filter import EmittedColumn, run_filter

logger = logging.getLogger(__name__)


@dataclass
class ScoreEstimate:
    """Gradient of the log-likelihood estimate plus filter diagnostics"""
    grad: np.ndarray
    weight_total: float
    mll: float
    per_step_mll: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ess: np.ndarray = field(default_factory=lambda: np.zeros(0))
    failed: bool = False
    failure_time: Optional[int] = None

    def normalized(self) -> np.ndarray:
        """Score per observation step"""
        if self.weight_total <= 0:
            return np.zeros_like(self.grad)
        return self.grad / self.weight_total


def complete_data_objective(model, flat: ad.Var, column: EmittedColumn) -> ad.Var:
    """Weighted log g + log pi (+ log mu at t=0) of one emitted column"""
    weights = column.weights
    objective = ad.sum_(weights * model.log_obs_tape(flat, column.states, column.t))
    if column.actions is not None:
        log_pi = model.log_policy_tape(flat, column.prev_states, column.actions)
        objective = objective + ad.sum_(weights * log_pi)
    if column.t == 0:
        log_mu = model.log_initial_tape(flat, column.states)
        if log_mu is not None:
            objective = objective + ad.sum_(weights * log_mu)
    return objective


def score_pf_sefi(params: ParamVector, model, n_particles: int, lag: int,
                  rng: np.random.Generator, resampling: str = "multinomial") -> ScoreEstimate:
    """
    Fixed-lag smoothed score estimate for one trajectory

    Args:
        params: parameter vector
        model: state-space model bound to the trajectory
        n_particles: particle count (>= 2)
        lag: fixed lag L (>= 0)
        rng: random stream of this trajectory
        resampling: 'multinomial' or 'systematic'

    Returns:
        ScoreEstimate whose weight_total counts the T+1 emitted times
    """
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    acc = GradAccumulator.for_params(params)

    def on_emit(column: EmittedColumn):
        tape = ad.Tape()
        flat = params.as_var(tape)
        grads = tape.backward(complete_data_objective(model, flat, column))
        accumulate_weighted(acc, grads[flat], 1.0)

    result = run_filter(model, params, n_particles, lag, rng, resampling, on_emit)
    return ScoreEstimate(
        grad=acc.grads,
        weight_total=acc.weight_total,
        mll=result.mll,
        per_step_mll=result.per_step_mll,
        ess=result.ess,
    )
