"""
Pathwise-gradient baselines

Both estimators differentiate the particle log-likelihood estimate itself
through reparameterised action sampling, the motion model and the
log-mean-exp weight increments over all steps, with ancestor indices held
constant. One tape spans the whole sequence, so memory grows with T.

- score_pf_biased: plain multinomial resampling; ignores the resampling
  contribution and is therefore biased.
- score_pfnet: soft resampling from alpha*w + (1-alpha)/N with the
  corrective weights w/q kept differentiable inside the estimate.
"""

import logging
from typing import Optional

import numpy as np

from autodiff import tape as ad
from autodiff.params import ParamVector
from filtering.particle_filter import TrackingFailureError
from filtering.resampling import effective_sample_size, resample_multinomial, resample_soft
from .pf_sefi import ScoreEstimate

logger = logging.getLogger(__name__)


def _check(log_weights: np.ndarray, threshold: float, t: int):
    best = np.max(log_weights)
    if not np.isfinite(best) or best <= threshold:
        raise TrackingFailureError(t)


def _differentiable_filter(params: ParamVector, model, n_particles: int,
                           rng: np.random.Generator,
                           alpha: Optional[float] = None) -> ScoreEstimate:
    if n_particles < 2:
        raise ValueError(f"n_particles must be >= 2, got {n_particles}")
    log_n = np.log(n_particles)
    tape = ad.Tape()
    flat = params.as_var(tape)

    states = model.sample_initial_tape(flat, n_particles, rng)
    log_w = model.log_obs_tape(flat, states, 0)
    _check(log_w.value, model.failure_threshold(0), 0)
    mll = ad.logsumexp(log_w, axis=0) - log_n
    per_step = [float(mll.value)]
    ess = [effective_sample_size(log_w.value)]

    for t in range(1, model.n_steps + 1):
        corrective = None
        if alpha is None:
            parents = resample_multinomial(log_w.value, n_particles, rng)
        else:
            parents, _ = resample_soft(log_w.value, n_particles, alpha, rng)
            log_w_norm = ad.log_softmax(log_w, axis=0)
            log_q = ad.log(alpha * ad.exp(log_w_norm) + (1.0 - alpha) / n_particles)
            corrective = log_w_norm[parents] - log_q[parents]

        states, _ = model.propagate_tape(flat, states[parents], rng)
        log_g = model.log_obs_tape(flat, states, t)
        log_w = log_g if corrective is None else corrective + log_g
        _check(log_w.value, model.failure_threshold(t), t)

        increment = ad.logsumexp(log_w, axis=0) - log_n
        per_step.append(float(increment.value))
        ess.append(effective_sample_size(log_w.value))
        mll = mll + increment

    grads = tape.backward(mll)
    return ScoreEstimate(
        grad=grads[flat],
        weight_total=float(model.n_steps + 1),
        mll=float(mll.value),
        per_step_mll=np.asarray(per_step),
        ess=np.asarray(ess),
    )


def score_pf_biased(params: ParamVector, model, n_particles: int,
                    rng: np.random.Generator) -> ScoreEstimate:
    """Gradient of the vanilla particle log-likelihood estimate"""
    return _differentiable_filter(params, model, n_particles, rng)


def score_pfnet(params: ParamVector, model, n_particles: int, alpha: float,
                rng: np.random.Generator) -> ScoreEstimate:
    """Gradient of the soft-resampling log-likelihood estimate"""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return _differentiable_filter(params, model, n_particles, rng, alpha=alpha)
