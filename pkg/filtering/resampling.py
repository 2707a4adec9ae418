"""
Resampling schemes

All schemes take unnormalised log-weights and return ancestor indices.
Normalisation is done in log space, so clouds whose best log-weight is far
below zero resample exactly like well-scaled ones.
"""

from typing import Tuple

import numpy as np
from scipy.special import logsumexp


def normalized_weights(log_weights: np.ndarray) -> np.ndarray:
    """Linear weights summing to one; requires one finite log-weight"""
    log_weights = np.asarray(log_weights, dtype=np.float64)
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise ValueError("resampling needs at least one finite log-weight")
    return np.exp(log_weights - total)


def effective_sample_size(log_weights: np.ndarray) -> float:
    w = normalized_weights(log_weights)
    return float(1.0 / np.sum(w ** 2))


def _inverse_cdf(weights: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, uniforms, side="right")
    return np.minimum(idx, len(weights) - 1)


def resample_multinomial(log_weights: np.ndarray, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. categorical draws of ancestor indices"""
    return _inverse_cdf(normalized_weights(log_weights), rng.random(n))


def resample_systematic(log_weights: np.ndarray, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling with one shared uniform offset"""
    uniforms = (rng.random() + np.arange(n)) / n
    return _inverse_cdf(normalized_weights(log_weights), uniforms)


def soft_proposal_log_probs(log_weights: np.ndarray, alpha: float) -> np.ndarray:
    """log q_i with q_i = alpha * w_i + (1 - alpha) / N"""
    w = normalized_weights(log_weights)
    with np.errstate(divide="ignore"):
        return np.log(alpha * w + (1.0 - alpha) / len(w))


def resample_soft(log_weights: np.ndarray, n: int, alpha: float,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ancestors drawn from the weight/uniform mixture

    Args:
        log_weights: unnormalised log-weights
        n: number of draws
        alpha: 1 gives multinomial resampling, 0 uniform ancestors

    Returns:
        (ancestor indices, corrective log-weights log(w_i / q_i) of the draws)
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    log_q = soft_proposal_log_probs(log_weights, alpha)
    idx = _inverse_cdf(np.exp(log_q), rng.random(n))
    log_w = np.asarray(log_weights) - logsumexp(log_weights)
    return idx, log_w[idx] - log_q[idx]


RESAMPLERS = {
    "multinomial": resample_multinomial,
    "systematic": resample_systematic,
}


def get_resampler(name: str):
    try:
        return RESAMPLERS[name]
    except KeyError:
        raise ValueError(f"unknown resampling scheme '{name}'") from None
