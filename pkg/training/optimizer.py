"""
Adam Optimizer

Gradient ascent on the log-likelihood, written as Adam descent on the
negated score, plus global-norm gradient clipping.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from autodiff.params import ParamVector

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates and the step counter"""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    skipped: int = 0

    @classmethod
    def for_params(cls, params: ParamVector) -> "AdamState":
        return cls(np.zeros(len(params)), np.zeros(len(params)))


def global_norm(grad: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(grad))))


def clip_by_global_norm(grad: np.ndarray, max_norm: Optional[float]) -> Tuple[np.ndarray, float]:
    """
    Scale `grad` so that its Euclidean norm is at most max_norm

    Returns:
        (clipped gradient, norm before clipping)
    """
    norm = global_norm(grad)
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grad, norm
    return grad * (max_norm / norm), norm


def adam_step(params: ParamVector, grad: np.ndarray, state: AdamState, lr: float,
              betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> bool:
    """
    One in-place Adam ascent step on `params` along the score `grad`

    Args:
        params: parameters, updated in place
        grad: estimated score (gradient of the log-likelihood)
        state: moment estimates, updated in place
        lr: learning rate
        betas: moment decay rates
        eps: denominator offset

    Returns:
        False when the gradient was non-finite and the update was skipped
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.values.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {params.values.shape}")
    if not np.all(np.isfinite(grad)):
        state.skipped += 1
        logger.warning("non-finite gradient at step %d; update skipped", state.step + 1)
        return False

    beta1, beta2 = betas
    descent = -grad
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * descent
    state.v = beta2 * state.v + (1.0 - beta2) * descent ** 2
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    params.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return True
