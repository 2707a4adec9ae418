"""
Score estimators and their analytic oracles
"""

from .pf_sefi import ScoreEstimate, score_pf_sefi
from .differentiable_pf import score_pf_biased, score_pfnet
from .linear_gaussian import (
    LinearGaussianSSM,
    LinearGaussianFilterModel,
    kalman_exact,
    kalman_filter,
    kalman_mll,
    kalman_fixed_lag_means,
)
from .lemma_check import lemma_check

__all__ = [
    "ScoreEstimate",
    "score_pf_sefi",
    "score_pf_biased",
    "score_pfnet",
    "LinearGaussianSSM",
    "LinearGaussianFilterModel",
    "kalman_exact",
    "kalman_filter",
    "kalman_mll",
    "kalman_fixed_lag_means",
    "lemma_check",
]
