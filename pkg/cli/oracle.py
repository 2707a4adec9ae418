"""
Oracle Suite

Checks the particle machinery against models where the answer is known:

- mll: particle log-likelihood vs the Kalman filter, per seed
- mll_unbiased: mean of exp(estimate - exact) vs 1
- score: mean PF-SEFI score vs the exact Kalman score, per coordinate
- pf_bias: the vanilla pathwise estimator must show a detectable bias
- transition_grad: policy vs transition log-density gradients on a toy model
"""

import logging
from typing import List

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from estimators.differentiable_pf import score_pf_biased
from estimators.lemma_check import lemma_check
from estimators.linear_gaussian import LG_LAYOUT, LinearGaussianSSM, kalman_exact
from estimators.pf_sefi import score_pf_sefi
from filtering.particle_filter import run_filter
from filtering.random_streams import STREAM_ORACLE, make_rng

logger = logging.getLogger(__name__)


class OracleConfig(BaseModel):
    steps: int = Field(25, ge=1)
    seed: int = 0
    mll_particles: int = Field(50_000, ge=2)
    mll_seeds: int = Field(20, ge=2)
    mll_tolerance: float = Field(0.01, gt=0)
    score_particles: int = Field(20_000, ge=2)
    score_seeds: int = Field(50, ge=2)
    score_lag: int = Field(10, ge=0)
    score_tolerance: float = Field(0.05, gt=0)
    bias_sigmas: float = Field(3.0, gt=0)
    lemma_points: int = Field(100, ge=1)
    lemma_tolerance: float = Field(1e-10, gt=0)
    resampling: str = "multinomial"


# Data-generating model, and the parameters the scores are evaluated at
GENERATING_SSM = LinearGaussianSSM(coef=0.9, sigma_x=1.0, sigma_y=0.5, init_mean=0.0, init_std=1.0)
SCORING_SSM = LinearGaussianSSM(coef=0.7, sigma_x=1.4, sigma_y=0.8, init_mean=0.5, init_std=1.5)


def _row(check: str, value: float, tolerance: float, passed: bool, detail: str = "") -> dict:
    return {"check": check, "value": value, "tolerance": tolerance,
            "passed": bool(passed), "detail": detail}


def oracle_data(config: OracleConfig) -> np.ndarray:
    _, ys = GENERATING_SSM.simulate(config.steps, make_rng(config.seed, STREAM_ORACLE, 0))
    return ys


def check_mll(config: OracleConfig, ys: np.ndarray) -> List[dict]:
    params = SCORING_SSM.to_params()
    exact, _ = kalman_exact(SCORING_SSM, ys)
    model = SCORING_SSM.bind(ys)
    estimates = np.array([
        run_filter(model, params, config.mll_particles, 0,
                   make_rng(config.seed, STREAM_ORACLE, 1, i), config.resampling).mll
        for i in range(config.mll_seeds)
    ])
    rel = np.abs(estimates - exact) / abs(exact)
    ratios = np.exp(estimates - exact)
    se = ratios.std(ddof=1) / np.sqrt(len(ratios))
    z = abs(ratios.mean() - 1.0) / se if se > 0 else 0.0
    logger.info("mll oracle: exact %.4f, estimates %.4f +- %.4f", exact,
                estimates.mean(), estimates.std(ddof=1))
    return [
        _row("mll", float(rel.max()), config.mll_tolerance,
             rel.max() <= config.mll_tolerance, f"exact {exact:.4f}"),
        _row("mll_unbiased", float(z), 3.0, z <= 3.0,
             f"mean exp(err) {ratios.mean():.4f}"),
    ]


def check_scores(config: OracleConfig, ys: np.ndarray) -> List[dict]:
    params = SCORING_SSM.to_params()
    _, exact = kalman_exact(SCORING_SSM, ys)
    model = SCORING_SSM.bind(ys)

    sefi = np.stack([
        score_pf_sefi(params, model, config.score_particles, config.score_lag,
                      make_rng(config.seed, STREAM_ORACLE, 2, i), config.resampling).grad
        for i in range(config.score_seeds)
    ])
    vanilla = np.stack([
        score_pf_biased(params, model, config.score_particles,
                        make_rng(config.seed, STREAM_ORACLE, 3, i)).grad
        for i in range(config.score_seeds)
    ])

    rows = []
    sefi_mean = sefi.mean(axis=0)
    for j, seg in enumerate(LG_LAYOUT):
        rel = abs(sefi_mean[j] - exact[j]) / abs(exact[j])
        rows.append(_row(f"score[{seg.name}]", float(rel), config.score_tolerance,
                         rel <= config.score_tolerance,
                         f"estimate {sefi_mean[j]:.4f} exact {exact[j]:.4f}"))

    se = vanilla.std(axis=0, ddof=1) / np.sqrt(len(vanilla))
    z = np.abs(vanilla.mean(axis=0) - exact) / np.where(se > 0, se, np.inf)
    worst = int(np.argmax(z))
    rows.append(_row("pf_bias", float(z[worst]), config.bias_sigmas,
                     z[worst] > config.bias_sigmas,
                     f"largest deviation in {LG_LAYOUT.names[worst]}"))
    return rows


def check_transition_grad(config: OracleConfig) -> List[dict]:
    result = lemma_check(config.lemma_points, config.seed, config.lemma_tolerance)
    return [_row("transition_grad", result.max_abs_diff, result.tolerance, result.passed,
                 f"{result.n_points} points")]


def run_oracle_suite(config: OracleConfig) -> pd.DataFrame:
    """All checks as a table with one row per check"""
    ys = oracle_data(config)
    rows = check_transition_grad(config) + check_mll(config, ys) + check_scores(config, ys)
    return pd.DataFrame(rows, columns=["check", "value", "tolerance", "passed", "detail"])
