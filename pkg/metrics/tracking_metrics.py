"""
Tracking Metrics Calculation

Held-out evaluation of a parameter vector on a set of object trajectories:
per-step marginal log-likelihood from the particle filter, displacement
and yaw errors of the filtered and lag-smoothed state estimates, and the
observation/policy log-likelihoods of the ground truth.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from autodiff.params import ParamVector
from data.schemas.geometry import wrap_angle
from data.schemas.schema_definitions import ObjectTrajectory
from filtering.particle_filter import TrackingFailureError, run_filter
from filtering.random_streams import STREAM_EVAL, make_rng
from models.tracking_ssm import TrackingModel

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    """Dataset-level averages; None when the dataset lacks the ground truth"""
    mll: float  # nats per observation step
    ade_smooth: Optional[float]  # meters
    ade_filter: Optional[float]
    aye_smooth: Optional[float]  # radians
    aye_filter: Optional[float]
    aotll: Optional[float]  # nats per observation
    aptll: Optional[float]  # nats per action
    n_trajectories: int
    failures: int

    def to_row(self, **extra) -> Dict:
        row = dict(extra)
        row.update({
            "mll": self.mll,
            "ade_s": self.ade_smooth,
            "ade_f": self.ade_filter,
            "aye_s": self.aye_smooth,
            "aye_f": self.aye_filter,
            "aotll": self.aotll,
            "aptll": self.aptll,
            "failures": self.failures,
        })
        return row


class TrackingMetricsCalculator:
    """Runs the particle filter per trajectory and aggregates the metrics"""

    def __init__(self, model: TrackingModel, n_particles: int = 4096, lag: int = 8,
                 seed: int = 0, resampling: str = "multinomial", threads: int = 1):
        """
        Args:
            model: tracking model the parameters belong to
            n_particles: particles per trajectory
            lag: fixed lag of the smoothed estimates
            seed: evaluation seed; each trajectory gets its own stream
            resampling: 'multinomial' or 'systematic'
            threads: worker threads across trajectories
        """
        self.model = model
        self.n_particles = n_particles
        self.lag = lag
        self.seed = seed
        self.resampling = resampling
        self.threads = max(1, int(threads))

    @staticmethod
    def displacement_error(estimates: np.ndarray, truth: np.ndarray) -> float:
        """Mean Euclidean distance between estimated and true positions"""
        return float(np.mean(np.hypot(estimates[:, 0] - truth[:, 0],
                                      estimates[:, 1] - truth[:, 1])))

    @staticmethod
    def yaw_error(estimates: np.ndarray, truth: np.ndarray) -> float:
        """Mean absolute wrapped heading difference"""
        return float(np.mean(np.abs(wrap_angle(estimates[:, 2] - truth[:, 2]))))

    def ground_truth_log_likelihoods(self, params: ParamVector,
                                     trajectory: ObjectTrajectory) -> Dict[str, Optional[float]]:
        """AOTLL and APTLL of one trajectory"""
        out = {"aotll": None, "aptll": None}
        if not trajectory.has_ground_truth:
            return out
        ssm = self.model.bind(trajectory)
        states = trajectory.states_array()
        out["aotll"] = float(np.mean([
            ssm.log_obs(params, states[t:t + 1], t)[0] for t in range(len(states))
        ]))
        if trajectory.actions is not None and trajectory.n_steps > 0:
            out["aptll"] = float(np.mean(self.model.policy.logpdf_batch(
                params, states[:-1], trajectory.actions_array()
            )))
        return out

    def trajectory_metrics(self, params: ParamVector, trajectory: ObjectTrajectory,
                           index: int) -> Optional[Dict]:
        """Metrics of one trajectory, or None when tracking failed"""
        ssm = self.model.bind(trajectory)
        rng = make_rng(self.seed, STREAM_EVAL, index)
        try:
            result = run_filter(ssm, params, self.n_particles, self.lag, rng, self.resampling)
        except TrackingFailureError as exc:
            logger.warning("evaluation: trajectory %d lost at t=%d", index, exc.time_index)
            return None

        row = {"mll": result.mll / (trajectory.n_steps + 1),
               "ade_s": None, "ade_f": None, "aye_s": None, "aye_f": None}
        if trajectory.has_ground_truth:
            truth = trajectory.states_array()
            row["ade_s"] = self.displacement_error(result.lag_smoothed_means, truth)
            row["ade_f"] = self.displacement_error(result.filtered_means, truth)
            row["aye_s"] = self.yaw_error(result.lag_smoothed_means, truth)
            row["aye_f"] = self.yaw_error(result.filtered_means, truth)
        row.update(self.ground_truth_log_likelihoods(params, trajectory))
        return row

    def evaluate(self, params: ParamVector, dataset: Sequence[ObjectTrajectory]) -> MetricsReport:
        self.model.check_params(params)
        if not dataset:
            raise ValueError("evaluation dataset is empty")
        if not all(t.has_ground_truth for t in dataset):
            logger.warning("dataset lacks ground-truth states; ADE/AYE/AOTLL omitted")

        indices = range(len(dataset))
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                rows = list(pool.map(
                    lambda i: self.trajectory_metrics(params, dataset[i], i), indices
                ))
        else:
            rows = [self.trajectory_metrics(params, dataset[i], i) for i in indices]

        kept = [r for r in rows if r is not None]
        failures = len(rows) - len(kept)
        if not kept:
            return MetricsReport(float("nan"), None, None, None, None, None, None,
                                 len(dataset), failures)

        frame = pd.DataFrame(kept, dtype=float)

        def column_mean(name: str) -> Optional[float]:
            values = frame[name].dropna()
            return float(values.mean()) if len(values) == len(frame) else None

        return MetricsReport(
            mll=float(frame["mll"].mean()),
            ade_smooth=column_mean("ade_s"),
            ade_filter=column_mean("ade_f"),
            aye_smooth=column_mean("aye_s"),
            aye_filter=column_mean("aye_f"),
            aotll=column_mean("aotll"),
            aptll=column_mean("aptll"),
            n_trajectories=len(dataset),
            failures=failures,
        )


def evaluate(params: ParamVector, dataset: Sequence[ObjectTrajectory], n_eval: int,
             lag: int, seed: int, model: Optional[TrackingModel] = None,
             **kwargs) -> MetricsReport:
    """Evaluate `params` on `dataset` with n_eval particles and lag `lag`"""
    if model is None:
        model = TrackingModel()
    return TrackingMetricsCalculator(model, n_eval, lag, seed, **kwargs).evaluate(params, dataset)


# Columns of the metrics CSV
METRIC_COLUMNS = ["train_step", "mll", "ade_s", "ade_f", "aye_s", "aye_f",
                  "aotll", "aptll", "failures"]
