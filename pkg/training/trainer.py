"""
Training Loop

Maximum-likelihood training of the tracking model by stochastic gradient
ascent. Every step samples one training scene, scores all of its objects
with the configured estimator, averages the per-trajectory normalised
scores and applies clipping plus an Adam step. Every epoch evaluates the
held-out set and writes a checkpoint and the metrics CSV.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Deque, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from autodiff.params import ParamVector, save_checkpoint
from data.schemas.schema_definitions import ObjectTrajectory
from estimators.differentiable_pf import score_pf_biased, score_pfnet
from estimators.pf_sefi import ScoreEstimate, score_pf_sefi
from filtering.particle_filter import TrackingFailureError
from filtering.random_streams import STREAM_INIT, STREAM_TRAIN, make_rng
from metrics.tracking_metrics import METRIC_COLUMNS, TrackingMetricsCalculator
from models.motion_model import MotionConfig
from models.tracking_ssm import TrackingModel
from .optimizer import AdamState, adam_step, clip_by_global_norm

logger = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    """Too many training trajectories lost track"""

    def __init__(self, step: int, failure_rate: float, failures: List[str]):
        self.step = step
        self.failure_rate = failure_rate
        self.failures = failures
        super().__init__(
            f"training aborted at step {step}: tracking failure rate "
            f"{failure_rate:.0%} ({'; '.join(failures[-5:])})"
        )


class TrainConfig(BaseModel):
    """Training hyper-parameters; defaults follow the synthetic-data setup"""
    learning_rate: float = Field(0.01, ge=0)
    grad_clip: Optional[float] = Field(None, gt=0)
    epochs: int = Field(100, ge=0)
    steps_per_epoch: Optional[int] = Field(None, ge=1)
    n_train: int = Field(1024, ge=2)
    n_eval: int = Field(4096, ge=2)
    lag: int = Field(8, ge=0)
    estimator: Literal["pf_sefi", "pf", "pfnet"] = "pf_sefi"
    pfnet_alpha: float = Field(0.8, ge=0, le=1)
    seed: int = 0
    policy: Literal["simple", "neural"] = "simple"
    dt: float = Field(0.33, gt=0)
    train_segments: Optional[List[str]] = None
    max_train_length: Optional[int] = Field(None, ge=1)
    resampling: Literal["multinomial", "systematic"] = "multinomial"
    threads: int = Field(1, ge=1)
    max_failure_rate: float = Field(0.5, ge=0, le=1)
    failure_window: int = Field(5, ge=1)
    init_sigma_accel: float = Field(1.0, gt=0)
    init_sigma_pinch: float = Field(0.02, gt=0)

    @field_validator("train_segments", mode="before")
    @classmethod
    def _split_segments(cls, value):
        if isinstance(value, str):
            value = [s.strip() for s in value.split(",") if s.strip()]
        return value or None


@dataclass
class TrainResult:
    params: ParamVector
    history: pd.DataFrame
    checkpoints: List[Path] = field(default_factory=list)


def split_windows(trajectory: ObjectTrajectory, max_length: Optional[int]) -> List[ObjectTrajectory]:
    """Consecutive sub-trajectories of at most max_length steps each"""
    T = trajectory.n_steps
    if max_length is None or T <= max_length:
        return [trajectory]
    return [trajectory.window(start, min(start + max_length, T))
            for start in range(0, T, max_length)]


class Trainer:
    """Runs the training protocol for one configuration"""

    def __init__(self, config: TrainConfig, model: Optional[TrackingModel] = None,
                 output_dir: Optional[Path] = None):
        """
        Args:
            config: hyper-parameters
            model: tracking model; built from config.policy/dt when omitted
            output_dir: where checkpoints and metrics.csv go (nothing written if None)
        """
        self.config = config
        self.model = model or TrackingModel(config.policy, MotionConfig(dt=config.dt))
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.mask = self.model.layout.mask(config.train_segments)
        self.recent_failures: Deque[float] = deque(maxlen=config.failure_window)
        self.failure_log: List[str] = []

    def initial_params(self) -> ParamVector:
        return self.model.init_params(
            make_rng(self.config.seed, STREAM_INIT),
            self.config.init_sigma_accel, self.config.init_sigma_pinch,
        )

    def score_trajectory(self, params: ParamVector, trajectory: ObjectTrajectory,
                         rng: np.random.Generator) -> ScoreEstimate:
        """Score estimate of one trajectory; a lost track yields failed=True"""
        cfg = self.config
        ssm = self.model.bind(trajectory)
        try:
            if cfg.estimator == "pf_sefi":
                return score_pf_sefi(params, ssm, cfg.n_train, cfg.lag, rng, cfg.resampling)
            if cfg.estimator == "pf":
                return score_pf_biased(params, ssm, cfg.n_train, rng)
            return score_pfnet(params, ssm, cfg.n_train, cfg.pfnet_alpha, rng)
        except TrackingFailureError as exc:
            return ScoreEstimate(np.zeros(len(params)), 0.0, float("nan"),
                                 failed=True, failure_time=exc.time_index)

    def scene_gradient(self, params: ParamVector, scene: Sequence[ObjectTrajectory],
                       step: int):
        """Mean per-trajectory normalised score over every window of a scene, None if all failed"""
        pieces = [w for traj in scene for w in split_windows(traj, self.config.max_train_length)]
        rngs = [make_rng(self.config.seed, STREAM_TRAIN, step, i) for i in range(len(pieces))]

        if self.config.threads > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                estimates = list(pool.map(self.score_trajectory,
                                          [params] * len(pieces), pieces, rngs))
        else:
            estimates = [self.score_trajectory(params, p, r) for p, r in zip(pieces, rngs)]

        ok = [e for e in estimates if not e.failed]
        for i, e in enumerate(estimates):
            if e.failed:
                self.failure_log.append(f"step {step} object {i} t={e.failure_time}")
        failure_rate = 1.0 - len(ok) / len(estimates)
        if not ok:
            return None, float("nan"), float("nan"), failure_rate

        grad = np.mean([e.normalized() for e in ok], axis=0)
        mll = float(np.mean([e.mll / e.weight_total for e in ok]))
        ess_means = [e.ess.mean() for e in ok if e.ess.size]
        ess = float(np.mean(ess_means)) if ess_means else float("nan")
        return grad, mll, ess, failure_rate

    def train_step(self, params: ParamVector, state: AdamState,
                   scene: Sequence[ObjectTrajectory], step: int):
        grad, mll, ess, failure_rate = self.scene_gradient(params, scene, step)
        self.recent_failures.append(failure_rate)
        window_rate = float(np.mean(self.recent_failures))
        if (len(self.recent_failures) == self.recent_failures.maxlen
                and window_rate > self.config.max_failure_rate):
            raise TrainingAborted(step, window_rate, self.failure_log)
        if grad is None:
            logger.warning("step %d: every trajectory lost track, parameters left unchanged", step)
            return

        grad = np.where(self.mask, grad, 0.0)
        grad, norm = clip_by_global_norm(grad, self.config.grad_clip)
        adam_step(params, grad, state, self.config.learning_rate)
        logger.info("step %d: train mll/step %.4f, grad norm %.3g, mean ESS %.1f, failures %.0f%%",
                    step, mll, norm, ess, 100 * failure_rate)

    def evaluate(self, params: ParamVector, eval_set: Sequence[ObjectTrajectory], step: int) -> dict:
        calc = TrackingMetricsCalculator(self.model, self.config.n_eval, self.config.lag,
                                         self.config.seed, self.config.resampling,
                                         self.config.threads)
        report = calc.evaluate(params, eval_set)
        logger.info("eval at step %d: mll/step %.4f, ADE(s) %s, failures %d",
                    step, report.mll, report.ade_smooth, report.failures)
        return report.to_row(train_step=step)

    def write_metrics(self, rows: List[dict]):
        if self.output_dir is None:
            return
        path = self.output_dir / "metrics.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(rows).reindex(columns=METRIC_COLUMNS)
        with open(path, "w") as fh:
            fh.write(METRICS_HEADER)
            frame.to_csv(fh, index=False)

    def checkpoint(self, params: ParamVector, epoch: int, step: int) -> Optional[Path]:
        if self.output_dir is None:
            return None
        path = self.output_dir / "checkpoints" / f"epoch_{epoch:03d}.ckpt"
        save_checkpoint(path, params, {
            "policy": self.model.policy_kind,
            "dt": self.model.motion.dt,
            "epoch": epoch,
            "train_step": step,
            "estimator": self.config.estimator,
        })
        return path

    def fit(self, train_scenes: Sequence[Sequence[ObjectTrajectory]],
            eval_set: Sequence[ObjectTrajectory],
            params: Optional[ParamVector] = None) -> TrainResult:
        """
        Train from `params` (or a fresh initialisation)

        Returns:
            TrainResult with the final parameters, the metrics history and
            the checkpoint paths
        """
        if not train_scenes or not all(train_scenes):
            raise ValueError("training set needs at least one non-empty scene")
        params = params.copy() if params is not None else self.initial_params()
        self.model.check_params(params)

        state = AdamState.for_params(params)
        scene_rng = make_rng(self.config.seed, STREAM_TRAIN)
        steps_per_epoch = self.config.steps_per_epoch or len(train_scenes)

        rows = [self.evaluate(params, eval_set, 0)]
        self.write_metrics(rows)
        checkpoints = [self.checkpoint(params, 0, 0)]
        step = 0
        for epoch in range(1, self.config.epochs + 1):
            for _ in range(steps_per_epoch):
                step += 1
                scene = train_scenes[int(scene_rng.integers(len(train_scenes)))]
                self.train_step(params, state, scene, step)
            rows.append(self.evaluate(params, eval_set, step))
            self.write_metrics(rows)
            checkpoints.append(self.checkpoint(params, epoch, step))
            logger.info("epoch %d/%d done", epoch, self.config.epochs)

        if state.skipped:
            logger.warning("%d updates skipped for non-finite gradients", state.skipped)
        history = pd.DataFrame(rows).reindex(columns=METRIC_COLUMNS)
        return TrainResult(params, history, [c for c in checkpoints if c is not None])


def train(config: TrainConfig, train_scenes: Sequence[Sequence[ObjectTrajectory]],
          eval_set: Sequence[ObjectTrajectory], output_dir: Optional[Path] = None,
          params: Optional[ParamVector] = None) -> TrainResult:
    return Trainer(config, output_dir=output_dir).fit(train_scenes, eval_set, params)


METRICS_HEADER = (
    "# mll: log-likelihood estimate per observation step, i.e. divided by T+1; "
    "aotll per observation; aptll per action\n"
)
