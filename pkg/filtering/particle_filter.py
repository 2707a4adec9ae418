"""
Bootstrap Particle Filter

Resamples at every step, proposes from the model transition and weights
by the observation density. Each step pushes a column (states, actions,
parent indices, parent states) into a ring buffer of depth lag + 1, so the
ancestral paths of the current particles over the last `lag` steps can be
traced back for fixed-lag smoothing.

Ordering at step t: the weights of y_{t-1} drive resampling, survivors are
propagated, and the new weights come from y_t. No resampling happens after
the final observation.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Optional, Protocol, Tuple

import numpy as np
from scipy.special import logsumexp

from .resampling import effective_sample_size, get_resampler, normalized_weights

logger = logging.getLogger(__name__)


class TrackingFailureError(RuntimeError):
    """Every particle lost the object: no usable weight is left"""

    def __init__(self, time_index: int, message: Optional[str] = None):
        self.time_index = int(time_index)
        super().__init__(message or f"all particle weights vanished at t={time_index}")


class StateSpaceModel(Protocol):
    """What the filter needs from a model bound to one observation sequence"""

    n_steps: int
    state_dim: int

    def sample_initial(self, params, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def propagate(self, params, states: np.ndarray,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]: ...

    def log_obs(self, params, states: np.ndarray, t: int) -> np.ndarray: ...

    def failure_threshold(self, t: int) -> float: ...


@dataclass
class LagColumn:
    """Particles at one time with the action and parent that produced them"""
    t: int
    states: np.ndarray
    actions: Optional[np.ndarray] = None
    parents: Optional[np.ndarray] = None
    prev_states: Optional[np.ndarray] = None


@dataclass
class ParticleCloud:
    states: np.ndarray  # (N, state_dim)
    log_weights: np.ndarray  # (N,), unnormalised
    actions_last: Optional[np.ndarray]
    buffer: Deque[LagColumn]
    t: int
    lag: int

    @property
    def n_particles(self) -> int:
        return len(self.states)

    def weights(self) -> np.ndarray:
        return normalized_weights(self.log_weights)

    def ess(self) -> float:
        return effective_sample_size(self.log_weights)


@dataclass
class EmittedColumn:
    """Lag-smoothed particles of one time index, weighted by the current weights"""
    t: int
    states: np.ndarray
    actions: Optional[np.ndarray]
    prev_states: Optional[np.ndarray]
    weights: np.ndarray


@dataclass
class LagPaths:
    """Ancestral paths of the current particles over the buffered window"""
    times: List[int]
    states: np.ndarray  # (N, k, state_dim)
    actions: np.ndarray  # (N, k, action_dim); NaN where no action exists
    weights: np.ndarray  # (N,)


@dataclass
class FilterResult:
    mll: float
    per_step_mll: np.ndarray  # (T+1,)
    filtered_means: np.ndarray  # (T+1, state_dim)
    lag_smoothed_means: np.ndarray  # (T+1, state_dim)
    ess: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _check_weights(log_weights: np.ndarray, threshold: float, t: int):
    best = np.max(log_weights)
    if not np.isfinite(best) or best <= threshold:
        raise TrackingFailureError(t)


def _increment(log_weights: np.ndarray) -> float:
    return float(logsumexp(log_weights) - np.log(len(log_weights)))


def init(model: StateSpaceModel, params, n_particles: int, lag: int,
         rng: np.random.Generator) -> Tuple[ParticleCloud, float]:
    """
    Sample the initial cloud and weight it by the first observation

    Returns:
        (cloud at t=0, log-likelihood estimate of y_0)
    """
    if n_particles < 2:
        raise ValueError(f"n_particles must be >= 2, got {n_particles}")
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    states = model.sample_initial(params, n_particles, rng)
    log_weights = model.log_obs(params, states, 0)
    _check_weights(log_weights, model.failure_threshold(0), 0)
    buffer: Deque[LagColumn] = deque(maxlen=lag + 1)
    buffer.append(LagColumn(0, states))
    cloud = ParticleCloud(states, log_weights, None, buffer, 0, lag)
    return cloud, _increment(log_weights)


def step(cloud: ParticleCloud, model: StateSpaceModel, params,
         rng: np.random.Generator, resampling: str = "multinomial") -> Tuple[ParticleCloud, float]:
    """Resample, propagate and reweight; the cloud is updated in place"""
    t = cloud.t + 1
    parents = get_resampler(resampling)(cloud.log_weights, cloud.n_particles, rng)
    prev_states = cloud.states[parents]
    states, actions = model.propagate(params, prev_states, rng)
    log_weights = model.log_obs(params, states, t)
    _check_weights(log_weights, model.failure_threshold(t), t)

    cloud.buffer.append(LagColumn(t, states, actions, parents, prev_states))
    cloud.states = states
    cloud.log_weights = log_weights
    cloud.actions_last = actions
    cloud.t = t
    return cloud, _increment(log_weights)


def trace_column(cloud: ParticleCloud, t: int) -> EmittedColumn:
    """Ancestors at time t of every current particle"""
    idx = np.arange(cloud.n_particles)
    for column in reversed(cloud.buffer):
        if column.t == t:
            return EmittedColumn(
                t=t,
                states=column.states[idx],
                actions=None if column.actions is None else column.actions[idx],
                prev_states=None if column.prev_states is None else column.prev_states[idx],
                weights=cloud.weights(),
            )
        idx = column.parents[idx]
    raise ValueError(f"time {t} is outside the lag buffer of the cloud at t={cloud.t}")


def lag_smoothed_marginals(cloud: ParticleCloud) -> LagPaths:
    """Weighted paths x_{t-L..t}, a_{t-L..t} of the current particles"""
    columns = list(cloud.buffer)
    n = cloud.n_particles
    state_dim = cloud.states.shape[1]
    action_dim = 0 if cloud.actions_last is None else cloud.actions_last.shape[1]

    states = np.empty((n, len(columns), state_dim))
    actions = np.full((n, len(columns), action_dim), np.nan)
    idx = np.arange(n)
    for k in range(len(columns) - 1, -1, -1):
        column = columns[k]
        states[:, k] = column.states[idx]
        if column.actions is not None:
            actions[:, k] = column.actions[idx]
        if k > 0:
            idx = column.parents[idx]
    return LagPaths([c.t for c in columns], states, actions, cloud.weights())


def weighted_state_mean(states: np.ndarray, weights: np.ndarray,
                        angle_columns=()) -> np.ndarray:
    """Weighted mean with circular averaging of angle columns"""
    mean = weights @ states
    for col in angle_columns:
        mean[col] = np.arctan2(weights @ np.sin(states[:, col]),
                               weights @ np.cos(states[:, col]))
    return mean


def run_filter(model: StateSpaceModel, params, n_particles: int, lag: int,
               rng: np.random.Generator, resampling: str = "multinomial",
               on_emit: Optional[Callable[[EmittedColumn], None]] = None) -> FilterResult:
    """
    Filter the whole sequence, emitting each time index once

    Time t is emitted when the filter reaches t + lag, or at the final step
    for the tail. `on_emit` receives every emitted column in time order.
    """
    angles = getattr(model, "angle_columns", ())
    n_steps = model.n_steps
    smoothed = np.full((n_steps + 1, model.state_dim), np.nan)
    emitted = np.zeros(n_steps + 1, dtype=bool)

    cloud, increment = init(model, params, n_particles, lag, rng)
    per_step = [increment]
    filtered = [weighted_state_mean(cloud.states, cloud.weights(), angles)]
    ess = [cloud.ess()]

    def emit_ready(final: bool):
        s = cloud.t
        times = range(max(0, s - lag), s + 1) if final else [s - lag]
        for t in times:
            if t < 0 or emitted[t]:
                continue
            column = trace_column(cloud, t)
            smoothed[t] = weighted_state_mean(column.states, column.weights, angles)
            if on_emit is not None:
                on_emit(column)
            emitted[t] = True

    emit_ready(final=n_steps == 0)
    for s in range(1, n_steps + 1):
        cloud, increment = step(cloud, model, params, rng, resampling)
        per_step.append(increment)
        filtered.append(weighted_state_mean(cloud.states, cloud.weights(), angles))
        ess.append(cloud.ess())
        emit_ready(final=s == n_steps)

    per_step = np.asarray(per_step)
    return FilterResult(
        mll=float(per_step.sum()),
        per_step_mll=per_step,
        filtered_means=np.asarray(filtered),
        lag_smoothed_means=smoothed,
        ess=np.asarray(ess),
    )
