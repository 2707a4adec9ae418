"""
Bootstrap particle filtering with fixed-lag path buffers
"""

from .particle_filter import (
    TrackingFailureError,
    ParticleCloud,
    FilterResult,
    EmittedColumn,
    LagPaths,
    init,
    step,
    run_filter,
    trace_column,
    lag_smoothed_marginals,
    weighted_state_mean,
)
from .resampling import (
    resample_multinomial,
    resample_systematic,
    resample_soft,
    effective_sample_size,
)
from .random_streams import make_rng

__all__ = [
    "TrackingFailureError",
    "ParticleCloud",
    "FilterResult",
    "EmittedColumn",
    "LagPaths",
    "init",
    "step",
    "run_filter",
    "trace_column",
    "lag_smoothed_marginals",
    "weighted_state_mean",
    "resample_multinomial",
    "resample_systematic",
    "resample_soft",
    "effective_sample_size",
    "make_rng",
]
