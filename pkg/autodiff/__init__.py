"""
Reverse-mode differentiation, parameter storage and small networks
"""

from .tape import Tape, Var
from .params import (
    ParamLayout,
    ParamVector,
    GradAccumulator,
    CheckpointError,
    accumulate_weighted,
    glorot_init,
    save_checkpoint,
    load_checkpoint,
)
from .mlp import MLPArchitecture, mlp_forward

__all__ = [
    "Tape",
    "Var",
    "ParamLayout",
    "ParamVector",
    "GradAccumulator",
    "CheckpointError",
    "accumulate_weighted",
    "glorot_init",
    "save_checkpoint",
    "load_checkpoint",
    "MLPArchitecture",
    "mlp_forward",
]
