"""
Feed-forward networks over a flat parameter vector

Weights live in a `ParamLayout` under `<prefix>.w<i>` (shape in x out) and
`<prefix>.b<i>`; the forward pass accepts plain arrays or tape values.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import tape as ad


_ACTIVATIONS = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "softplus": ad.softplus,
}


@dataclass(frozen=True)
class MLPArchitecture:
    """Layer widths from input to output, hidden activation, linear output"""
    layer_sizes: Tuple[int, ...]
    hidden_activation: str = "tanh"
    output_activation: Optional[str] = None

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        for act in (self.hidden_activation, self.output_activation):
            if act is not None and act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation '{act}'")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))

    def segments(self, prefix: str) -> List[Tuple[str, Tuple[int, ...]]]:
        out = []
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            out.append((f"{prefix}.w{i}", (fan_in, fan_out)))
            out.append((f"{prefix}.b{i}", (fan_out,)))
        return out


def mlp_forward(flat, layout, prefix: str, inputs, architecture: MLPArchitecture) -> ad.Var:
    """
    Evaluate the network on a batch of inputs

    Args:
        flat: full parameter vector (array or tape value)
        layout: ParamLayout containing the `prefix` segments
        prefix: segment name prefix of this network
        inputs: (n_inputs,) or (batch, n_inputs)
        architecture: layer specification

    Returns:
        Var of shape (batch, n_outputs), or (n_outputs,) for a single input
    """
    x = ad.lift(inputs)
    single = x.ndim == 1
    if single:
        x = ad.reshape(x, (1, -1))
    if x.ndim != 2 or x.shape[1] != architecture.n_inputs:
        raise ValueError(
            f"network '{prefix}' expects {architecture.n_inputs} inputs, got shape {x.shape}"
        )

    n_layers = len(architecture.layer_sizes) - 1
    for i in range(n_layers):
        w = layout.take(flat, f"{prefix}.w{i}")
        b = layout.take(flat, f"{prefix}.b{i}")
        x = ad.matmul(x, w) + b
        if i < n_layers - 1:
            x = _ACTIVATIONS[architecture.hidden_activation](x)
        elif architecture.output_activation is not None:
            x = _ACTIVATIONS[architecture.output_activation](x)

    if single:
        x = ad.reshape(x, (architecture.n_outputs,))
    return x
