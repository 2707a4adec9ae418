"""
Parameter Store

Flat float64 parameter vector partitioned into named segments, the
gradient accumulator of the same shape, and the binary checkpoint format.

Checkpoint layout: one magic line, one JSON header line (segments, dtype,
value count, sha256 of the payload, free-form metadata), then the raw
little-endian float64 payload.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .tape import Tape, Var, getitem, lift, reshape


CHECKPOINT_MAGIC = b"PFSEFI-CKPT 1\n"
CHECKPOINT_DTYPE = "<f8"


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or fails its checksum"""


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1

    @property
    def stop(self) -> int:
        return self.offset + self.size


class ParamLayout:
    """Ordered named segments that partition a flat vector exactly"""

    def __init__(self, segments: Iterable[Tuple[str, Sequence[int]]]):
        self._segments: Dict[str, Segment] = {}
        offset = 0
        for name, shape in segments:
            if name in self._segments:
                raise ValueError(f"duplicate parameter segment '{name}'")
            segment = Segment(name, offset, tuple(int(s) for s in shape))
            self._segments[name] = segment
            offset = segment.stop
        self.size = offset

    def __contains__(self, name: str) -> bool:
        return name in self._segments

    def __iter__(self):
        return iter(self._segments.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamLayout) and self.to_list() == other.to_list()

    def __repr__(self):
        return f"ParamLayout({len(self._segments)} segments, size={self.size})"

    @property
    def names(self) -> List[str]:
        return list(self._segments)

    def segment(self, name: str) -> Segment:
        try:
            return self._segments[name]
        except KeyError:
            raise ValueError(f"unknown parameter segment '{name}'") from None

    def take(self, flat, name: str):
        """Slice one segment out of a flat vector (array or Var), reshaped"""
        seg = self.segment(name)
        if isinstance(flat, Var):
            piece = getitem(flat, slice(seg.offset, seg.stop))
            return reshape(piece, seg.shape)
        return np.asarray(flat)[seg.offset:seg.stop].reshape(seg.shape)

    def mask(self, prefixes: Optional[Sequence[str]]) -> np.ndarray:
        """Boolean mask of the coordinates whose segment name starts with a prefix"""
        out = np.zeros(self.size, dtype=bool)
        if prefixes is None:
            out[:] = True
            return out
        matched = False
        for seg in self:
            if any(seg.name.startswith(p) for p in prefixes):
                out[seg.offset:seg.stop] = True
                matched = True
        if not matched:
            raise ValueError(f"no parameter segment matches {list(prefixes)}")
        return out

    def to_list(self) -> List[dict]:
        return [{"name": s.name, "shape": list(s.shape)} for s in self]

    @classmethod
    def from_list(cls, items: Sequence[dict]) -> "ParamLayout":
        return cls((item["name"], tuple(item["shape"])) for item in items)


@dataclass
class ParamVector:
    """Flat parameter values together with their layout"""
    layout: ParamLayout
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.layout.size,):
            raise ValueError(
                f"ParamVector needs {self.layout.size} values, got shape {self.values.shape}"
            )

    def __len__(self) -> int:
        return self.layout.size

    @classmethod
    def zeros(cls, layout: ParamLayout) -> "ParamVector":
        return cls(layout, np.zeros(layout.size))

    def segment(self, name: str) -> np.ndarray:
        return self.layout.take(self.values, name)

    def set_segment(self, name: str, values) -> "ParamVector":
        seg = self.layout.segment(name)
        values = np.asarray(values, dtype=np.float64)
        if values.size != seg.size:
            raise ValueError(f"segment '{name}' needs {seg.size} values, got {values.size}")
        self.values[seg.offset:seg.stop] = values.ravel()
        return self

    def copy(self) -> "ParamVector":
        return ParamVector(self.layout, self.values.copy())

    def as_var(self, tape: Optional[Tape] = None) -> Var:
        """Leaf on `tape`, or a constant when no tape is given"""
        if tape is None:
            return lift(self.values)
        return tape.variable(self.values)


@dataclass
class GradAccumulator:
    """Weighted running sum of gradients"""
    grads: np.ndarray
    weight_total: float = 0.0

    @classmethod
    def for_params(cls, params: Union[ParamVector, ParamLayout]) -> "GradAccumulator":
        size = params.size if isinstance(params, ParamLayout) else len(params)
        return cls(np.zeros(size))

    def reset(self):
        self.grads[:] = 0.0
        self.weight_total = 0.0

    def merge(self, other: "GradAccumulator") -> "GradAccumulator":
        if self.grads.shape != other.grads.shape:
            raise ValueError("cannot merge accumulators of different shapes")
        return GradAccumulator(self.grads + other.grads,
                               self.weight_total + other.weight_total)

    def normalized(self) -> np.ndarray:
        """Gradient per unit of accumulated weight"""
        if self.weight_total <= 0:
            return np.zeros_like(self.grads)
        return self.grads / self.weight_total


def accumulate_weighted(acc: GradAccumulator, grad: np.ndarray, weight: float):
    """acc.grads += weight * grad; acc.weight_total += weight"""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != acc.grads.shape:
        raise ValueError(f"gradient shape {grad.shape} != accumulator {acc.grads.shape}")
    if weight == 0:
        return
    acc.grads += weight * grad
    acc.weight_total += float(weight)


def glorot_init(layout: ParamLayout, rng: np.random.Generator,
                prefixes: Optional[Sequence[str]] = None) -> ParamVector:
    """
    Random network initialisation

    Weight matrices (segments whose last name component starts with 'w')
    are drawn Glorot-uniform, everything else starts at zero.
    """
    params = ParamVector.zeros(layout)
    for seg in layout:
        if prefixes is not None and not any(seg.name.startswith(p) for p in prefixes):
            continue
        leaf = seg.name.rsplit(".", 1)[-1]
        if leaf.startswith("w") and len(seg.shape) == 2:
            fan_in, fan_out = seg.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.set_segment(seg.name, rng.uniform(-limit, limit, size=seg.shape))
    return params


def save_checkpoint(path: Union[str, Path], params: ParamVector,
                    meta: Optional[dict] = None):
    path = Path(path)
    payload = params.values.astype(CHECKPOINT_DTYPE).tobytes()
    header = {
        "segments": params.layout.to_list(),
        "dtype": CHECKPOINT_DTYPE,
        "count": int(params.values.size),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": meta or {},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(payload)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ParamVector, dict]:
    """
    Read a checkpoint written by `save_checkpoint`

    Returns:
        (params, meta)
    """
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a parameter checkpoint")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header ({exc})") from None
        payload = fh.read()

    if header.get("dtype") != CHECKPOINT_DTYPE:
        raise CheckpointError(f"{path}: unsupported dtype {header.get('dtype')}")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"{path}: checksum mismatch")
    layout = ParamLayout.from_list(header["segments"])
    values = np.frombuffer(payload, dtype=CHECKPOINT_DTYPE).astype(np.float64)
    if values.size != header.get("count") or values.size != layout.size:
        raise CheckpointError(
            f"{path}: {values.size} values do not fit {layout.size}-entry layout"
        )
    return ParamVector(layout, values), header.get("meta", {})
