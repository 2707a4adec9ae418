"""
Dataset Serialization

One object trajectory per line:

    {"dims": {"length": .., "width": ..},
     "av_poses": [[x, y, theta], ...],
     "observations": [[[x, y], ...], ...],
     "states": [[x, y, theta, v, kappa], ...],     optional
     "actions": [[accel, pinch], ...],             optional
     "meta": {"dt": .., "seed": .., ...}}

Numbers are written as decimals with 17 significant digits, which is
enough for every float64 to survive the round trip unchanged. A manifest
file lists the scene files of each split together with the generator
seed and the generating-parameter checkpoint.
"""

import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from .schemas.schema_definitions import (
    Action,
    BoxDims,
    ObjectTrajectory,
    Observation,
    Pose2D,
    VehicleState,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class DatasetFormatError(ValueError):
    """Malformed dataset record"""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


def _dump(value) -> str:
    """Compact JSON with 17-significant-digit floats"""
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot serialise non-finite number {value}")
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_dump(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in value) + "]"
    if hasattr(value, "item"):
        return _dump(value.item())
    raise TypeError(f"cannot serialise {type(value).__name__}")


def trajectory_to_record(traj: ObjectTrajectory) -> Dict:
    record = {
        "dims": {"length": traj.dims.length, "width": traj.dims.width},
        "av_poses": [[p.x, p.y, p.theta] for p in traj.av_poses],
        "observations": [[list(pt) for pt in obs.points] for obs in traj.observations],
    }
    if traj.states is not None:
        record["states"] = [[s.pose.x, s.pose.y, s.pose.theta, s.v, s.kappa] for s in traj.states]
    if traj.actions is not None:
        record["actions"] = [[a.accel, a.pinch] for a in traj.actions]
    record["meta"] = dict(traj.meta)
    return record


def record_to_trajectory(record: Dict) -> ObjectTrajectory:
    """Build and validate a trajectory; raises KeyError/ValueError/TypeError"""
    dims = BoxDims(float(record["dims"]["length"]), float(record["dims"]["width"]))
    observations = [Observation(tuple(map(tuple, pts)), i)
                    for i, pts in enumerate(record["observations"])]
    av_poses = [Pose2D.from_array(p) for p in record["av_poses"]]
    states = record.get("states")
    actions = record.get("actions")
    return ObjectTrajectory(
        dims=dims,
        observations=observations,
        av_poses=av_poses,
        states=None if states is None else [VehicleState.from_array(s) for s in states],
        actions=None if actions is None else [Action.from_array(a) for a in actions],
        meta=dict(record.get("meta", {})),
    )


def write_dataset(path: PathLike, trajectories: Iterable[ObjectTrajectory]) -> int:
    """Write trajectories as JSON lines; returns the number written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w") as fh:
        for traj in trajectories:
            fh.write(_dump(trajectory_to_record(traj)) + "\n")
            count += 1
    logger.info("wrote %d trajectories to %s", count, path)
    return count


def read_dataset(path: PathLike) -> List[ObjectTrajectory]:
    trajectories = []
    with open(path) as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(line_number, f"invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetFormatError(line_number, "record is not an object")
            try:
                trajectories.append(record_to_trajectory(record))
            except KeyError as exc:
                raise DatasetFormatError(line_number, f"missing field {exc}") from None
            except (ValueError, TypeError, IndexError) as exc:
                raise DatasetFormatError(line_number, str(exc)) from None
    return trajectories


def write_manifest(path: PathLike, manifest: Dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def read_manifest(path: PathLike) -> Dict:
    with open(path) as fh:
        manifest = json.load(fh)
    if "scenes" not in manifest:
        raise ValueError(f"{path}: manifest lists no scenes")
    return manifest


def load_scenes(manifest_path: PathLike, split: str) -> List[List[ObjectTrajectory]]:
    """All scenes of a split, paths resolved against the manifest directory"""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    files: Sequence[str] = manifest["scenes"].get(split, [])
    if not files:
        raise ValueError(f"{manifest_path}: split '{split}' has no scene files")
    return [read_dataset(manifest_path.parent / name) for name in files]


def load_trajectories(path: PathLike, split: str = "eval") -> List[ObjectTrajectory]:
    """A single dataset file, or every trajectory of a manifest split"""
    path = Path(path)
    if path.suffix == ".json":
        return [t for scene in load_scenes(path, split) for t in scene]
    return read_dataset(path)
