"""
Scene Generator

A scene is a set of objects observed from one AV path over the same T
steps. Scene settings and the generating ("TRUE") model are pydantic
models so they can be validated from flags or config files and recorded
in the dataset manifest.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from autodiff.params import ParamVector
from filtering.random_streams import make_rng
from models.motion_model import MotionConfig
from models.tracking_ssm import TrackingModel
from ..schemas.schema_definitions import DEFAULT_DT, ObjectTrajectory, Pose2D
from .object_generator import ObjectGenerator

logger = logging.getLogger(__name__)


def split_csv(value):
    """"1,2" -> ["1", "2"] for tuple fields given as text"""
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return value


class SceneConfig(BaseModel):
    """Size of a scene and the samplers of its objects"""
    n_objects: int = Field(100, ge=1)
    n_steps: int = Field(25, ge=1)
    dt: float = Field(DEFAULT_DT, gt=0)
    points_min: int = Field(8, ge=1)
    points_max: int = Field(16, ge=1)
    av_motion: Literal["stationary", "straight"] = "stationary"
    av_speed: float = 0.0
    av_heading: float = 0.0
    radius_min: float = Field(5.0, ge=0)
    radius_max: float = Field(40.0, gt=0)
    speed_min: float = 0.0
    speed_max: float = 12.0
    kappa_std: float = Field(0.03, ge=0)
    length_range: Tuple[float, float] = (3.8, 5.2)
    width_range: Tuple[float, float] = (1.7, 2.1)
    av_noise_xy: float = Field(0.0, ge=0)
    av_noise_theta: float = Field(0.0, ge=0)

    @field_validator("length_range", "width_range", mode="before")
    @classmethod
    def _split_ranges(cls, value):
        return split_csv(value)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.points_max < self.points_min:
            raise ValueError("points_max must be >= points_min")
        if self.radius_max <= self.radius_min:
            raise ValueError("radius_max must exceed radius_min")
        if self.speed_max < self.speed_min:
            raise ValueError("speed_max must be >= speed_min")
        for name in ("length_range", "width_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        return self


class TrueModelConfig(BaseModel):
    """Hand-set generating parameters of the simple-policy tracking model"""
    edge_logits: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    laplace_mu: float = 0.05
    laplace_b: float = Field(0.15, gt=0)
    sigma_accel: float = Field(0.5, ge=0)
    sigma_pinch: float = Field(0.01, ge=0)

    @field_validator("edge_logits", mode="before")
    @classmethod
    def _split_logits(cls, value):
        return split_csv(value)

    def build(self, model: TrackingModel) -> ParamVector:
        with np.errstate(divide="ignore"):
            return model.true_params(self.edge_logits, self.laplace_mu, self.laplace_b,
                                     self.sigma_accel, self.sigma_pinch)


def av_trajectory(config: SceneConfig) -> List[Pose2D]:
    """Stationary AV at the origin, or constant-velocity straight motion"""
    if config.av_motion == "stationary":
        return [Pose2D(0.0, 0.0, 0.0) for _ in range(config.n_steps + 1)]
    heading = config.av_heading
    return [
        Pose2D(config.av_speed * t * config.dt * np.cos(heading),
               config.av_speed * t * config.dt * np.sin(heading), heading)
        for t in range(config.n_steps + 1)
    ]


def generate_scene(config: SceneConfig, true_theta: ParamVector, rng: np.random.Generator,
                   model: Optional[TrackingModel] = None, threads: int = 1,
                   scene_index: int = 0) -> List[ObjectTrajectory]:
    """
    Generate every object of one scene

    Args:
        config: scene settings
        true_theta: generating parameters
        rng: scene stream; each object draws from its own child stream
        model: generating model (simple policy at config.dt by default)
        threads: worker threads across objects
        scene_index: recorded in each trajectory's meta

    Returns:
        n_objects trajectories with ground-truth states and actions
    """
    if model is None:
        model = TrackingModel("simple", MotionConfig(dt=config.dt))
    generator = ObjectGenerator(model, true_theta, config)
    av_poses = av_trajectory(config)
    child_seeds = rng.integers(0, 2 ** 63 - 1, size=config.n_objects)

    def one(i: int) -> ObjectTrajectory:
        meta = {"scene": scene_index, "object": i, "seed": int(child_seeds[i])}
        return generator.generate_object(av_poses, make_rng(int(child_seeds[i])), meta)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            objects = list(pool.map(one, range(config.n_objects)))
    else:
        objects = [one(i) for i in range(config.n_objects)]
    logger.info("scene %d: %d objects x %d steps", scene_index, config.n_objects, config.n_steps)
    return objects
