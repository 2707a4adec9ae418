"""
Synthetic tracking-data generators
"""

from .object_generator import ObjectGenerator
from .scene_generator import SceneConfig, TrueModelConfig, av_trajectory, generate_scene
from .synthetic_data_generator import SyntheticDataGenerator, summarize

__all__ = [
    "ObjectGenerator",
    "SceneConfig",
    "TrueModelConfig",
    "av_trajectory",
    "generate_scene",
    "SyntheticDataGenerator",
    "summarize",
]
