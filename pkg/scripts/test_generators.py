"""
Test script for data generators

Quick test to verify the scene generator and the dataset writer work
correctly.
"""

import sys
import os
import tempfile
from pathlib import Path

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from autodiff.params import load_checkpoint
from data.dataset_io import load_scenes, read_manifest
from data.generators.scene_generator import (
    SceneConfig,
    TrueModelConfig,
    av_trajectory,
    generate_scene,
)
from data.generators.synthetic_data_generator import SyntheticDataGenerator, summarize
from filtering.random_streams import make_rng
from models.motion_model import propagate_batch
from models.policy import simple_policy_mean
from models.tracking_ssm import TrackingModel

MODEL = TrackingModel("simple")


def test_scene_sizes():
    config = SceneConfig(n_objects=4, n_steps=6, points_min=3, points_max=5)
    theta = TrueModelConfig().build(MODEL)
    scene = generate_scene(config, theta, make_rng(0, 3), MODEL, scene_index=2)
    assert len(scene) == 4
    for i, trajectory in enumerate(scene):
        assert trajectory.n_steps == 6
        assert len(trajectory.states) == 7 and len(trajectory.actions) == 6
        assert all(3 <= o.n_points <= 5 for o in trajectory.observations)
        assert [o.timestamp_index for o in trajectory.observations] == list(range(7))
        assert trajectory.meta["scene"] == 2 and trajectory.meta["object"] == i
        assert trajectory.meta["dt"] == MODEL.motion.dt
        ranges = np.hypot(trajectory.states[0].pose.x, trajectory.states[0].pose.y)
        assert config.radius_min <= ranges <= config.radius_max


def test_noiseless_policy_is_deterministic():
    config = SceneConfig(n_objects=2, n_steps=5)
    theta = TrueModelConfig(sigma_accel=0.0, sigma_pinch=0.0).build(MODEL)
    for trajectory in generate_scene(config, theta, make_rng(1, 3), MODEL):
        states = trajectory.states_array()
        for t in range(5):
            action = np.array([[simple_policy_mean(states[t, 3])[0], 0.0]])
            np.testing.assert_allclose(trajectory.actions_array()[t], action[0], atol=1e-12)
            np.testing.assert_allclose(propagate_batch(states[t:t + 1], action)[0],
                                       states[t + 1], atol=1e-12)


def test_generated_data_has_finite_likelihood():
    config = SceneConfig(n_objects=3, n_steps=4)
    theta = TrueModelConfig().build(MODEL)
    for trajectory in generate_scene(config, theta, make_rng(2, 3), MODEL):
        ssm = MODEL.bind(trajectory)
        states = trajectory.states_array()
        for t in range(len(states)):
            assert np.isfinite(ssm.log_obs(theta, states[t:t + 1], t)[0])
        logpdf = MODEL.policy.logpdf_batch(theta, states[:-1], trajectory.actions_array())
        assert np.all(np.isfinite(logpdf))


def test_moving_av_path():
    config = SceneConfig(n_steps=3, av_motion="straight", av_speed=10.0, av_heading=np.pi / 2)
    poses = av_trajectory(config)
    assert len(poses) == 4
    assert np.isclose(poses[3].y, 10.0 * 3 * config.dt) and abs(poses[3].x) < 1e-12


def test_config_validation():
    config = SceneConfig(length_range="4.0, 4.5")
    assert config.length_range == (4.0, 4.5)
    assert TrueModelConfig(edge_logits="1,0,0,-1").edge_logits == (1.0, 0.0, 0.0, -1.0)
    with pytest.raises(ValueError):
        SceneConfig(points_min=10, points_max=5)
    with pytest.raises(ValueError):
        SceneConfig(radius_min=10.0, radius_max=5.0)


def test_generator_writes_reproducible_dataset():
    print("Generating a small dataset...")
    scene_config = SceneConfig(n_objects=2, n_steps=3)
    first = SyntheticDataGenerator(scene_config, seed=7).generate_dataset(2, 1)
    second = SyntheticDataGenerator(scene_config, seed=7, threads=2).generate_dataset(2, 1)
    assert first == second

    summary = summarize(first)
    print(summary.to_string(index=False))
    assert list(summary["split"]) == ["train", "eval"]
    assert list(summary["objects"]) == [4, 2]

    generator = SyntheticDataGenerator(scene_config, seed=7)
    with tempfile.TemporaryDirectory() as tmp:
        manifest_path = generator.save_dataset(first, tmp)
        manifest = read_manifest(manifest_path)
        assert manifest["generator_seed"] == 7
        assert manifest["scenes"]["train"] == ["train_scene_000.jsonl", "train_scene_001.jsonl"]
        assert load_scenes(manifest_path, "train") == first["train"]

        theta, meta = load_checkpoint(Path(tmp) / manifest["true_params"])
        assert meta["policy"] == "simple"
        np.testing.assert_array_equal(theta.values, generator.true_params.values)


if __name__ == "__main__":
    print("Testing data generators...")
    test_scene_sizes()
    test_noiseless_policy_is_deterministic()
    test_generated_data_has_finite_likelihood()
    test_moving_av_path()
    test_config_validation()
    test_generator_writes_reproducible_dataset()
    print("\n✅ Data generator tests passed!")
