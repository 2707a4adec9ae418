"""
Test script for the optimizer and the training loop
"""

import sys
import os
import tempfile
from pathlib import Path

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd
import pytest

from autodiff.params import ParamLayout, ParamVector, load_checkpoint
from data.generators.scene_generator import SceneConfig, TrueModelConfig, generate_scene
from estimators.pf_sefi import ScoreEstimate
from filtering.random_streams import make_rng
from models.tracking_ssm import TrackingModel
from training.optimizer import AdamState, adam_step, clip_by_global_norm, global_norm
from training.trainer import TrainConfig, Trainer, TrainingAborted, split_windows

LAYOUT = ParamLayout([("w", (3,))])


def small_scenes(n_scenes=2, n_objects=2, n_steps=3):
    model = TrackingModel("simple")
    theta = TrueModelConfig().build(model)
    config = SceneConfig(n_objects=n_objects, n_steps=n_steps, radius_max=20.0)
    return [generate_scene(config, theta, make_rng(1, 3, i), model, scene_index=i)
            for i in range(n_scenes)]


def small_config(**overrides):
    values = dict(epochs=1, n_train=16, n_eval=16, lag=2, seed=3)
    values.update(overrides)
    return TrainConfig(**values)


# Optimizer

def test_adam_zero_gradient_keeps_params():
    params = ParamVector(LAYOUT, [1.0, -2.0, 0.5])
    state = AdamState.for_params(params)
    assert adam_step(params, np.zeros(3), state, lr=0.01)
    np.testing.assert_array_equal(params.values, [1.0, -2.0, 0.5])
    assert state.step == 1


def test_adam_first_step_moves_by_learning_rate():
    params = ParamVector.zeros(LAYOUT)
    state = AdamState.for_params(params)
    adam_step(params, np.array([3.0, -0.2, 1e-3]), state, lr=0.01)
    np.testing.assert_allclose(params.values, [0.01, -0.01, 0.01], rtol=1e-4)


def test_adam_skips_non_finite_gradient():
    params = ParamVector(LAYOUT, [1.0, 2.0, 3.0])
    state = AdamState.for_params(params)
    assert not adam_step(params, np.array([1.0, np.nan, 0.0]), state, lr=0.1)
    np.testing.assert_array_equal(params.values, [1.0, 2.0, 3.0])
    assert state.skipped == 1 and state.step == 0
    with pytest.raises(ValueError):
        adam_step(params, np.zeros(4), state, lr=0.1)


def test_clip_by_global_norm():
    grad = np.array([1.2, 1.6])
    assert np.isclose(global_norm(grad), 2.0)
    clipped, norm = clip_by_global_norm(grad, 0.5)
    assert norm == 2.0
    np.testing.assert_allclose(clipped, 0.25 * grad)
    unchanged, _ = clip_by_global_norm(grad, 5.0)
    assert unchanged is grad
    same, _ = clip_by_global_norm(grad, None)
    assert same is grad


# Trainer

def test_config_validation():
    config = TrainConfig(train_segments="policy, obs.b4")
    assert config.train_segments == ["policy", "obs.b4"]
    with pytest.raises(ValueError):
        TrainConfig(estimator="dpf")
    with pytest.raises(ValueError):
        TrainConfig(n_train=1)


def test_split_windows():
    trajectory = small_scenes(n_scenes=1, n_objects=1, n_steps=10)[0][0]
    assert split_windows(trajectory, None) == [trajectory]
    pieces = split_windows(trajectory, 4)
    assert [p.n_steps for p in pieces] == [4, 4, 2]
    assert pieces[1].meta["window"] == (4, 8)
    assert pieces[1].observations[0].points == trajectory.observations[4].points
    assert pieces[1].observations[0].timestamp_index == 0


def test_zero_learning_rate_keeps_metrics():
    scenes = small_scenes()
    eval_set = scenes[0]
    with tempfile.TemporaryDirectory() as tmp:
        trainer = Trainer(small_config(learning_rate=0.0), output_dir=Path(tmp))
        start = trainer.initial_params()
        result = trainer.fit(scenes, eval_set, start)

        np.testing.assert_array_equal(result.params.values, start.values)
        assert list(result.history["train_step"]) == [0, 2]
        assert np.isclose(result.history["mll"].iloc[0], result.history["mll"].iloc[1])

        csv_path = Path(tmp) / "metrics.csv"
        assert csv_path.read_text().startswith("#")
        written = pd.read_csv(csv_path, comment="#")
        assert list(written.columns)[:3] == ["train_step", "mll", "ade_s"]
        assert len(written) == 2

        assert len(result.checkpoints) == 2
        loaded, meta = load_checkpoint(result.checkpoints[-1])
        assert meta["epoch"] == 1 and meta["estimator"] == "pf_sefi"
        np.testing.assert_array_equal(loaded.values, start.values)


def test_training_is_reproducible():
    scenes = small_scenes()
    runs = [Trainer(small_config(learning_rate=0.05)).fit(scenes, scenes[1]) for _ in range(2)]
    np.testing.assert_array_equal(runs[0].params.values, runs[1].params.values)


def test_train_segments_mask_updates():
    scenes = small_scenes()
    trainer = Trainer(small_config(learning_rate=0.05, train_segments=["policy"]))
    params = trainer.initial_params()
    before = params.copy()
    trainer.train_step(params, AdamState.for_params(params), scenes[0], step=1)
    policy = trainer.model.layout.mask(["policy"])
    assert np.any(params.values[policy] != before.values[policy])
    np.testing.assert_array_equal(params.values[~policy], before.values[~policy])


def test_baseline_estimators_train():
    scenes = small_scenes(n_scenes=1)
    for estimator in ("pf", "pfnet"):
        trainer = Trainer(small_config(estimator=estimator, grad_clip=0.5))
        params = trainer.initial_params()
        trainer.train_step(params, AdamState.for_params(params), scenes[0], step=1)
        assert np.all(np.isfinite(params.values))


def test_repeated_tracking_failures_abort():
    scenes = small_scenes(n_scenes=1)
    trainer = Trainer(small_config(failure_window=2, max_failure_rate=0.5))

    def always_lost(params, trajectory, rng):
        return ScoreEstimate(np.zeros(len(params)), 0.0, float("nan"),
                             failed=True, failure_time=1)

    trainer.score_trajectory = always_lost
    params = trainer.initial_params()
    state = AdamState.for_params(params)
    trainer.train_step(params, state, scenes[0], step=1)
    with pytest.raises(TrainingAborted) as info:
        trainer.train_step(params, state, scenes[0], step=2)
    assert info.value.step == 2
    assert info.value.failure_rate == 1.0


def test_empty_training_set_rejected():
    with pytest.raises(ValueError):
        Trainer(small_config()).fit([], small_scenes(n_scenes=1)[0])


def test_scene_with_every_trajectory_lost_keeps_params():
    scenes = small_scenes(n_scenes=1)
    trainer = Trainer(small_config(learning_rate=0.05, failure_window=5))
    params = trainer.initial_params()
    state = AdamState.for_params(params)
    trainer.score_trajectory = lambda params, trajectory, rng: ScoreEstimate(
        np.ones(len(params)), 4.0, -3.0)
    trainer.train_step(params, state, scenes[0], step=1)
    assert state.step == 1

    # Momentum from the first step would still move the parameters
    trainer.score_trajectory = lambda params, trajectory, rng: ScoreEstimate(
        np.zeros(len(params)), 0.0, float("nan"), failed=True, failure_time=2)
    before, m_before = params.copy(), state.m.copy()
    trainer.train_step(params, state, scenes[0], step=2)
    np.testing.assert_array_equal(params.values, before.values)
    np.testing.assert_array_equal(state.m, m_before)
    assert state.step == 1
    assert list(trainer.recent_failures) == [0.0, 1.0]


def test_thread_count_does_not_change_result():
    scenes = small_scenes()
    serial = Trainer(small_config(learning_rate=0.05, threads=1)).fit(scenes, scenes[1])
    threaded = Trainer(small_config(learning_rate=0.05, threads=2)).fit(scenes, scenes[1])
    np.testing.assert_array_equal(serial.params.values, threaded.params.values)
    pd.testing.assert_frame_equal(serial.history, threaded.history)


if __name__ == "__main__":
    print("Testing training...")
    test_adam_zero_gradient_keeps_params()
    test_adam_first_step_moves_by_learning_rate()
    test_adam_skips_non_finite_gradient()
    test_clip_by_global_norm()
    test_config_validation()
    test_split_windows()
    test_zero_learning_rate_keeps_metrics()
    test_training_is_reproducible()
    test_train_segments_mask_updates()
    test_baseline_estimators_train()
    test_repeated_tracking_failures_abort()
    test_empty_training_set_rejected()
    test_scene_with_every_trajectory_lost_keeps_params()
    test_thread_count_does_not_change_result()
    print("\n✅ Training tests passed!")
