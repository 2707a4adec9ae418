"""
Test script for the edge/offset observation model
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy import stats

from autodiff import tape as ad
from autodiff.params import ParamLayout, ParamVector, glorot_init
from data.schemas.schema_definitions import BoxDims, Observation, Pose2D, VehicleState
from models.observation_model import (
    EdgeTriplet,
    ObsFeatures,
    ObsParams12,
    ObservationModel,
    log_likelihood_points_from_params,
    point_from_triplet,
    sample_points,
    triplet_from_point,
)

MODEL = ObservationModel()
LAYOUT = ParamLayout(MODEL.segments())
ORIGIN = Pose2D(0.0, 0.0, 0.0)
DIMS = BoxDims(4.0, 2.0)


def at(x, y, theta):
    return VehicleState(Pose2D(x, y, theta), 5.0, 0.0)


def constant_params(probs=(0.25, 0.25, 0.25, 0.25), mu=0.0, b=0.5):
    return ObsParams12(np.asarray(probs, dtype=np.float64),
                       np.full(4, mu), np.full(4, b))


def random_theta(seed):
    return glorot_init(LAYOUT, np.random.default_rng(seed))


def test_features():
    f = MODEL.features(ORIGIN, at(10.0, 0.0, 0.0), DIMS)
    np.testing.assert_allclose(f.to_array(), [10.0, 0.0, 0.0, 4.0, 2.0], atol=1e-12)

    f = MODEL.features(ORIGIN, at(0.0, 5.0, np.pi / 2), DIMS)
    np.testing.assert_allclose(f.to_array()[:3], [5.0, np.pi / 2, np.pi / 2], atol=1e-12)

    f = MODEL.features(Pose2D(0.0, 0.0, np.pi / 2), at(0.0, 5.0, np.pi / 2), DIMS)
    assert np.isclose(f.bearing, 0.0) and np.isclose(f.relative_bearing, 0.0)


def test_zero_network_outputs():
    params = MODEL.obs_params(ParamVector.zeros(LAYOUT),
                              ObsFeatures(12.0, 0.3, -1.0, 4.5, 1.9))
    np.testing.assert_allclose(params.edge_probs, 0.25)
    np.testing.assert_allclose(params.laplace_mu, 0.0)
    np.testing.assert_allclose(params.laplace_b, 1.0)


def test_edge_probs_normalised():
    theta = random_theta(0)
    theta.values *= 5.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        feats = ObsFeatures(rng.uniform(0, 60), rng.uniform(-3, 3), rng.uniform(-3, 3), 4.0, 2.0)
        params = MODEL.obs_params(theta, feats)
        assert abs(params.edge_probs.sum() - 1.0) < 1e-12
        assert np.all(params.laplace_b > 0)


def test_point_from_triplet():
    l, w = DIMS.length, DIMS.width
    state = at(0.0, 0.0, 0.0)
    np.testing.assert_allclose(point_from_triplet(EdgeTriplet(0, w / 2, 0.0), state, DIMS),
                               (l / 2, 0.0), atol=1e-12)
    np.testing.assert_allclose(point_from_triplet(EdgeTriplet(2, w / 2, 0.3), state, DIMS),
                               (-l / 2 - 0.3, 0.0), atol=1e-12)


def test_triplet_round_trip_all_edges():
    state = at(3.0, -2.0, 0.8)
    for edge in range(4):
        triplet = EdgeTriplet(edge, 0.7, -0.2)
        point = point_from_triplet(triplet, state, DIMS)
        back = triplet_from_point(point, edge, state, DIMS)
        assert back.edge == edge
        assert abs(back.alpha - 0.7) < 1e-12 and abs(back.beta + 0.2) < 1e-12


def test_invalid_edge_rejected():
    with pytest.raises(ValueError):
        EdgeTriplet(4, 0.0, 0.0)


def test_single_component_density():
    params = constant_params(probs=(1.0, 0.0, 0.0, 0.0), b=0.5)
    point = point_from_triplet(EdgeTriplet(0, 1.0, 0.0), at(0.0, 0.0, 0.0), DIMS)
    value = log_likelihood_points_from_params(params, at(0.0, 0.0, 0.0), DIMS, [point])[0]
    assert np.isclose(value, np.log(0.5))


def test_support_truncation():
    # Past the front and rear edges' lateral extent only the side edges contribute
    state = at(0.0, 0.0, 0.0)
    point = (1.0, 1.3)
    params = constant_params(b=0.05)
    value = log_likelihood_points_from_params(params, state, DIMS, [point])[0]
    terms = []
    for edge in (1, 3):
        beta = triplet_from_point(point, edge, state, DIMS).beta
        terms.append(np.log(0.25) - np.log(DIMS.length) - np.log(0.1) - abs(beta) / 0.05)
    assert np.isclose(value, np.logaddexp(*terms))
    assert np.isclose(value, terms[0])


def test_density_integrates_to_one():
    # Grid cells are aligned with the support edges and the Laplace kinks
    state = at(0.0, 0.0, 0.0)
    params = constant_params(probs=(0.1, 0.2, 0.3, 0.4), mu=0.1, b=0.3)
    h = 0.02
    xs = np.arange(-5.0 + h / 2, 5.0, h)
    ys = np.arange(-4.0 + h / 2, 4.0, h)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    log_density = log_likelihood_points_from_params(params, state, DIMS, points)
    total = np.exp(log_density).sum() * h * h
    assert abs(total - 1.0) < 0.01


def test_degenerate_scale_samples_lie_on_edge():
    state = at(2.0, 1.0, 0.4)
    params = constant_params(probs=(1.0, 0.0, 0.0, 0.0), b=1e-9)
    points = sample_points(params, state, DIMS, 200, np.random.default_rng(0))
    for point in points:
        triplet = triplet_from_point(point, 0, state, DIMS)
        assert abs(triplet.beta) < 1e-6
        assert -1e-9 <= triplet.alpha <= DIMS.width + 1e-9


def test_sample_observation_is_reproducible_and_finite():
    theta = MODEL.hand_set_params(ParamVector.zeros(LAYOUT))
    state = at(12.0, -3.0, 1.0)
    obs_a = MODEL.sample_observation(theta, ORIGIN, state, DIMS, 12, np.random.default_rng(7), 3)
    obs_b = MODEL.sample_observation(theta, ORIGIN, state, DIMS, 12, np.random.default_rng(7), 3)
    assert obs_a == obs_b
    assert obs_a.n_points == 12 and obs_a.timestamp_index == 3
    per_point = MODEL.log_likelihood_points(theta, ORIGIN, state, DIMS, obs_a.to_array())
    assert np.all(np.isfinite(per_point))
    assert np.all(per_point > -1e3)

    with pytest.raises(ValueError):
        MODEL.sample_observation(theta, ORIGIN, state, DIMS, 0, np.random.default_rng(0))


def test_observation_is_sum_of_points():
    theta = random_theta(1)
    state = at(8.0, 2.0, -0.5)
    p = point_from_triplet(EdgeTriplet(1, 1.2, 0.05), state, DIMS)
    q = point_from_triplet(EdgeTriplet(2, 0.4, -0.1), state, DIMS)
    single = MODEL.log_likelihood_point(theta, ORIGIN, state, DIMS, p)
    assert np.isclose(MODEL.log_likelihood_observation(theta, ORIGIN, state, DIMS,
                                                       Observation((p,), 0)), single)
    assert np.isclose(MODEL.log_likelihood_observation(theta, ORIGIN, state, DIMS,
                                                       Observation((p, p), 0)), 2 * single)
    both = MODEL.log_likelihood_observation(theta, ORIGIN, state, DIMS, Observation((p, q), 0))
    assert np.isclose(both, single + MODEL.log_likelihood_point(theta, ORIGIN, state, DIMS, q))


def test_batch_matches_single_state():
    theta = random_theta(2)
    states = np.array([[8.0, 2.0, -0.5, 5.0, 0.0], [9.0, 1.0, 0.3, 2.0, 0.01]])
    obs = Observation(((8.5, 3.0), (7.0, 1.5), (10.0, 1.0)), 0)
    batch = MODEL.log_likelihood_observation_batch(theta, ORIGIN, states, DIMS, obs)
    for i, row in enumerate(states):
        single = MODEL.log_likelihood_observation(theta, ORIGIN, VehicleState.from_array(row),
                                                  DIMS, obs)
        assert np.isclose(batch[i], single)


def test_parameter_gradient_matches_finite_differences():
    theta = random_theta(3)
    state = at(8.0, 2.0, -0.5)
    points = np.array([
        point_from_triplet(EdgeTriplet(e, 0.6, 0.07 * (e + 1)), state, DIMS) for e in range(4)
    ])
    av_pose = ORIGIN.to_array()
    states = state.to_array()[None, :]

    def objective(flat):
        return ad.sum_(MODEL.log_likelihood_points_tape(flat, LAYOUT, av_pose, states,
                                                        DIMS, points))

    tape = ad.Tape()
    flat = theta.as_var(tape)
    grad = tape.backward(objective(flat))[flat]

    step = 1e-6
    rng = np.random.default_rng(4)
    for k in rng.choice(LAYOUT.size, size=60, replace=False):
        up, down = theta.values.copy(), theta.values.copy()
        up[k] += step
        down[k] -= step
        fd = (float(objective(up).value) - float(objective(down).value)) / (2 * step)
        assert abs(grad[k] - fd) <= 1e-5 * max(1.0, abs(fd))


def test_edge_frequencies_match_probabilities():
    # At the origin with heading 0 the edges lie on x=2, y=1, x=-2 and y=-1
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    n = 100_000
    points = sample_points(constant_params(probs=probs, b=1e-9), at(0.0, 0.0, 0.0), DIMS,
                           n, np.random.default_rng(11))
    x, y = points[:, 0], points[:, 1]
    edges = np.select(
        [np.abs(x - 2.0) < 1e-6, np.abs(y - 1.0) < 1e-6,
         np.abs(x + 2.0) < 1e-6, np.abs(y + 1.0) < 1e-6],
        [0, 1, 2, 3], default=-1,
    )
    assert np.all(edges >= 0)
    counts = np.bincount(edges, minlength=4)
    assert stats.chisquare(counts, probs * n).pvalue > 0.001


def test_sample_mean_matches_quadrature():
    state = at(0.0, 0.0, 0.0)
    params = constant_params(probs=(0.1, 0.2, 0.3, 0.4), mu=0.1, b=0.3)

    def f(points):
        return np.cos(points[:, 0]) * np.exp(-points[:, 1] ** 2 / 4.0)

    h = 0.02
    xs = np.arange(-5.0 + h / 2, 5.0, h)
    ys = np.arange(-4.0 + h / 2, 4.0, h)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    density = np.exp(log_likelihood_points_from_params(params, state, DIMS, grid))
    expected = np.sum(f(grid) * density) / np.sum(density)

    draws = sample_points(params, state, DIMS, 100_000, np.random.default_rng(12))
    assert abs(f(draws).mean() - expected) < 0.015


if __name__ == "__main__":
    print("Testing observation model...")
    test_features()
    test_zero_network_outputs()
    test_edge_probs_normalised()
    test_point_from_triplet()
    test_triplet_round_trip_all_edges()
    test_invalid_edge_rejected()
    test_single_component_density()
    test_support_truncation()
    test_density_integrates_to_one()
    test_degenerate_scale_samples_lie_on_edge()
    test_sample_observation_is_reproducible_and_finite()
    test_observation_is_sum_of_points()
    test_batch_matches_single_state()
    test_parameter_gradient_matches_finite_differences()
    test_edge_frequencies_match_probabilities()
    test_sample_mean_matches_quadrature()
    print("\n✅ Observation model tests passed!")
