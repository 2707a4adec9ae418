"""
Test script for the Ackermann motion model
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from autodiff import tape as ad
from data.schemas.geometry import transform_states
from data.schemas.schema_definitions import Action, Pose2D, VehicleState
from models.motion_model import (
    MotionConfig,
    propagate,
    propagate_batch,
    propagate_tape,
    propagate_with_input_grads,
    propagate_with_input_grads_batch,
)

QUADRATURE = MotionConfig(integrator="quadrature", quadrature_order=32)


def state(x=0.0, y=0.0, theta=0.0, v=0.0, kappa=0.0):
    return VehicleState(Pose2D(x, y, theta), v, kappa)


def random_inputs(rng, n):
    states = np.column_stack([
        rng.uniform(-50, 50, n), rng.uniform(-50, 50, n), rng.uniform(-np.pi, np.pi, n),
        rng.uniform(-20, 20, n), rng.uniform(-0.3, 0.3, n),
    ])
    actions = np.column_stack([rng.uniform(-4, 4, n), rng.uniform(-0.1, 0.1, n)])
    return states, actions


def test_straight_line():
    out = propagate(state(v=10.0), Action(0.0, 0.0))
    np.testing.assert_allclose(out.to_array(), [3.3, 0.0, 0.0, 10.0, 0.0], atol=1e-12)


def test_constant_curvature_arc():
    out = propagate(state(v=10.0, kappa=0.1), Action(0.0, 0.0))
    assert np.isclose(out.pose.theta, 0.33)
    assert np.isclose(out.pose.x, 10.0 * np.sin(0.33))
    assert np.isclose(out.pose.y, 10.0 * (1.0 - np.cos(0.33)))
    assert np.isclose(out.pose.x, 3.2404, atol=1e-4)
    assert np.isclose(out.pose.y, 0.5395, atol=1e-4)


def test_closed_form_matches_quadrature():
    s, a = state(v=5.0, kappa=0.05), Action(1.0, 0.02)
    closed = propagate(s, a).to_array()
    quad = propagate(s, a, QUADRATURE).to_array()
    np.testing.assert_allclose(closed, quad, atol=1e-9)

    rng = np.random.default_rng(0)
    states, actions = random_inputs(rng, 500)
    np.testing.assert_allclose(propagate_batch(states, actions),
                               propagate_batch(states, actions, QUADRATURE), atol=1e-8)


def test_small_quadratic_phase_uses_series():
    # v*pinch + accel*kappa small enough for the Taylor branch
    states = np.array([[0.0, 0.0, 0.3, 8.0, 0.01], [1.0, 2.0, -1.0, 3.0, 0.0]])
    actions = np.array([[1e-4, 1e-5], [0.0, 1e-6]])
    np.testing.assert_allclose(propagate_batch(states, actions),
                               propagate_batch(states, actions, QUADRATURE), atol=1e-10)


def test_heading_is_wrapped():
    out = propagate(state(theta=3.1, v=10.0, kappa=0.1), Action(0.0, 0.0))
    assert -np.pi < out.pose.theta <= np.pi
    assert np.isclose(out.pose.theta, 3.1 + 0.33 - 2 * np.pi)


def test_action_is_recoverable():
    rng = np.random.default_rng(1)
    states, actions = random_inputs(rng, 50)
    out = propagate_batch(states, actions)
    dt = MotionConfig().dt
    np.testing.assert_allclose((out[:, 3] - states[:, 3]) / dt, actions[:, 0], atol=1e-9)
    np.testing.assert_allclose((out[:, 4] - states[:, 4]) / dt, actions[:, 1], atol=1e-9)


def test_rigid_motion_equivariance():
    rng = np.random.default_rng(2)
    states, actions = random_inputs(rng, 100)
    angle, shift = 0.7, np.array([12.0, -4.0])
    moved_then_propagated = propagate_batch(transform_states(states, angle, shift), actions)
    propagated_then_moved = transform_states(propagate_batch(states, actions), angle, shift)
    diff = moved_then_propagated - propagated_then_moved
    diff[:, 2] = np.angle(np.exp(1j * diff[:, 2]))
    np.testing.assert_allclose(diff, 0.0, atol=1e-9)


def test_trivial_partials():
    _, j_state, j_action = propagate_with_input_grads(state(v=10.0), Action(0.0, 0.0))
    assert np.isclose(j_state[0, 3], 0.33)
    assert np.isclose(j_action[4, 1], 0.33)
    assert np.isclose(j_action[3, 0], 0.33)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    states, actions = random_inputs(rng, 20)
    _, jac = propagate_with_input_grads_batch(states, actions)
    inputs = np.hstack([states, actions])
    step = 1e-6
    for k in range(7):
        up, down = inputs.copy(), inputs.copy()
        up[:, k] += step
        down[:, k] -= step
        diff = (propagate_batch(up[:, :5], up[:, 5:], QUADRATURE)
                - propagate_batch(down[:, :5], down[:, 5:], QUADRATURE))
        diff[:, 2] = np.angle(np.exp(1j * diff[:, 2]))
        fd = diff / (2 * step)
        np.testing.assert_allclose(jac[:, :, k], fd, rtol=1e-5, atol=1e-6)


def test_tape_gradient_uses_jacobian():
    rng = np.random.default_rng(4)
    states, actions = random_inputs(rng, 5)
    _, jac = propagate_with_input_grads_batch(states, actions)
    tape = ad.Tape()
    s = tape.variable(states)
    a = tape.variable(actions)
    grads = tape.backward(ad.sum_(propagate_tape(s, a)[:, 0]))
    np.testing.assert_allclose(grads[s], jac[:, 0, :5])
    np.testing.assert_allclose(grads[a], jac[:, 0, 5:])


def test_constant_inputs_stay_off_tape():
    out = propagate_tape(np.zeros((2, 5)), np.zeros((2, 2)))
    assert out.tape is None


if __name__ == "__main__":
    print("Testing motion model...")
    test_straight_line()
    test_constant_curvature_arc()
    test_closed_form_matches_quadrature()
    test_small_quadratic_phase_uses_series()
    test_heading_is_wrapped()
    test_action_is_recoverable()
    test_rigid_motion_equivariance()
    test_trivial_partials()
    test_jacobian_matches_finite_differences()
    test_tape_gradient_uses_jacobian()
    test_constant_inputs_stay_off_tape()
    print("\n✅ Motion model tests passed!")
