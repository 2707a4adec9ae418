"""
Test script for the gradient engine

Checks tape gradients against hand-derived values and central finite
differences, the accumulator contract and checkpoint files.
"""

import sys
import os
import tempfile

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from autodiff import tape as ad
from autodiff.mlp import MLPArchitecture, mlp_forward
from autodiff.params import (
    CheckpointError,
    GradAccumulator,
    ParamLayout,
    ParamVector,
    accumulate_weighted,
    glorot_init,
    load_checkpoint,
    save_checkpoint,
)
from models.observation_model import OBS_ARCHITECTURE
from models.policy import POLICY_ARCHITECTURE


def finite_difference(f, x, step=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up.flat[i] += step
        down.flat[i] -= step
        grad.flat[i] = (f(up) - f(down)) / (2 * step)
    return grad


def test_square_gradient():
    tape = ad.Tape()
    theta = tape.variable(3.0)
    grads = tape.backward(ad.square(theta))
    assert np.isclose(grads[theta], 6.0)


def test_log_softmax_gradient():
    tape = ad.Tape()
    logits = tape.variable([0.0, 0.0])
    grads = tape.backward(ad.log_softmax(logits)[0])
    np.testing.assert_allclose(grads[logits], [0.5, -0.5])


def test_backward_on_empty_tape_raises():
    tape = ad.Tape()
    with pytest.raises(ValueError):
        tape.backward(ad.Var(1.0))


def test_backward_releases_graph():
    tape = ad.Tape()
    x = tape.variable([1.0, 2.0])
    tape.backward(ad.sum_(ad.exp(x)))
    assert len(tape) == 0


def test_elementwise_ops_match_finite_differences():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=6)

    def build(x):
        y = ad.tanh(x) * ad.sin(x) + ad.softplus(x) / (1.0 + ad.square(ad.cos(x)))
        z = ad.atan2(y, ad.exp(0.3 * x) + 0.5)
        return ad.logsumexp(z * 2.0, axis=0) + ad.mean(ad.sqrt(ad.square(x) + 1.0))

    tape = ad.Tape()
    x = tape.variable(x0)
    grad = tape.backward(build(x))[x]
    expected = finite_difference(lambda v: float(build(ad.Var(v)).value), x0)
    np.testing.assert_allclose(grad, expected, rtol=1e-6, atol=1e-8)


def test_zero_network_outputs_zero():
    arch = MLPArchitecture((3, 4, 2), "tanh")
    layout = ParamLayout(arch.segments("net"))
    out = mlp_forward(np.zeros(layout.size), layout, "net", np.array([1.0, -2.0, 0.5]), arch)
    np.testing.assert_array_equal(out.value, np.zeros(2))


def test_affine_one_by_one_network():
    arch = MLPArchitecture((1, 1))
    layout = ParamLayout(arch.segments("net"))
    params = ParamVector.zeros(layout)
    params.set_segment("net.w0", [[2.0]])
    params.set_segment("net.b0", [1.0])
    out = mlp_forward(params.values, layout, "net", np.array([3.0]), arch)
    assert np.isclose(out.value[0], 7.0)


def test_parameter_counts():
    assert POLICY_ARCHITECTURE.n_params == 1317
    assert OBS_ARCHITECTURE.n_params == 1116


def test_network_input_mismatch_raises():
    arch = MLPArchitecture((3, 2))
    layout = ParamLayout(arch.segments("net"))
    with pytest.raises(ValueError):
        mlp_forward(np.zeros(layout.size), layout, "net", np.zeros(4), arch)


def test_network_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    arch = MLPArchitecture((3, 5, 5, 2), "tanh")
    layout = ParamLayout(arch.segments("net"))
    params = glorot_init(layout, rng)
    params.values += 0.1 * rng.normal(size=layout.size)
    inputs = rng.normal(size=(4, 3))

    def objective(flat):
        return ad.sum_(ad.square(mlp_forward(flat, layout, "net", inputs, arch)))

    tape = ad.Tape()
    flat = params.as_var(tape)
    grad = tape.backward(objective(flat))[flat]
    expected = finite_difference(lambda v: float(objective(v).value), params.values)
    np.testing.assert_allclose(grad, expected, rtol=1e-4, atol=1e-8)


def test_gradients_are_deterministic():
    arch = MLPArchitecture((2, 8, 1), "relu")
    layout = ParamLayout(arch.segments("net"))
    params = glorot_init(layout, np.random.default_rng(2))
    inputs = np.random.default_rng(3).normal(size=(10, 2))
    results = []
    for _ in range(2):
        tape = ad.Tape()
        flat = params.as_var(tape)
        results.append(tape.backward(ad.sum_(mlp_forward(flat, layout, "net", inputs, arch)))[flat])
    assert np.array_equal(results[0], results[1])


def test_accumulate_weighted_contract():
    g = np.array([1.0, -2.0, 3.0])
    acc = GradAccumulator(np.zeros(3))
    accumulate_weighted(acc, g, 0.0)
    assert np.all(acc.grads == 0) and acc.weight_total == 0

    accumulate_weighted(acc, g, 0.5)
    accumulate_weighted(acc, g, 0.5)
    np.testing.assert_allclose(acc.grads, g)
    assert acc.weight_total == 1.0

    acc.reset()
    assert np.all(acc.grads == 0) and acc.weight_total == 0


def test_accumulator_linearity():
    rng = np.random.default_rng(4)
    g1, g2 = rng.normal(size=5), rng.normal(size=5)
    split = GradAccumulator(np.zeros(5))
    accumulate_weighted(split, g1, 0.3)
    accumulate_weighted(split, g2, 0.7)
    joint = GradAccumulator(np.zeros(5))
    accumulate_weighted(joint, 0.3 * g1 + 0.7 * g2, 1.0)
    np.testing.assert_allclose(split.grads, joint.grads)

    merged = GradAccumulator(np.zeros(5)).merge(split)
    np.testing.assert_allclose(merged.normalized(), split.grads)


def test_layout_mask_selects_segments():
    layout = ParamLayout([("obs.w0", (2, 2)), ("policy.log_sigma", (2,))])
    mask = layout.mask(["policy"])
    assert mask.tolist() == [False] * 4 + [True, True]
    with pytest.raises(ValueError):
        layout.mask(["missing"])


def test_checkpoint_round_trip_and_corruption():
    layout = ParamLayout([("a.w0", (2, 3)), ("a.b0", (3,))])
    params = ParamVector(layout, np.random.default_rng(5).normal(size=layout.size))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "params.ckpt")
        save_checkpoint(path, params, {"policy": "simple"})
        loaded, meta = load_checkpoint(path)
        assert loaded.layout == layout
        assert np.array_equal(loaded.values, params.values)
        assert meta == {"policy": "simple"}

        with open(path, "r+b") as fh:
            fh.seek(-1, os.SEEK_END)
            last = fh.read(1)
            fh.seek(-1, os.SEEK_END)
            fh.write(bytes([last[0] ^ 0xFF]))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


if __name__ == "__main__":
    print("Testing gradient engine...")
    test_square_gradient()
    test_log_softmax_gradient()
    test_backward_on_empty_tape_raises()
    test_backward_releases_graph()
    test_elementwise_ops_match_finite_differences()
    test_zero_network_outputs_zero()
    test_affine_one_by_one_network()
    test_parameter_counts()
    test_network_input_mismatch_raises()
    test_network_gradient_matches_finite_differences()
    test_gradients_are_deterministic()
    test_accumulate_weighted_contract()
    test_accumulator_linearity()
    test_layout_mask_selects_segments()
    test_checkpoint_round_trip_and_corruption()
    print("\n✅ Gradient engine tests passed!")
