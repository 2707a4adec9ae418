"""
Test script for the domain types and planar geometry
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from data.schemas.geometry import box_corners, principal_axis_angle, wrap_angle
from data.schemas.schema_definitions import BoxDims, Pose2D


def test_wrap_angle_examples():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3 * np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi
    assert wrap_angle(np.pi) == np.pi
    assert np.isclose(wrap_angle(-3 * np.pi / 2), np.pi / 2)


def test_wrap_angle_range_and_congruence():
    theta = np.random.default_rng(0).uniform(-50.0, 50.0, size=10_000)
    wrapped = wrap_angle(theta)
    assert np.all(wrapped > -np.pi) and np.all(wrapped <= np.pi)
    turns = (theta - wrapped) / (2 * np.pi)
    np.testing.assert_allclose(turns, np.round(turns), atol=1e-9)


def test_wrap_angle_is_idempotent():
    theta = np.random.default_rng(1).uniform(-20.0, 20.0, size=10_000)
    once = wrap_angle(theta)
    np.testing.assert_array_equal(wrap_angle(once), once)


def test_wrap_angle_rejects_non_finite():
    with pytest.raises(ValueError):
        wrap_angle(np.nan)
    with pytest.raises(ValueError):
        wrap_angle(np.array([0.0, np.inf]))


def test_box_corners_examples():
    dims = BoxDims(4.0, 2.0)
    np.testing.assert_allclose(box_corners(Pose2D(0.0, 0.0, 0.0), dims),
                               [[2, 1], [-2, 1], [-2, -1], [2, -1]], atol=1e-12)
    np.testing.assert_allclose(box_corners(Pose2D(0.0, 0.0, np.pi / 2), dims),
                               [[-1, 2], [-1, -2], [1, -2], [1, 2]], atol=1e-12)

    corners = box_corners(Pose2D(1.0, 1.0, np.pi / 4), BoxDims(2.0, 2.0))
    np.testing.assert_allclose(np.hypot(corners[:, 0] - 1.0, corners[:, 1] - 1.0),
                               np.sqrt(2.0))


def test_box_corners_diagonals():
    rng = np.random.default_rng(2)
    for _ in range(200):
        pose = Pose2D(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-np.pi, np.pi))
        dims = BoxDims(rng.uniform(0.5, 12.0), rng.uniform(0.5, 3.0))
        corners = box_corners(pose, dims)
        diagonal = np.hypot(dims.length, dims.width)
        assert np.isclose(np.linalg.norm(corners[0] - corners[2]), diagonal)
        assert np.isclose(np.linalg.norm(corners[1] - corners[3]), diagonal)
        # Counterclockwise order gives a positive signed area
        x, y = corners[:, 0], corners[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        assert np.isclose(area, dims.length * dims.width)


def test_principal_axis_angle():
    t = np.linspace(-3.0, 3.0, 25)
    points = np.column_stack([t * np.cos(2.8), t * np.sin(2.8)])
    assert np.isclose(principal_axis_angle(points), 2.8)
    assert principal_axis_angle(points[:1]) == 0.0


if __name__ == "__main__":
    print("Testing domain geometry...")
    test_wrap_angle_examples()
    test_wrap_angle_range_and_congruence()
    test_wrap_angle_is_idempotent()
    test_wrap_angle_rejects_non_finite()
    test_box_corners_examples()
    test_box_corners_diagonals()
    test_principal_axis_angle()
    print("\n✅ Domain geometry tests passed!")
