"""
Planar geometry helpers

Angle wrapping, box corners and rigid transforms of the world frame.
All functions accept scalars or numpy arrays.
"""

import numpy as np


def wrap_angle(theta):
    """
    Wrap an angle to (-pi, pi]

    Args:
        theta: angle(s) in radians, must be finite

    Returns:
        Wrapped angle(s), congruent to theta mod 2*pi
    """
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValueError("wrap_angle needs finite input")
    # In-range angles pass through unchanged so wrapping is idempotent
    in_range = (theta > -np.pi) & (theta <= np.pi)
    wrapped = np.where(in_range, theta, np.pi - np.mod(np.pi - theta, 2.0 * np.pi))
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def box_corners(pose, dims) -> np.ndarray:
    """
    Corners of the heading-aligned rectangle centred at the pose

    Args:
        pose: Pose2D of the box centre
        dims: BoxDims (length along heading, width)

    Returns:
        (4, 2) array, counterclockwise starting front-left
    """
    half_l, half_w = dims.length / 2.0, dims.width / 2.0
    local = np.array([
        [half_l, half_w],
        [-half_l, half_w],
        [-half_l, -half_w],
        [half_l, -half_w],
    ])
    return local @ rotation(pose.theta).T + np.array([pose.x, pose.y])


def transform_states(states: np.ndarray, rotation_angle: float,
                     translation) -> np.ndarray:
    """Apply a rigid world-frame transform to (..., 5) state arrays"""
    states = np.array(states, dtype=np.float64, copy=True)
    xy = states[..., :2] @ rotation(rotation_angle).T + np.asarray(translation)
    states[..., 0] = xy[..., 0]
    states[..., 1] = xy[..., 1]
    states[..., 2] = wrap_angle(states[..., 2] + rotation_angle)
    return states


def principal_axis_angle(points: np.ndarray) -> float:
    """Direction of largest spread of a (P, 2) point set, in [0, pi)"""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    centred = points - points.mean(axis=0)
    cov = centred.T @ centred
    eigvals, eigvecs = np.linalg.eigh(cov)
    axis = eigvecs[:, np.argmax(eigvals)]
    return float(np.mod(np.arctan2(axis[1], axis[0]), np.pi))
