"""
Ackermann Motion Model

Deterministic kinematics x_t = tau(x_{t-1}, a_t) for the state
(x, y, theta, v, kappa) under a constant action (accel, pinch) held over
one time step:

    v(s)     = v0 + accel * s
    kappa(s) = kappa0 + pinch * s
    theta(s) = theta0 + v0*kappa0*s + (v0*pinch + accel*kappa0)*s^2/2

The cubic term of theta is dropped so the heading stays quadratic in s,
and the displacement (x, y) is the real/imaginary part of

    J = integral_0^dt (v0 + accel*s) * exp(i*theta(s)) ds

evaluated with Fresnel integrals, with a Taylor series in the quadratic
coefficient when that coefficient is small, or with Gauss-Legendre
quadrature when configured. The heading is wrapped on output only.
"""

import logging
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import fresnel

from autodiff import tape as ad
from data.schemas.geometry import wrap_angle
from data.schemas.schema_definitions import (
    Action,
    DEFAULT_DT,
    STATE_DIM,
    ACTION_DIM,
    VehicleState,
)

logger = logging.getLogger(__name__)


class MotionConfig(BaseModel):
    """Integration settings of the motion model"""
    model_config = ConfigDict(frozen=True)

    dt: float = Field(DEFAULT_DT, gt=0)
    integrator: Literal["closed_form", "quadrature"] = "closed_form"
    quadrature_order: int = Field(16, ge=8)


def _phase_coefficients(states: np.ndarray, actions: np.ndarray):
    """theta(s) = c + d*s + e*s^2 and v(s) = A + B*s"""
    theta0, v0, kappa0 = states[:, 2], states[:, 3], states[:, 4]
    accel, pinch = actions[:, 0], actions[:, 1]
    c = theta0
    d = v0 * kappa0
    e = 0.5 * (v0 * pinch + accel * kappa0)
    return c, d, e, v0, accel


def _gauss_legendre(dt: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * dt * (nodes + 1.0), 0.5 * dt * weights


def _displacement_quadrature(A, B, c, d, e, dt: float, order: int) -> np.ndarray:
    s, w = _gauss_legendre(dt, order)
    phase = c[:, None] + d[:, None] * s + e[:, None] * s ** 2
    integrand = (A[:, None] + B[:, None] * s) * np.exp(1j * phase)
    return integrand @ w


def _unit_moments(w: np.ndarray, n_max: int) -> np.ndarray:
    """E_n(w) = integral_0^1 u^n exp(i*w*u) du for n = 0..n_max, shape (len(w), n_max+1)"""
    n = np.arange(n_max + 1)
    out = np.zeros((len(w), n_max + 1), dtype=np.complex128)

    small = np.abs(w) <= 8.0
    if np.any(small):
        iw = 1j * w[small]
        term = np.ones_like(iw)
        acc = np.zeros((len(iw), n_max + 1), dtype=np.complex128)
        for m in range(60):
            if m > 0:
                term = term * iw / m
            acc += term[:, None] / (n[None, :] + m + 1)
        out[small] = acc

    large = ~small
    if np.any(large):
        iw = 1j * w[large]
        e_iw = np.exp(iw)
        prev = (e_iw - 1.0) / iw
        out[large, 0] = prev
        for k in range(1, n_max + 1):
            prev = (e_iw - k * prev) / iw
            out[large, k] = prev
    return out


def _displacement_taylor(A, B, c, d, e, dt: float, order: int = 5) -> np.ndarray:
    """Expansion of exp(i*e*s^2) to `order` in e"""
    moments = _unit_moments(d * dt, 2 * order + 1)
    rotation = np.exp(1j * c)
    total = np.zeros(len(A), dtype=np.complex128)
    coef = np.ones(len(A), dtype=np.complex128)
    for k in range(order + 1):
        if k > 0:
            coef = coef * (1j * e) / k
        m_even = dt ** (2 * k + 1) * moments[:, 2 * k]
        m_odd = dt ** (2 * k + 2) * moments[:, 2 * k + 1]
        total += coef * (A * m_even + B * m_odd)
    return rotation * total


def _displacement_fresnel(A, B, c, d, e, dt: float) -> np.ndarray:
    # integral of exp(i*phi) by completing the square; e < 0 via conjugation
    flip = e < 0
    cc = np.where(flip, -c, c)
    dd = np.where(flip, -d, d)
    ee = np.abs(e)
    scale = np.sqrt(2.0 * ee / np.pi)
    shift = dd / (2.0 * ee)
    s1, c1 = fresnel(scale * (dt + shift))
    s0, c0 = fresnel(scale * shift)
    base = np.sqrt(np.pi / (2.0 * ee)) * np.exp(1j * (cc - dd ** 2 / (4.0 * ee)))
    phase_integral = base * ((c1 - c0) + 1j * (s1 - s0))
    phase_integral = np.where(flip, np.conj(phase_integral), phase_integral)

    phi_end = c + d * dt + e * dt ** 2
    boundary = (np.exp(1j * phi_end) - np.exp(1j * c)) / 1j
    return B / (2.0 * e) * boundary + (A - B * d / (2.0 * e)) * phase_integral


def _displacement(A, B, c, d, e, cfg: MotionConfig) -> np.ndarray:
    dt = cfg.dt
    if cfg.integrator == "quadrature":
        return _displacement_quadrature(A, B, c, d, e, dt, cfg.quadrature_order)
    out = np.empty(len(A), dtype=np.complex128)
    use_fresnel = np.abs(e) * dt ** 2 > FRESNEL_THRESHOLD
    if np.any(use_fresnel):
        m = use_fresnel
        out[m] = _displacement_fresnel(A[m], B[m], c[m], d[m], e[m], dt)
    if np.any(~use_fresnel):
        m = ~use_fresnel
        out[m] = _displacement_taylor(A[m], B[m], c[m], d[m], e[m], dt)
    return out


def _check_batch(states: np.ndarray, actions: np.ndarray):
    if states.ndim != 2 or states.shape[1] != STATE_DIM:
        raise ValueError(f"states must be (N, {STATE_DIM}), got {states.shape}")
    if actions.shape != (states.shape[0], ACTION_DIM):
        raise ValueError(f"actions must be ({states.shape[0]}, {ACTION_DIM}), got {actions.shape}")


def propagate_batch(states: np.ndarray, actions: np.ndarray,
                    cfg: MotionConfig = MotionConfig()) -> np.ndarray:
    """Propagate (N, 5) states under (N, 2) actions over one time step"""
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    _check_batch(states, actions)
    dt = cfg.dt
    c, d, e, A, B = _phase_coefficients(states, actions)
    disp = _displacement(A, B, c, d, e, cfg)

    out = np.empty_like(states)
    out[:, 0] = states[:, 0] + disp.real
    out[:, 1] = states[:, 1] + disp.imag
    out[:, 2] = wrap_angle(c + d * dt + e * dt ** 2)
    out[:, 3] = A + B * dt
    out[:, 4] = states[:, 4] + actions[:, 1] * dt
    return out


def propagate_with_input_grads_batch(states: np.ndarray, actions: np.ndarray,
                                     cfg: MotionConfig = MotionConfig()):
    """
    Next states and the Jacobian of every output w.r.t. every input

    Returns:
        (next_states (N, 5), jacobian (N, 5, 7)); jacobian columns are
        (x, y, theta, v, kappa, accel, pinch)
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    next_states = propagate_batch(states, actions, cfg)
    dt = cfg.dt
    n = len(states)
    c, d, e, A, B = _phase_coefficients(states, actions)
    v0, kappa0 = states[:, 3], states[:, 4]
    accel, pinch = actions[:, 0], actions[:, 1]

    s, w = _gauss_legendre(dt, max(cfg.quadrature_order, 16))
    s2 = s ** 2
    rot = np.exp(1j * (c[:, None] + d[:, None] * s + e[:, None] * s2))
    speed = A[:, None] + B[:, None] * s

    # d theta(s) / d input and d v(s) / d input, per quadrature node
    one = np.ones((n, len(s)))
    zero = np.zeros((n, len(s)))
    dtheta = {
        3: kappa0[:, None] * s + 0.5 * pinch[:, None] * s2,
        4: v0[:, None] * s + 0.5 * accel[:, None] * s2,
        5: 0.5 * kappa0[:, None] * s2,
        6: 0.5 * v0[:, None] * s2,
    }
    dspeed = {3: one, 5: one * s}

    jac = np.zeros((n, STATE_DIM, STATE_DIM + ACTION_DIM))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    disp_x = next_states[:, 0] - states[:, 0]
    disp_y = next_states[:, 1] - states[:, 1]
    jac[:, 0, 2] = -disp_y
    jac[:, 1, 2] = disp_x
    for col in (3, 4, 5, 6):
        integrand = (dspeed.get(col, zero) + 1j * speed * dtheta[col]) * rot
        value = integrand @ w
        jac[:, 0, col] = value.real
        jac[:, 1, col] = value.imag

    jac[:, 2, 2] = 1.0
    jac[:, 2, 3] = kappa0 * dt + 0.5 * pinch * dt ** 2
    jac[:, 2, 4] = v0 * dt + 0.5 * accel * dt ** 2
    jac[:, 2, 5] = 0.5 * kappa0 * dt ** 2
    jac[:, 2, 6] = 0.5 * v0 * dt ** 2
    jac[:, 3, 3] = 1.0
    jac[:, 3, 5] = dt
    jac[:, 4, 4] = 1.0
    jac[:, 4, 6] = dt
    return next_states, jac


def propagate(state: VehicleState, action: Action,
              cfg: MotionConfig = MotionConfig()) -> VehicleState:
    out = propagate_batch(state.to_array()[None, :], action.to_array()[None, :], cfg)
    return VehicleState.from_array(out[0])


def propagate_with_input_grads(state: VehicleState, action: Action,
                               cfg: MotionConfig = MotionConfig()):
    """
    Single-state propagation with Jacobians

    Returns:
        (next VehicleState, d next / d state (5, 5), d next / d action (5, 2))
    """
    out, jac = propagate_with_input_grads_batch(
        state.to_array()[None, :], action.to_array()[None, :], cfg
    )
    return VehicleState.from_array(out[0]), jac[0, :, :STATE_DIM], jac[0, :, STATE_DIM:]


def propagate_tape(states, actions, cfg: MotionConfig = MotionConfig()) -> ad.Var:
    """
    Motion step on tape values

    Constant inputs take the plain path; recorded inputs get vector-Jacobian
    products from `propagate_with_input_grads_batch`.
    """
    states, actions = ad.lift(states), ad.lift(actions)
    if states.tape is None and actions.tape is None:
        return ad.Var(propagate_batch(states.value, actions.value, cfg))

    next_states, jac = propagate_with_input_grads_batch(states.value, actions.value, cfg)
    jac_state = jac[:, :, :STATE_DIM]
    jac_action = jac[:, :, STATE_DIM:]
    return ad.custom(next_states, [
        (states, lambda g: np.einsum("ni,nij->nj", g, jac_state)),
        (actions, lambda g: np.einsum("ni,nij->nj", g, jac_action)),
    ])


# Switch from the Taylor series to Fresnel integrals above this |e|*dt^2
FRESNEL_THRESHOLD = 1e-4
