"""Input-state feedback linearization of the QPS.

The flat state is ``z = [r, dr, ddr, dddr, psi, dpsi]`` (14 components). In
these coordinates the vehicle is four decoupled integrator chains driven by
``v = [snap_x, snap_y, snap_z, ddpsi]``, and ``v = M u + N`` links ``v`` to
the physical input ``u = [ddp, ddphi, ddtheta, ddpsi]``.
"""

import math
from typing import NamedTuple

import numpy as np

from .dynamics import (
    QpsParams,
    STATE_DIM,
    _C3,
    _cross,
    _d2,
    _omega,
    _omega_dot_residual,
    _rows,
)
from .errors import DomainError, SingularityError

FLAT_DIM = 14
MIN_THRUST = 0.1
MAX_TILT = math.radians(80.0)

DEFAULT_POLES = (
    (-2.0, -2.5, -3.0, -3.5),
    (-2.0, -2.5, -3.0, -3.5),
    (-2.0, -2.5, -3.0, -3.5),
    (-3.0, -4.0),
)

# flat-state columns feeding each chain, lowest derivative first
_CHAINS = ((0, 3, 6, 9), (1, 4, 7, 10), (2, 5, 8, 11), (12, 13))


def make_flat(r=(0.0, 0.0, 0.0), dr=(0.0, 0.0, 0.0), ddr=(0.0, 0.0, 0.0),
              dddr=(0.0, 0.0, 0.0), psi=0.0, dpsi=0.0) -> np.ndarray:
    z = np.empty(FLAT_DIM)
    z[0:3] = r
    z[3:6] = dr
    z[6:9] = ddr
    z[9:12] = dddr
    z[12] = psi
    z[13] = dpsi
    return z


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _check_attitude(p, phi, theta):
    if not p > MIN_THRUST:
        raise SingularityError(f"thrust {p:.4g} N at or below {MIN_THRUST} N")
    if abs(phi) >= MAX_TILT or abs(theta) >= MAX_TILT:
        raise SingularityError(
            f"tilt (phi={math.degrees(phi):.1f}, theta={math.degrees(theta):.1f}) deg "
            f"beyond {math.degrees(MAX_TILT):.0f} deg"
        )


def _flat(x, params):
    m = params.m
    b1, _, b3 = _rows(x[6], x[7], x[8])
    w = _omega(b1, _d2(x[8]), (x[9], x[10], x[11]))
    p, dp = x[12], x[13]
    wxb3 = _cross(w, b3)
    acc = (p * b3[0] / m, p * b3[1] / m, p * b3[2] / m - params.g)
    jerk = tuple((dp * b3[i] + p * wxb3[i]) / m for i in range(3))
    return [x[0], x[1], x[2], x[3], x[4], x[5], *acc, *jerk, x[8], x[11]]


def state_to_flat(x, params: QpsParams) -> np.ndarray:
    """Flat coordinates of a physical state."""
    return np.array(_flat(x, params))


def flat_to_state(z, params: QpsParams) -> np.ndarray:
    """Physical state with the given flat coordinates.

    Raises:
        SingularityError: if the implied thrust is (near) zero or the implied
            attitude tilts 80 degrees or more.
    """
    m = params.m
    t = (m * z[6], m * z[7], m * (z[8] + params.g))
    p = math.sqrt(_dot(t, t))
    if not p > MIN_THRUST:
        raise SingularityError(f"implied thrust {p:.4g} N at or below {MIN_THRUST} N")
    b3 = (t[0] / p, t[1] / p, t[2] / p)
    psi = z[12]
    sp, cp = math.sin(psi), math.cos(psi)
    # b3 seen from the yaw-aligned frame: (cos(phi) sin(theta), -sin(phi), cos(phi) cos(theta))
    fwd = cp * b3[0] + sp * b3[1]
    side = -sp * b3[0] + cp * b3[1]
    phi = math.asin(max(-1.0, min(1.0, -side)))
    theta = math.atan2(fwd, b3[2])
    _check_attitude(p, phi, theta)

    b1, b2, b3 = _rows(phi, theta, psi)
    dpsi = z[13]
    c3xb3 = _cross(_C3, b3)
    rhs = tuple(z[9 + i] - p / m * dpsi * c3xb3[i] for i in range(3))
    # jerk matrix columns b3/m, -(p/m) b2, (p/m) cos(phi) b1 are orthogonal
    dp = m * _dot(rhs, b3)
    dphi = -m / p * _dot(rhs, b2)
    dtheta = m / (p * math.cos(phi)) * _dot(rhs, b1)

    x = np.empty(STATE_DIM)
    x[0:6] = z[0:6]
    x[6:9] = (phi, theta, psi)
    x[9:12] = (dphi, dtheta, dpsi)
    x[12] = p
    x[13] = dp
    return x


class Decoupling(NamedTuple):
    M: np.ndarray
    N: np.ndarray


def _decoupling_parts(x, params):
    m = params.m
    phi, theta, psi = x[6], x[7], x[8]
    p, dp = x[12], x[13]
    _check_attitude(p, phi, theta)
    b1, b2, b3 = _rows(phi, theta, psi)
    d2 = _d2(psi)
    rates = (x[9], x[10], x[11])
    w = _omega(b1, d2, rates)
    wd_res = _omega_dot_residual(b1, d2, rates)
    wxb3 = _cross(w, b3)
    wxwxb3 = _cross(w, wxb3)
    rxb3 = _cross(wd_res, b3)
    k = p / m
    N = tuple(2.0 * dp / m * wxb3[i] + k * rxb3[i] + k * wxwxb3[i] for i in range(3))
    return b1, b2, b3, d2, N


def decoupling(x, params: QpsParams) -> Decoupling:
    """``M`` and ``N`` of ``v = M u + N`` at state ``x``.

    ``N`` collects every term of the fourth derivative of position that does
    not depend on ``u``: the thrust-rate coupling ``2 dp/m (w x b3)``, the
    frame-rotation part of the angular acceleration and the centripetal term
    ``p/m w x (w x b3)``.
    """
    b1, b2, b3, d2, N = _decoupling_parts(x, params)
    k = x[12] / params.m
    M = np.zeros((4, 4))
    M[0:3, 0] = np.array(b3) / params.m
    M[0:3, 1] = -k * np.array(b2)
    M[0:3, 2] = k * np.array(_cross(d2, b3))
    M[0:3, 3] = k * np.array(_cross(_C3, b3))
    M[3, 3] = 1.0
    return Decoupling(M, np.array([N[0], N[1], N[2], 0.0]))


def flat_dynamics_matrices():
    """``A`` (14x14) and ``B`` (14x4) of the linear flat dynamics."""
    A = np.zeros((FLAT_DIM, FLAT_DIM))
    A[0:9, 3:12] = np.eye(9)
    A[12, 13] = 1.0
    B = np.zeros((FLAT_DIM, 4))
    B[9:12, 0:3] = np.eye(3)
    B[13, 3] = 1.0
    return A, B


def design_gains(pole_sets=DEFAULT_POLES) -> np.ndarray:
    """Gain matrix placing the given real poles on each integrator chain.

    Args:
        pole_sets: four pole lists, for the x, y and z chains (four poles
            each) and the yaw chain (two poles). Every pole must be negative.

    Returns:
        4x14 matrix ``K`` such that ``A - B K`` has exactly these
        eigenvalues.
    """
    if len(pole_sets) != 4:
        raise DomainError("expected four pole sets (x, y, z, yaw)")
    K = np.zeros((4, FLAT_DIM))
    for row, (poles, cols) in enumerate(zip(pole_sets, _CHAINS)):
        poles = [float(s) for s in poles]
        if len(poles) != len(cols):
            raise DomainError(f"chain {row} needs {len(cols)} poles, got {len(poles)}")
        if any(not (s < 0) for s in poles):
            raise DomainError(f"poles must be negative, got {poles}")
        # characteristic polynomial s^n + a_{n-1} s^{n-1} + ... + a_0
        coeffs = np.poly(poles)[1:][::-1]
        K[row, list(cols)] = coeffs
    return K


class ControlLaw:
    """Tracking law ``u = M^-1 (K (z_d - z) - N)`` for fixed gains."""

    def __init__(self, K, params: QpsParams):
        self.K = np.asarray(K, dtype=np.float64)
        if self.K.shape != (4, FLAT_DIM):
            raise DomainError(f"gain matrix must be 4x14, got {self.K.shape}")
        self.params = params

    def __call__(self, x, z_d) -> np.ndarray:
        z = _flat(x, self.params)
        v = self.K @ (np.asarray(z_d) - z)
        return self._invert(x, v)

    def _invert(self, x, v):
        m = self.params.m
        b1, b2, b3, _, N = _decoupling_parts(x, self.params)
        p = x[12]
        ddpsi = v[3]
        c3xb3 = _cross(_C3, b3)
        w = tuple(v[i] - N[i] - p / m * ddpsi * c3xb3[i] for i in range(3))
        u = np.empty(4)
        u[0] = m * _dot(w, b3)
        u[1] = -m / p * _dot(w, b2)
        u[2] = m / (p * math.cos(x[6])) * _dot(w, b1)
        u[3] = ddpsi
        return u


def control_step(x, z_d, K, params: QpsParams) -> np.ndarray:
    """One evaluation of the tracking law.

    Raises:
        SingularityError: when the decoupling matrix is singular at ``x``.
    """
    return ControlLaw(K, params)(x, z_d)
