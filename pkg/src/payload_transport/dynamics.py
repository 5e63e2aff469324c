"""Rigid-body model of the quadcopter-payload system (QPS).

The 14-component state vector is laid out as::

    [x, y, z, vx, vy, vz, phi, theta, psi, dphi, dtheta, dpsi, p, dp]

and the control input as ``u = [ddp, ddphi, ddtheta, ddpsi]``. Rotations
follow the 3-2-1 (yaw-pitch-roll) convention; body axes are the rows of the
rotation matrix ``S(phi, theta, psi)``.

The hot-path helpers work on plain floats: the closed-loop simulations call
them hundreds of thousands of times and small-array numpy overhead would
dominate.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InfeasibleThrustError

STATE_DIM = 14
POS = slice(0, 3)
VEL = slice(3, 6)
ANGLES = slice(6, 9)
RATES = slice(9, 12)
THRUST = 12
THRUST_RATE = 13

GRAVITY = 9.81


class RigidBody(NamedTuple):
    """Mass (kg) and diagonal inertia (Jx, Jy, Jz) in kg m^2."""

    m: float
    J: tuple


# Quadcopter and payload used in the reference mission.
QUADCOPTER = RigidBody(0.5, (0.0196, 0.0196, 0.0264))
PAYLOAD = RigidBody(0.3, (0.005, 0.005, 0.005))
PAYLOAD_OFFSET = 0.2
ARM_LENGTH = 0.25
THRUST_COEFF = 3e-5
DRAG_COEFF = 1.1e-6


class InertiaCombination(NamedTuple):
    m: float
    J: tuple
    d_prime: float


def combine_inertia(quad: RigidBody, payload: RigidBody, d: float) -> InertiaCombination:
    """Combine a quadcopter and a payload hung ``d`` metres below it.

    Both bodies have diagonal inertia about their own centres of mass; the
    roll and pitch inertias are shifted to the joint centre of mass with the
    parallel-axis theorem. ``d_prime`` is the distance from the quadcopter's
    centre of mass to the joint one.
    """
    if quad.m <= 0 or payload.m < 0:
        raise DomainError("masses must be positive")
    if d < 0:
        raise DomainError(f"offset must be non-negative, got {d}")
    m = quad.m + payload.m
    d_prime = d * payload.m / m
    shift_q = quad.m * d_prime ** 2
    shift_p = payload.m * (d - d_prime) ** 2
    J = (
        quad.J[0] + shift_q + payload.J[0] + shift_p,
        quad.J[1] + shift_q + payload.J[1] + shift_p,
        quad.J[2] + payload.J[2],
    )
    return InertiaCombination(m, J, d_prime)


@dataclass(frozen=True)
class QpsParams:
    """Physical parameters of the combined vehicle.

    ``b`` maps squared rotor speed to thrust, ``k`` to yaw torque and ``l``
    is the arm length.
    """

    m: float
    Jx: float
    Jy: float
    Jz: float
    b: float
    k: float
    l: float
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("m", "Jx", "Jy", "Jz", "b", "k", "l", "g"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value}")

    @property
    def J(self):
        return (self.Jx, self.Jy, self.Jz)

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g

    @classmethod
    def from_bodies(cls, quad=QUADCOPTER, payload=PAYLOAD, d=PAYLOAD_OFFSET,
                    b=THRUST_COEFF, k=DRAG_COEFF, l=ARM_LENGTH, g=GRAVITY):
        combo = combine_inertia(quad, payload, d)
        return cls(combo.m, *combo.J, b=b, k=k, l=l, g=g)

    def mixing_matrix(self) -> np.ndarray:
        """Maps squared rotor speeds to (thrust, roll, pitch, yaw torque)."""
        b, k, bl = self.b, self.k, self.b * self.l
        return np.array([
            [b, b, b, b],
            [0.0, -bl, 0.0, bl],
            [-bl, 0.0, bl, 0.0],
            [-k, k, -k, k],
        ])


def make_state(r=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0), angles=(0.0, 0.0, 0.0),
               rates=(0.0, 0.0, 0.0), p=0.0, pdot=0.0) -> np.ndarray:
    x = np.empty(STATE_DIM)
    x[POS] = r
    x[VEL] = v
    x[ANGLES] = angles
    x[RATES] = rates
    x[THRUST] = p
    x[THRUST_RATE] = pdot
    return x


def hover_state(params: QpsParams, position=(0.0, 0.0, 0.0)) -> np.ndarray:
    return make_state(r=position, p=params.hover_thrust)


# -- kinematics --------------------------------------------------------------


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _rows(phi, theta, psi):
    """Rows of S(phi, theta, psi) as float triples: the body axes b1, b2, b3."""
    sf, cf = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    b1 = (ct * cp, ct * sp, -st)
    b2 = (sf * st * cp - cf * sp, sf * st * sp + cf * cp, sf * ct)
    b3 = (cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct)
    return b1, b2, b3


def _d2(psi):
    return (-math.sin(psi), math.cos(psi), 0.0)


_C3 = (0.0, 0.0, 1.0)


def rotation_matrix(phi: float, theta: float, psi: float) -> np.ndarray:
    """Inertial-to-body rotation ``S`` for 3-2-1 Euler angles."""
    return np.array(_rows(phi, theta, psi))


class FrameSet(NamedTuple):
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    c3: np.ndarray
    d2: np.ndarray


def frames(phi: float, theta: float, psi: float) -> FrameSet:
    """Body axes and the intermediate yaw / yaw-pitch frame axes used by the
    angular-velocity decomposition, all in inertial coordinates."""
    b1, b2, b3 = _rows(phi, theta, psi)
    return FrameSet(np.array(b1), np.array(b2), np.array(b3), np.array(_C3), np.array(_d2(psi)))


def _omega(b1, d2, rates):
    dphi, dtheta, dpsi = rates
    return (
        dpsi * _C3[0] + dtheta * d2[0] + dphi * b1[0],
        dpsi * _C3[1] + dtheta * d2[1] + dphi * b1[1],
        dpsi * _C3[2] + dtheta * d2[2] + dphi * b1[2],
    )


def _omega_dot_residual(b1, d2, rates):
    """Angular acceleration with zero Euler accelerations: the part of
    d(omega)/dt produced by the rotating intermediate frames."""
    dphi, dtheta, dpsi = rates
    c3xd2 = _cross(_C3, d2)
    swing = (dtheta * d2[0], dtheta * d2[1], dpsi + dtheta * d2[2])
    sxb1 = _cross(swing, b1)
    return tuple(dtheta * dpsi * c3xd2[i] + dphi * sxb1[i] for i in range(3))


def _omega_dot(b1, d2, rates, accels):
    res = _omega_dot_residual(b1, d2, rates)
    ddphi, ddtheta, ddpsi = accels
    return tuple(
        ddpsi * _C3[i] + ddtheta * d2[i] + ddphi * b1[i] + res[i] for i in range(3)
    )


def angular_velocity(angles, rates) -> np.ndarray:
    b1, _, _ = _rows(*angles)
    return np.array(_omega(b1, _d2(angles[2]), tuple(rates)))


def angular_acceleration(angles, rates, accels) -> np.ndarray:
    b1, _, _ = _rows(*angles)
    return np.array(_omega_dot(b1, _d2(angles[2]), tuple(rates), tuple(accels)))


# -- dynamics ----------------------------------------------------------------


def state_derivative(x, u, params: QpsParams) -> np.ndarray:
    """Time derivative ``f(x) + G u`` of the full state."""
    phi, theta, psi = x[6], x[7], x[8]
    sf, cf = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    a = x[THRUST] / params.m
    dx = np.empty(STATE_DIM)
    dx[0:3] = x[3:6]
    dx[3] = a * (cf * st * cp + sf * sp)
    dx[4] = a * (cf * st * sp - sf * cp)
    dx[5] = a * (cf * ct) - params.g
    dx[6:9] = x[9:12]
    dx[9:12] = u[1:4]
    dx[12] = x[THRUST_RATE]
    dx[13] = u[0]
    return dx


def _body_torque(x, u, params):
    b1, b2, b3 = _rows(x[6], x[7], x[8])
    d2 = _d2(x[8])
    rates = (x[9], x[10], x[11])
    w = _omega(b1, d2, rates)
    wd = _omega_dot(b1, d2, rates, (u[1], u[2], u[3]))
    # rotate into the body frame: component along each body axis
    wb = tuple(bi[0] * w[0] + bi[1] * w[1] + bi[2] * w[2] for bi in (b1, b2, b3))
    wdb = tuple(bi[0] * wd[0] + bi[1] * wd[1] + bi[2] * wd[2] for bi in (b1, b2, b3))
    J = (params.Jx, params.Jy, params.Jz)
    Jw = (J[0] * wb[0], J[1] * wb[1], J[2] * wb[2])
    gyro = _cross(wb, Jw)
    return (J[0] * wdb[0] + gyro[0], J[1] * wdb[1] + gyro[1], J[2] * wdb[2] + gyro[2])


def body_torque(x, u, params: QpsParams) -> np.ndarray:
    """Body-frame torque ``J dw_B + w_B x J w_B`` needed to realise the
    commanded Euler accelerations at state ``x``."""
    return np.array(_body_torque(x, u, params))


def rotor_speeds_squared(p, tau, params: QpsParams):
    """Solve the mixing system for the four squared rotor speeds."""
    thrust = p / (4.0 * params.b)
    roll = tau[0] / (2.0 * params.b * params.l)
    pitch = tau[1] / (2.0 * params.b * params.l)
    yaw = tau[2] / (4.0 * params.k)
    return (
        thrust - pitch - yaw,
        thrust - roll + yaw,
        thrust + pitch - yaw,
        thrust + roll + yaw,
    )


class RotorSpeeds(NamedTuple):
    speeds: tuple
    squared: tuple


def rotor_speeds(p, tau, params: QpsParams) -> RotorSpeeds:
    """Rotor angular speeds (rad/s) producing thrust ``p`` and body torque
    ``tau``.

    Raises:
        InfeasibleThrustError: if any rotor needs a negative squared speed.
            ``rotor`` is 1-based.
    """
    sq = rotor_speeds_squared(p, tau, params)
    for j, s2 in enumerate(sq):
        if s2 < 0:
            raise InfeasibleThrustError(j + 1, sq)
    return RotorSpeeds(tuple(math.sqrt(s2) for s2 in sq), sq)


def signed_speeds(squared):
    """``sign(s^2) * sqrt(|s^2|)``; lets traces show infeasible demands."""
    return tuple(math.copysign(math.sqrt(abs(s2)), s2) for s2 in squared)
