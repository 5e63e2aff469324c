import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from payload_transport.control import (
    DEFAULT_POLES,
    ControlLaw,
    control_step,
    decoupling,
    design_gains,
    flat_dynamics_matrices,
    flat_to_state,
    make_flat,
    state_to_flat,
)
from payload_transport.dynamics import QpsParams, hover_state, make_state, state_derivative
from payload_transport.errors import DomainError, SingularityError
from payload_transport.simulation import rk4_step

PARAMS = QpsParams.from_bodies()
M, G = PARAMS.m, PARAMS.g


def random_feasible_state(rng, tilt=1.2):
    x = np.empty(14)
    x[0:6] = rng.uniform(-10, 10, 6)
    x[6:8] = rng.uniform(-tilt, tilt, 2)
    x[8] = rng.uniform(-math.pi, math.pi)
    x[9:12] = rng.uniform(-2, 2, 3)
    x[12] = rng.uniform(1.0, 25.0)
    x[13] = rng.uniform(-5, 5)
    return x


# -- flat coordinates --------------------------------------------------------


def test_hover_has_zero_acceleration_and_jerk():
    z = state_to_flat(hover_state(PARAMS, (1, 2, 3)), PARAMS)
    assert np.allclose(z[6:12], 0.0, atol=1e-15)
    assert np.array_equal(z[0:3], [1, 2, 3])


def test_double_thrust_accelerates_upward():
    z = state_to_flat(make_state(p=2 * M * G), PARAMS)
    assert np.allclose(z[6:9], [0, 0, G])
    assert np.allclose(z[9:12], 0.0)


def test_thrust_rate_gives_vertical_jerk():
    z = state_to_flat(make_state(p=M * G, pdot=M), PARAMS)
    assert np.allclose(z[9:12], [0, 0, 1])


def test_flat_to_state_at_rest_is_hover():
    x = flat_to_state(make_flat(r=(4, 5, 6)), PARAMS)
    assert np.allclose(x, hover_state(PARAMS, (4, 5, 6)), atol=1e-15)


def test_free_fall_is_singular():
    with pytest.raises(SingularityError):
        flat_to_state(make_flat(ddr=(0, 0, -G)), PARAMS)


def test_near_horizontal_thrust_is_singular():
    with pytest.raises(SingularityError):
        flat_to_state(make_flat(ddr=(100.0, 0, 0)), PARAMS)


def test_round_trip_state_flat_state(rng):
    worst = 0.0
    for _ in range(1000):
        x = random_feasible_state(rng)
        back = flat_to_state(state_to_flat(x, PARAMS), PARAMS)
        worst = max(worst, np.abs(back - x).max())
    assert worst < 1e-9


# -- decoupling --------------------------------------------------------------


def test_hover_decoupling_structure():
    d = decoupling(hover_state(PARAMS), PARAMS)
    p = M * G
    expected = [[0, 0, p / M, 0], [0, -p / M, 0, 0], [1 / M, 0, 0, 0], [0, 0, 0, 1]]
    assert np.allclose(d.M, expected, atol=1e-15)
    assert np.all(d.N == 0.0)


def test_zero_rates_give_zero_residual(rng):
    for _ in range(20):
        x = random_feasible_state(rng)
        x[9:12] = 0.0
        x[13] = 0.0
        assert np.allclose(decoupling(x, PARAMS).N, 0.0, atol=1e-14)


def test_decoupling_last_row():
    d = decoupling(random_feasible_state(np.random.default_rng(5)), PARAMS)
    assert np.array_equal(d.M[3], [0, 0, 0, 1]) and d.N[3] == 0.0


def _rk4(x, u, h):
    k1 = state_derivative(x, u, PARAMS)
    k2 = state_derivative(x + 0.5 * h * k1, u, PARAMS)
    k3 = state_derivative(x + 0.5 * h * k2, u, PARAMS)
    k4 = state_derivative(x + h * k3, u, PARAMS)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def test_snap_matches_finite_difference(rng):
    dt = 1e-5
    for _ in range(100):
        x = random_feasible_state(rng)
        u = rng.uniform(-5, 5, 4)
        jerk_fwd = state_to_flat(_rk4(x, u, dt), PARAMS)[9:12]
        jerk_bwd = state_to_flat(_rk4(x, u, -dt), PARAMS)[9:12]
        fd = (jerk_fwd - jerk_bwd) / (2 * dt)
        d = decoupling(x, PARAMS)
        model = (d.M @ u + d.N)[0:3]
        assert np.linalg.norm(fd - model) <= 1e-3 * np.linalg.norm(model)


@given(phi=st.floats(-1.39, 1.39), theta=st.floats(-1.39, 1.39), psi=st.floats(-3, 3),
       p=st.floats(0.11, 40.0))
def test_decoupling_matrix_invertible_inside_margins(phi, theta, psi, p):
    x = make_state(angles=(phi, theta, psi), p=p)
    det = np.linalg.det(decoupling(x, PARAMS).M)
    # |det| = (p/m)^2 cos(phi) / m for these orthogonal columns
    assert abs(det) == pytest.approx((p / M) ** 2 * math.cos(phi) / M, rel=1e-9)
    assert abs(det) > 0


def test_decoupling_rejects_singular_states():
    with pytest.raises(SingularityError):
        decoupling(make_state(p=0.0), PARAMS)
    with pytest.raises(SingularityError):
        decoupling(make_state(angles=(0, math.radians(85), 0), p=5.0), PARAMS)


# -- gains -------------------------------------------------------------------


def test_quadruple_chain_gains_by_hand_expansion():
    K = design_gains(DEFAULT_POLES)
    # (s+2)(s+2.5) = s^2 + 4.5 s + 5 and (s+3)(s+3.5) = s^2 + 6.5 s + 10.5
    # product: s^4 + 11 s^3 + 44.75 s^2 + 79.75 s + 52.5
    assert np.allclose(K[0, [0, 3, 6, 9]], [52.5, 79.75, 44.75, 11.0], rtol=0, atol=1e-12)


def test_double_chain_gains():
    K = design_gains(((-2, -2.5, -3, -3.5),) * 3 + ((-1, -1),))
    assert np.allclose(K[3, [12, 13]], [1.0, 2.0])


def test_closed_loop_eigenvalues_are_the_requested_poles():
    poles = ((-1.0, -2.0, -3.0, -4.0), (-0.5, -1.5, -2.5, -3.5), (-2.0, -2.5, -3.0, -3.5), (-3.0, -4.0))
    A, B = flat_dynamics_matrices()
    eig = np.sort(np.linalg.eigvals(A - B @ design_gains(poles)).real)
    assert np.allclose(eig, np.sort(np.concatenate(poles)), atol=1e-8)
    assert np.all(eig < 0)


def test_non_negative_poles_rejected():
    with pytest.raises(DomainError):
        design_gains(((-1, -2, -3, 0.0),) + DEFAULT_POLES[1:])
    with pytest.raises(DomainError):
        design_gains(DEFAULT_POLES[:3])


# -- control law -------------------------------------------------------------


def test_zero_error_at_hover_gives_zero_input():
    x = hover_state(PARAMS, (1, 1, 1))
    u = control_step(x, state_to_flat(x, PARAMS), design_gains(), PARAMS)
    assert np.allclose(u, 0.0, atol=1e-14)


def test_vertical_offset_drives_only_thrust():
    x = hover_state(PARAMS)
    u = control_step(x, make_flat(r=(0, 0, 1)), design_gains(), PARAMS)
    assert u[0] != 0.0
    assert np.allclose(u[1:], 0.0, atol=1e-14)


def test_control_law_produces_commanded_snap(rng):
    law = ControlLaw(design_gains(), PARAMS)
    for _ in range(20):
        x = random_feasible_state(rng, tilt=0.8)
        zd = state_to_flat(x, PARAMS) + rng.normal(scale=0.1, size=14)
        u = law(x, zd)
        d = decoupling(x, PARAMS)
        v = design_gains() @ (zd - state_to_flat(x, PARAMS))
        assert np.allclose(d.M @ u + d.N, v, atol=1e-9)


def test_regulation_to_a_constant_target():
    law = ControlLaw(design_gains(), PARAMS)
    x = hover_state(PARAMS)
    zd = make_flat(r=(1.0, -0.5, 0.8), psi=0.2)
    dt = 1e-3
    errors = []
    for k in range(10000):
        x = rk4_step(x, law(x, zd), dt, PARAMS)
        errors.append(np.linalg.norm(state_to_flat(x, PARAMS) - zd))
    assert errors[-1] < 1e-6
    tail = np.array(errors[6000:])
    assert np.all(np.diff(tail) <= 0)
