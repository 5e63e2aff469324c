import math

import numpy as np
import pytest

from payload_transport.control import make_flat, state_to_flat
from payload_transport.dynamics import QpsParams, hover_state, make_state
from payload_transport.errors import DomainError, NumericalBlowupError
from payload_transport.simulation import TrackingContext, rk4_step, rotor_check, track
from payload_transport.terrain import SafetyParams

PARAMS = QpsParams.from_bodies()
G = PARAMS.g


def test_hover_is_unchanged():
    x0 = hover_state(PARAMS, (1.0, 2.0, 3.0))
    x = x0
    for _ in range(1000):
        x = rk4_step(x, np.zeros(4), 1e-3, PARAMS)
    assert np.abs(x - x0).max() <= 1e-14


def test_free_fall_single_step():
    x = rk4_step(make_state(p=0.0), np.zeros(4), 0.1, PARAMS)
    assert x[2] == pytest.approx(-0.5 * G * 0.01, abs=1e-15)
    assert x[2] == pytest.approx(-0.04905, abs=1e-15)
    assert x[5] == pytest.approx(-0.981, abs=1e-15)
    assert np.all(x[[0, 1, 3, 4]] == 0.0)


def _integrate(x, u, h, t_end):
    for _ in range(int(round(t_end / h))):
        x = rk4_step(x, u, h, PARAMS)
    return x


def test_fourth_order_convergence():
    x0 = make_state(angles=(0.2, -0.1, 0.3), p=9.0, pdot=1.0)
    x0[9:12] = (0.5, -0.3, 0.2)
    u = np.array([0.7, 0.4, -0.6, 0.3])
    coarse, mid, fine = (_integrate(x0, u, h, 1.0) for h in (0.04, 0.02, 0.01))
    order = math.log2(np.linalg.norm(coarse - mid) / np.linalg.norm(mid - fine))
    assert order >= 3.8


def test_blowup_is_reported():
    x = hover_state(PARAMS)
    x[9] = 1e308
    with pytest.raises(NumericalBlowupError):
        rk4_step(x, np.array([1e308, 0, 0, 0]), 1.0, PARAMS)


def test_step_size_must_be_positive():
    with pytest.raises(DomainError):
        rk4_step(hover_state(PARAMS), np.zeros(4), 0.0, PARAMS)
    with pytest.raises(DomainError):
        TrackingContext(PARAMS, dt=-1e-3)


def test_rotor_check_bounds():
    assert rotor_check((0.0, 1.0, 4.0, 9.0), 3.0)
    assert not rotor_check((0.0, 1.0, 4.0, 9.01), 3.0)
    assert not rotor_check((-1e-12, 1.0, 1.0, 1.0), 3.0)


def test_holding_hover_is_ok_to_the_last_step():
    ctx = TrackingContext(PARAMS)
    x0 = hover_state(PARAMS, (0, 0, 5))
    target = state_to_flat(x0, PARAMS)
    seen = []
    res = track(x0, lambda t: target, 0.5, ctx, on_step=seen.append)
    assert res.ok and res.steps == 500 and len(seen) == 501
    assert seen[0].t == 0.0 and seen[-1].t == pytest.approx(0.5)
    assert res.max_error == 0.0
    assert res.max_speed == pytest.approx(math.sqrt(PARAMS.hover_thrust / (4 * PARAMS.b)))


def test_tracking_bound_stops_the_run():
    ctx = TrackingContext(PARAMS, SafetyParams(delta=0.35))
    far = make_flat(r=(0, 0, 1.0))
    res = track(hover_state(PARAMS), lambda t: far, 1.0, ctx)
    assert not res.ok and res.reason == "tracking bound" and res.steps == 0


def test_rotor_bound_stops_the_run():
    ctx = TrackingContext(PARAMS, SafetyParams(delta=10.0, s_max=260.0))
    res = track(hover_state(PARAMS), lambda t: make_flat(r=(0, 0, 3.0)), 2.0, ctx)
    assert not res.ok and res.reason == "rotor speed bound"


def test_violations_can_be_recorded_without_stopping():
    ctx = TrackingContext(PARAMS, SafetyParams(delta=0.35))
    flags = []
    res = track(hover_state(PARAMS), lambda t: make_flat(r=(0, 0, 1.0)), 0.2, ctx,
                on_step=lambda s: flags.append(s.track_ok), stop_on_violation=False)
    assert not res.ok and res.steps == 200
    assert len(flags) == 201 and not flags[0]
