import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from payload_transport import TransportPlanner
from payload_transport.errors import ConfigError, DomainError, NoPathError
from payload_transport.terrain import ElevationMap, sample


def _terrain():
    h = np.zeros((30, 40))
    h[10:20, 15:25] = 8.0
    return ElevationMap((0.0, 0.0), 1.0, h)


@pytest.fixture(scope="module")
def fitted():
    return TransportPlanner(settle=0.5).fit(_terrain())


def test_params_round_trip_and_clone():
    est = TransportPlanner(weight=1.0, delta=0.3)
    params = est.get_params()
    assert params["weight"] == 1.0 and params["delta"] == 0.3 and params["poles"] is None
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(epsilon=0.5)
    assert est.epsilon == 0.5


def test_unfitted_use_is_rejected():
    with pytest.raises(NotFittedError):
        TransportPlanner().plan((1, 1, 1), (2, 2, 2))


def test_fit_requires_an_elevation_map():
    with pytest.raises(DomainError):
        TransportPlanner().fit(np.zeros((4, 4)))


def test_fit_sets_the_derived_maps(fitted):
    assert fitted.expanded_map_.heights.shape == (30, 40)
    assert fitted.expanded_map_.heights.max() == pytest.approx(9.0)
    assert fitted.clearance_map_.heights.max() == pytest.approx(8.65)
    assert fitted.discrete_map_.delta == 1.0


def test_plan_goes_around_or_over_the_block(fitted):
    wp = fitted.plan((3.0, 15.0, 2.0), (36.0, 15.0, 2.0))
    assert wp.shape[1] == 3
    assert np.array_equal(wp[0], [3, 15, 2]) and np.array_equal(wp[-1], [36, 15, 2])
    for a, b in zip(wp[:-1], wp[1:]):
        for s in np.linspace(0, 1, 200):
            p = a + s * (b - a)
            assert p[2] > sample(fitted.expanded_map_, p[0], p[1])


def test_predict_maps_rows_to_paths(fitted):
    X = [[3, 3, 2, 36, 3, 2], [3, 27, 2, 36, 27, 3]]
    out = fitted.predict(X)
    assert len(out) == 2
    assert np.array_equal(out[1][-1], [36, 27, 3])
    with pytest.raises(DomainError):
        fitted.predict(np.zeros((2, 5)))


def test_endpoint_errors(fitted):
    with pytest.raises(ConfigError):
        fitted.plan((20.0, 15.0, 3.0), (36.0, 15.0, 2.0))
    with pytest.raises(NoPathError):
        fitted.plan((3.0, 15.0, 2.0), (20.0, 15.0, 3.0))
    with pytest.raises(DomainError):
        fitted.plan((3.0, np.nan, 2.0), (36.0, 15.0, 2.0))


def test_schedule_simulate_and_score(fitted):
    traj = fitted.schedule((3.0, 3.0, 2.0), (8.0, 3.0, 2.0))
    assert traj.times[0] == 0.0 and traj.duration > 0
    result = fitted.simulate((3.0, 3.0, 2.0), (8.0, 3.0, 2.0))
    assert result.trace.ok and result.summary["final_goal_distance"] < 0.35
    assert fitted.score([[3, 3, 2, 8, 3, 2]]) == 1.0
