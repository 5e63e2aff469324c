"""Estimator-style facade over the mission pipeline.

``TransportPlanner`` follows the scikit-learn conventions: constructor
arguments are plain hyper-parameters stored verbatim, ``fit`` consumes an
elevation map and stores the derived maps in trailing-underscore
attributes, and ``get_params``/``set_params``/``clone`` work as usual.

    planner = TransportPlanner(weight=1.0).fit(terrain)
    waypoints = planner.plan((5, 5, 3), (90, 80, 12))
    result = planner.simulate((5, 5, 3), (90, 80, 12))
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .control import DEFAULT_POLES
from .dynamics import QpsParams
from .errors import DomainError
from .mission import (
    MissionConfig,
    MissionResult,
    attach_endpoints,
    fly,
    prepare_maps,
    schedule,
    validate_endpoints,
)
from .route import PlannerConfig, plan_route
from .tempo import TemporalConfig, TimedTrajectory
from .terrain import ElevationMap, SafetyParams, discretize


def check_point(point, name="point") -> np.ndarray:
    """Validate a finite 3-vector and return it as a float array."""
    arr = np.asarray(point, dtype=np.float64)
    if arr.shape != (3,):
        raise DomainError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {arr.tolist()}")
    return arr


def check_elevation_map(emap) -> ElevationMap:
    if not isinstance(emap, ElevationMap):
        raise DomainError(f"expected an ElevationMap, got {type(emap).__name__}")
    return emap


def check_pairs(X) -> np.ndarray:
    """Rows of ``(x_s, y_s, z_s, x_g, y_g, z_g)``."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 6:
        raise DomainError(f"expected shape (n, 6) of start/goal pairs, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("start/goal pairs must be finite")
    return arr


class TransportPlanner(BaseEstimator):
    """Plan, time and fly payload missions over one elevation map.

    Parameters
    ----------
    epsilon, delta : float
        Vehicle radius and tracking-error bound, metres.
    s_max : float
        Rotor speed limit, rad/s.
    resolution : float
        Lattice spacing of the route search, metres.
    weight : float
        Heuristic inflation of the search (1 gives optimal lattice paths).
    delta_t : float
        Relative stopping width of the per-segment time search.
    dt_sim : float
        Simulation step, seconds.
    poles : tuple or None
        Closed-loop poles ``(x, y, z, yaw)``; ``None`` uses the defaults.
    params : QpsParams or None
        Vehicle model; ``None`` uses the quadcopter with its payload.
    settle : float
        Extra flight time after the last arrival, seconds.
    """

    def __init__(self, epsilon=0.65, delta=0.35, s_max=400.0, resolution=1.0, weight=1.1,
                 delta_t=0.05, dt_sim=1e-3, poles=None, params=None, settle=2.0):
        self.epsilon = epsilon
        self.delta = delta
        self.s_max = s_max
        self.resolution = resolution
        self.weight = weight
        self.delta_t = delta_t
        self.dt_sim = dt_sim
        self.poles = poles
        self.params = params
        self.settle = settle

    def _config(self, start=(0.0, 0.0, 0.0), goal=(0.0, 0.0, 0.0)) -> MissionConfig:
        safety = SafetyParams(self.epsilon, self.delta, self.s_max)
        return MissionConfig(
            start=tuple(float(v) for v in start),
            goal=tuple(float(v) for v in goal),
            safety=safety,
            planner=PlannerConfig(delta=self.resolution, weight=self.weight),
            temporal=TemporalConfig(delta_t=self.delta_t, dt_sim=self.dt_sim, safety=safety),
            params=self.params if self.params is not None else QpsParams.from_bodies(),
            poles=self.poles if self.poles is not None else DEFAULT_POLES,
            settle=self.settle,
        )

    def fit(self, X, y=None):
        """Expand ``X`` (an ElevationMap) and discretize it for searching."""
        terrain = check_elevation_map(X)
        config = self._config()
        self.maps_ = prepare_maps(terrain, config.safety)
        self.expanded_map_ = self.maps_.expanded
        self.clearance_map_ = self.maps_.clearance
        self.discrete_map_ = discretize(self.expanded_map_, self.resolution)
        return self

    def plan(self, start, goal) -> np.ndarray:
        """Waypoints from ``start`` to ``goal`` as an ``(n, 3)`` array."""
        return self._plan(start, goal)[1].points.copy()

    def _plan(self, start, goal):
        check_is_fitted(self, "maps_")
        config = self._config(check_point(start, "start"), check_point(goal, "goal"))
        validate_endpoints(config, self.maps_)
        route = plan_route(config.start, config.goal, self.expanded_map_, config.planner,
                           dmap=self.discrete_map_)
        wp = attach_endpoints(route.waypoints, config.start, config.goal, self.expanded_map_,
                              self.resolution)
        return config, wp, route

    def predict(self, X):
        """Waypoint arrays, one per row of start/goal pairs."""
        return [self.plan(row[:3], row[3:]) for row in check_pairs(X)]

    def schedule(self, start, goal) -> TimedTrajectory:
        """Waypoints with minimum full-stop arrival times."""
        config, wp, _ = self._plan(start, goal)
        return schedule(wp, config)

    def simulate(self, start, goal) -> MissionResult:
        """Plan, time and fly one mission on the fitted map."""
        config, wp, route = self._plan(start, goal)
        traj = schedule(wp, config)
        return MissionResult(self.maps_, route, traj, fly(traj, config, self.maps_))

    def score(self, X, y=None):
        """Fraction of the given missions flown with every safety flag set."""
        pairs = check_pairs(X)
        return float(np.mean([self.simulate(r[:3], r[3:]).trace.ok for r in pairs]))
