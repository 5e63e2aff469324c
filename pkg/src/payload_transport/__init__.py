"""Quadcopter payload transport over elevation maps: terrain handling, route
search, minimum-time scheduling and flatness-based tracking control."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    GridParseError,
    InfeasibleThrustError,
    NoFeasibleTimeError,
    NoPathError,
    NumericalBlowupError,
    SingularityError,
    TransportError,
)
from .terrain import (
    DiscreteElevationMap,
    ElevationMap,
    SafetyParams,
    Space,
    classify,
    discretize,
    expand,
    load_map,
    read_map,
    sample,
    write_map,
)
from .dynamics import QpsParams, combine_inertia, hover_state, rotor_speeds, state_derivative
from .control import ControlLaw, decoupling, design_gains, flat_to_state, state_to_flat
from .route import PlannerConfig, WaypointPath, astar, plan_route, simplify
from .simulation import TrackingContext, rk4_step, track
from .tempo import TemporalConfig, TimedTrajectory, bisect_time, plan_times, sigma3_eval
from .synthetic import SynthParams, synth_terrain
from .mission import MissionConfig, load_config, run_mission
from .estimator import TransportPlanner

__all__ = [name for name in dir() if not name.startswith("_")]
