"""End-to-end mission: terrain, expansion, route, timing and the monitored
closed-loop flight.

A mission config is a UTF-8 text document of ``key = value`` lines with flat
dotted keys; ``#`` starts a comment. Vectors are comma- or space-separated
numbers. See the README for the full key list.
"""

import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np

from .control import DEFAULT_POLES
from .dynamics import (
    ARM_LENGTH,
    DRAG_COEFF,
    GRAVITY,
    PAYLOAD,
    QUADCOPTER,
    QpsParams,
    RigidBody,
    THRUST_COEFF,
    hover_state,
    signed_speeds,
)
from .errors import ConfigError, NoPathError, SingularityError, TransportError
from .route import PlannerConfig, RoutePlan, WaypointPath, plan_route
from .simulation import StepRecord, TrackingContext
from .synthetic import SynthParams, synth_terrain
from .tempo import (
    TemporalConfig,
    TimedTrajectory,
    fly_segment,
    plan_times,
    plan_times_chained,
    whole_steps,
)
from .terrain import ElevationMap, SafetyParams, expand, read_map, sample

log = logging.getLogger(__name__)

TRACE_VERSION = 1
TRACE_COLUMNS = (
    "t,x,y,z,phi,theta,psi,p,s1,s2,s3,s4,err,flag_rotor,flag_track,flag_clear"
)


@dataclass(frozen=True)
class MissionConfig:
    start: tuple
    goal: tuple
    terrain_file: Optional[str] = None
    terrain: SynthParams = field(default_factory=SynthParams)
    safety: SafetyParams = field(default_factory=SafetyParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    params: QpsParams = field(default_factory=QpsParams.from_bodies)
    poles: tuple = DEFAULT_POLES
    settle: float = 2.0
    workers: int = 1

    def tracking_context(self) -> TrackingContext:
        return TrackingContext(self.params, self.safety, self.poles, self.temporal.dt_sim)

    def load_terrain(self) -> ElevationMap:
        if self.terrain_file is not None:
            return read_map(self.terrain_file)
        return synth_terrain(self.terrain)


# -- config document ---------------------------------------------------------

_SCALAR = {
    "terrain.seed": int, "terrain.width": float, "terrain.length": float,
    "terrain.cell": float, "terrain.density": float, "terrain.height_min": float,
    "terrain.height_max": float, "terrain.size_min": float, "terrain.size_max": float,
    "terrain.base": float, "terrain.relief": float,
    "safety.epsilon": float, "safety.delta": float, "safety.s_max": float,
    "planner.delta": float, "planner.weight": float, "planner.max_expansions": int,
    "planner.ceiling": int,
    "temporal.delta_t": float, "temporal.initial_guess": float, "temporal.dt_sim": float,
    "temporal.guess_scale": float, "temporal.settle": float,
    "vehicle.mass": float, "vehicle.Jx": float, "vehicle.Jy": float, "vehicle.Jz": float,
    "vehicle.quad_mass": float, "vehicle.payload_mass": float,
    "vehicle.payload_offset": float,
    "vehicle.b": float, "vehicle.k": float, "vehicle.l": float, "vehicle.g": float,
    "run.workers": int,
}
_VECTOR = {
    "mission.start": 3, "mission.goal": 3, "terrain.origin": 2,
    "vehicle.quad_J": 3, "vehicle.payload_J": 3,
    "control.poles_x": 4, "control.poles_y": 4, "control.poles_z": 4, "control.poles_yaw": 2,
}
_OTHER = {"terrain.file": str, "planner.literal_weight": "bool", "temporal.chained": "bool"}


def parse_config_text(text: str) -> dict:
    """Parse a config document into a flat ``{key: value}`` dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        try:
            out[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return out


def _convert(key, value):
    if key in _SCALAR:
        return _SCALAR[key](value)
    if key in _VECTOR:
        parts = value.replace(",", " ").split()
        if len(parts) != _VECTOR[key]:
            raise ValueError(f"expected {_VECTOR[key]} numbers, got {len(parts)}")
        return tuple(float(p) for p in parts)
    if key in _OTHER:
        if _OTHER[key] == "bool":
            if value.lower() not in ("true", "false"):
                raise ValueError(f"expected true or false, got {value!r}")
            return value.lower() == "true"
        return value
    raise ValueError("unknown key")


def config_from_dict(values: dict, base_dir=None) -> MissionConfig:
    """Build a :class:`MissionConfig` from parsed key/values."""
    v = dict(values)
    for required in ("mission.start", "mission.goal"):
        if required not in v:
            raise ConfigError(f"missing required key '{required}'")

    def take(prefix):
        return {k[len(prefix):]: v.pop(k) for k in list(v) if k.startswith(prefix)}

    try:
        start = v.pop("mission.start")
        goal = v.pop("mission.goal")
        terrain_file = v.pop("terrain.file", None)
        if terrain_file is not None and base_dir is not None:
            terrain_file = os.path.join(base_dir, terrain_file)
        terrain = SynthParams(**take("terrain."))
        safety = SafetyParams(**take("safety."))
        planner = PlannerConfig(**take("planner."))
        temporal_kw = take("temporal.")
        settle = temporal_kw.pop("settle", 2.0)
        temporal = TemporalConfig(safety=safety, **temporal_kw)
        params = _vehicle(take("vehicle."))
        poles_kw = take("control.")
        poles = tuple(
            poles_kw.get(f"poles_{axis}", default)
            for axis, default in zip(("x", "y", "z", "yaw"), DEFAULT_POLES)
        )
        workers = v.pop("run.workers", 1)
        if v:
            raise ConfigError(f"unknown keys: {sorted(v)}")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return MissionConfig(
        start=start, goal=goal, terrain_file=terrain_file, terrain=terrain, safety=safety,
        planner=planner, temporal=temporal, params=params, poles=poles, settle=settle,
        workers=workers,
    )


def _vehicle(kw):
    physics = {"b": THRUST_COEFF, "k": DRAG_COEFF, "l": ARM_LENGTH, "g": GRAVITY}
    physics.update({name: kw.pop(name) for name in ("b", "k", "l", "g") if name in kw})
    if "mass" in kw:
        try:
            params = QpsParams(kw.pop("mass"), kw.pop("Jx"), kw.pop("Jy"), kw.pop("Jz"), **physics)
        except KeyError as exc:
            raise ConfigError(f"vehicle.mass needs vehicle.{exc.args[0]} as well") from None
        if kw:
            raise ConfigError(f"vehicle.mass cannot be combined with {sorted(kw)}")
        return params
    quad = RigidBody(kw.pop("quad_mass", QUADCOPTER.m), kw.pop("quad_J", QUADCOPTER.J))
    payload = RigidBody(kw.pop("payload_mass", PAYLOAD.m), kw.pop("payload_J", PAYLOAD.J))
    d = kw.pop("payload_offset", 0.2)
    if kw:
        raise ConfigError(f"unexpected vehicle keys: {sorted(kw)}")
    return QpsParams.from_bodies(quad, payload, d, **physics)


def load_config(path) -> MissionConfig:
    with open(path, encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    return config_from_dict(values, base_dir=os.path.dirname(os.path.abspath(path)))


# -- pipeline ----------------------------------------------------------------


class Maps(NamedTuple):
    terrain: ElevationMap
    expanded: ElevationMap  # by epsilon + delta, for planning
    clearance: ElevationMap  # by epsilon, for monitoring


def prepare_maps(terrain: ElevationMap, safety: SafetyParams) -> Maps:
    return Maps(terrain, expand(terrain, safety.clearance), expand(terrain, safety.epsilon))


def _in_free_space(point, emap):
    x, y, z = point
    return emap.contains(x, y) and z > sample(emap, x, y)


def _segment_clear(a, b, emap, spacing):
    n = max(1, int(math.ceil(math.dist(a, b) / spacing)))
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    pts = np.asarray(a) + s * (np.asarray(b) - np.asarray(a))
    inside = all(emap.contains(x, y) for x, y in pts[:, :2])
    return inside and bool(np.all(pts[:, 2] > sample(emap, pts[:, 0], pts[:, 1])))


def _elbow(a, b):
    """Corner of the vertical-then-horizontal hop between two points: at the
    higher altitude, above the lower point."""
    if a[2] >= b[2]:
        return (b[0], b[1], a[2])
    return (a[0], a[1], b[2])


def _hop(a, b, expanded, delta):
    """Points strictly between ``a`` and ``b`` needed for a clear hop.

    The lattice point next to a free endpoint sits above the endpoint's own
    lattice column, and nothing above a free point is obstacle, so the
    elbow route always clears; the direct hop is used when it is checked
    clear every ``delta / 10``.
    """
    if _segment_clear(a, b, expanded, delta / 10):
        return []
    return [_elbow(a, b)]


def attach_endpoints(wp: WaypointPath, start, goal, expanded: ElevationMap, delta: float) -> WaypointPath:
    """Extend the lattice path to the exact start and goal points."""
    pts = [tuple(float(v) for v in p) for p in wp.points]
    start, goal = tuple(map(float, start)), tuple(map(float, goal))
    if start == goal:
        return WaypointPath([start])
    if start != pts[0]:
        pts[:0] = [start] + _hop(start, pts[0], expanded, delta)
    if goal != pts[-1]:
        pts.extend(_hop(pts[-1], goal, expanded, delta) + [goal])
    return WaypointPath(pts)


def validate_endpoints(config: MissionConfig, maps: Maps):
    if not _in_free_space(config.start, maps.expanded):
        raise ConfigError(f"start {config.start} is not in restricted free space")
    if not _in_free_space(config.goal, maps.expanded):
        raise NoPathError(f"goal {config.goal} is not in restricted free space")


def _phase(name):
    """Tag TransportErrors escaping a pipeline stage with that stage."""

    class _Tag:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, TransportError) and not hasattr(exc, "phase"):
                exc.phase = name
            return False

    return _Tag()


def plan(config: MissionConfig, maps: Optional[Maps] = None):
    """Route and waypoints for a mission; returns ``(maps, route, waypoints)``."""
    with _phase("terrain"):
        if maps is None:
            maps = prepare_maps(config.load_terrain(), config.safety)
        validate_endpoints(config, maps)
    with _phase("plan"):
        route = plan_route(config.start, config.goal, maps.expanded, config.planner)
        wp = attach_endpoints(route.waypoints, config.start, config.goal, maps.expanded,
                              config.planner.delta)
    return maps, route, wp


def schedule(wp: WaypointPath, config: MissionConfig) -> TimedTrajectory:
    with _phase("time"):
        if len(wp) == 1:
            return TimedTrajectory(wp, (0.0,))
        ctx = config.tracking_context()
        if config.temporal.chained:
            return plan_times_chained(wp, config.temporal, ctx, hold=config.settle)
        if config.workers > 1:
            with ProcessPoolExecutor(config.workers) as pool:
                return plan_times(wp, config.temporal, ctx, executor=pool)
        return plan_times(wp, config.temporal, ctx)


class TraceRow(NamedTuple):
    t: float
    state: tuple
    speeds: tuple
    desired: tuple
    error: float
    clearance: float
    flag_rotor: bool
    flag_track: bool
    flag_clear: bool


class MissionTrace:
    """Per-step record of a monitored flight plus its summary."""

    def __init__(self, rows: List[TraceRow], t_final: float, goal):
        self.rows = rows
        self.t_final = t_final
        self.goal = tuple(goal)

    def __len__(self):
        return len(self.rows)

    @property
    def ok(self) -> bool:
        return all(r.flag_rotor and r.flag_track and r.flag_clear for r in self.rows)

    def summary(self) -> dict:
        rows = self.rows
        last = rows[-1].state
        return {
            "t_N": self.t_final,
            "steps": len(rows),
            "max_tracking_error": max(r.error for r in rows),
            "max_rotor_speed": max(max(r.speeds) for r in rows),
            "min_rotor_speed": min(min(r.speeds) for r in rows),
            "min_clearance_margin": min(r.clearance for r in rows),
            "final_position": list(last[0:3]),
            "final_goal_distance": math.dist(last[0:3], self.goal),
            "rotor_ok": all(r.flag_rotor for r in rows),
            "tracking_ok": all(r.flag_track for r in rows),
            "clearance_ok": all(r.flag_clear for r in rows),
            "category": "ok" if self.ok else "safety-violation",
        }

    def write_csv(self, fh):
        fh.write(f"# payload-transport trace v{TRACE_VERSION}\n")
        fh.write(TRACE_COLUMNS + "\n")
        for r in self.rows:
            s = r.state
            vals = (r.t, s[0], s[1], s[2], s[6], s[7], s[8], s[12], *r.speeds, r.error)
            fh.write(",".join(repr(float(v)) for v in vals))
            fh.write(",%d,%d,%d\n" % (r.flag_rotor, r.flag_track, r.flag_clear))

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def fly(traj: TimedTrajectory, config: MissionConfig, maps: Maps) -> MissionTrace:
    """Monitored closed-loop flight from hover at the first waypoint, then
    ``settle`` seconds of hovering at the last. Every step is recorded;
    violations do not stop it.

    Segments are flown one after another for a whole number of steps each,
    every one in coordinates relative to its first waypoint, which is how
    the time search ran them.
    """
    ctx = config.tracking_context()
    dt = ctx.dt
    pts = traj.waypoints.points
    rows = []
    clear_map = maps.clearance

    def recorder(first_step, shift, skip_first):
        def record(step: StepRecord):
            if skip_first and step.t == 0.0:
                return
            x = step.x.copy()
            x[0:3] += shift
            desired = step.desired[0:3] + shift
            ground = sample(clear_map, x[0], x[1], clamp=True)
            margin = float(x[2] - ground)
            inside = clear_map.contains(x[0], x[1])
            k = first_step + int(round(step.t / dt))
            rows.append(TraceRow(
                k * dt, tuple(x.tolist()), signed_speeds(step.squared), tuple(desired.tolist()),
                step.error, margin, step.rotor_ok, step.track_ok, bool(inside and margin > 0),
            ))
        return record

    with _phase("simulate"):
        x = hover_state(config.params, pts[0])
        if len(pts) == 1:
            results = [fly_segment(x, pts[0], pts[0], config.settle or dt, ctx,
                                   on_step=recorder(0, pts[0], False),
                                   stop_on_violation=False)]
        else:
            results = []
            first = 0
            last = len(pts) - 2
            for n, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
                T = whole_steps(traj.times[n + 1] - traj.times[n], dt)
                res = fly_segment(x, a, b, T, ctx, hold=config.settle if n == last else 0.0,
                                  on_step=recorder(first, a, n > 0), stop_on_violation=False)
                results.append(res)
                if res.reason and res.reason.startswith("singularity"):
                    break
                first += res.steps
                x = res.final_state.copy()
                x[0:3] += a
        for res in results:
            if res.reason and res.reason.startswith("singularity"):
                raise SingularityError(res.reason)
    return MissionTrace(rows, traj.duration, pts[-1])


class MissionResult(NamedTuple):
    maps: Maps
    route: RoutePlan
    trajectory: TimedTrajectory
    trace: MissionTrace

    @property
    def summary(self):
        out = self.trace.summary()
        out["waypoints"] = len(self.trajectory.waypoints)
        return out


def run_mission(config: MissionConfig, maps: Optional[Maps] = None) -> MissionResult:
    """Plan, time and fly a mission.

    Raises:
        ConfigError: start outside restricted free space.
        NoPathError, NoFeasibleTimeError, SingularityError,
        NumericalBlowupError: infeasible mission; ``exc.phase`` names the
            stage that failed.
    """
    maps, route, wp = plan(config, maps)
    traj = schedule(wp, config)
    trace = fly(traj, config, maps)
    return MissionResult(maps, route, traj, trace)


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)
