"""Temporal planning: full-stop time parameterization of a waypoint path and
per-segment minimum-time search by bisection."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .dynamics import hover_state
from .errors import DomainError, NoFeasibleTimeError
from .route import WaypointPath
from .simulation import RunResult, TrackingContext, track
from .terrain import SafetyParams

log = logging.getLogger(__name__)

MAX_DOUBLINGS = 30


def sigma3_eval(t: float):
    """Degree-7 smooth step and its first three derivatives.

    ``s(t) = 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7`` rises from 0 to 1 on [0, 1]
    with zero first, second and third derivatives at both ends.
    """
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"t = {t} outside [0, 1]")
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    value = t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    d1 = 140.0 * t3 * (1.0 - t) ** 3
    d2 = t2 * (420.0 + t * (-1680.0 + t * (2100.0 - 840.0 * t)))
    d3 = t * (840.0 + t * (-5040.0 + t * (8400.0 - 4200.0 * t)))
    return value, d1, d2, d3


class TimedTrajectory(NamedTuple):
    waypoints: WaypointPath
    times: tuple

    @property
    def duration(self) -> float:
        return self.times[-1]


def _segment_state(p0, p1, T, tau):
    s, d1, d2, d3 = sigma3_eval(tau)
    step = p1 - p0
    return p0 + s * step, (d1 / T) * step, (d2 / T ** 2) * step, (d3 / T ** 3) * step


def eval_trajectory(traj: TimedTrajectory, t: float):
    """Desired position, velocity, acceleration and jerk at time ``t``.

    Raises:
        DomainError: if ``t`` lies outside ``[t_1, t_N]``.
    """
    times = traj.times
    if not (times[0] <= t <= times[-1]):
        raise DomainError(f"t = {t} outside mission window [{times[0]}, {times[-1]}]")
    pts = traj.waypoints.points
    if len(times) == 1:
        z = np.zeros(3)
        return pts[0].copy(), z, z.copy(), z.copy()
    n = int(np.searchsorted(times, t, side="right")) - 1
    n = min(max(n, 0), len(times) - 2)
    T = times[n + 1] - times[n]
    tau = min(1.0, max(0.0, (t - times[n]) / T))
    return _segment_state(pts[n], pts[n + 1], T, tau)


def desired_flat(traj: TimedTrajectory, t: float) -> np.ndarray:
    """Desired flat state; holds the final waypoint after ``t_N``."""
    t = min(t, traj.times[-1])
    p, v, a, j = eval_trajectory(traj, t)
    return np.concatenate([p, v, a, j, [0.0, 0.0]])


@dataclass(frozen=True)
class TemporalConfig:
    """Settings for the per-segment time search.

    Attributes:
        delta_t: relative bracket width at which bisection stops.
        initial_guess: first duration tried, seconds. ``None`` uses
            ``guess_scale * L**(1/4)`` for a segment of length ``L`` metres;
            the peak snap of the smooth step, and with it the tracking lag,
            scales as ``L / T**4``. Failing runs stop at the first violation,
            so guessing low is cheap and guessing high is not.
        dt_sim: integration step of the feasibility simulation, seconds.
        chained: search each segment from the state the previous segment
            actually ended in, with durations rounded up to whole steps, so
            the flown mission replays exactly the runs that passed. When
            false every segment starts from exact hover and the searches
            are independent.
    """

    delta_t: float = 0.05
    initial_guess: Optional[float] = None
    dt_sim: float = 1e-3
    safety: SafetyParams = field(default_factory=SafetyParams)
    guess_scale: float = 1.0
    chained: bool = True

    def __post_init__(self):
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be positive, got {self.delta_t}")
        if self.initial_guess is not None and not self.initial_guess > 0:
            raise DomainError(f"initial_guess must be positive, got {self.initial_guess}")
        if not self.dt_sim > 0:
            raise DomainError(f"dt_sim must be positive, got {self.dt_sim}")


def segment_reference(step, T: float) -> Callable:
    """Flat reference for one full-stop segment from the origin to ``step``
    over ``[0, T]``; it holds ``step`` afterwards."""
    step = np.asarray(step, dtype=np.float64)
    origin = np.zeros(3)
    still = np.zeros(3)

    def reference(t):
        if t >= T:
            p, v, a, j = step, still, still, still
        else:
            p, v, a, j = _segment_state(origin, step, T, t / T)
        return np.concatenate([p, v, a, j, [0.0, 0.0]])

    return reference


def fly_segment(x0, p_a, p_b, T: float, ctx: TrackingContext, hold: float = 0.0,
                on_step=None, stop_on_violation: bool = True) -> RunResult:
    """Closed-loop run along one segment from state ``x0``, followed by
    ``hold`` seconds at ``p_b``.

    The run is carried out in coordinates relative to ``p_a``: the state
    passed to ``on_step`` and the returned final state are relative too.
    """
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    p_a = np.asarray(p_a, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    x[0:3] -= p_a
    step = np.asarray(p_b, dtype=np.float64) - p_a
    return track(x, segment_reference(step, T), T + hold, ctx, on_step=on_step,
                 stop_on_violation=stop_on_violation)


def segment_test(p_a, p_b, T: float, ctx: TrackingContext) -> bool:
    """Fly one full-stop segment in closed loop and report whether the rotor
    and tracking bounds held at every step.

    The run starts from exact hover at ``p_a``. It is carried out in
    coordinates relative to ``p_a``, so equal displacements give identical
    answers wherever they occur.
    """
    return fly_segment(hover_state(ctx.params, p_a), p_a, p_b, T, ctx).ok


def whole_steps(T: float, dt: float) -> float:
    """``T`` rounded up to a whole number of integration steps."""
    return math.ceil(T / dt - 1e-9) * dt


def bisect_time(test: Callable[[float], bool], initial_guess: float, delta_t: float,
                max_doublings: int = MAX_DOUBLINGS) -> float:
    """Smallest duration found valid by doubling then bisection.

    The guess is doubled until ``test`` passes (the last failing guess is
    kept as the lower end), then the bracket is halved until
    ``(t_max - t_min) / t_mid <= delta_t``. Returns ``t_max``, which has
    always passed. When every midpoint passes the lower end stays at zero
    and the ratio never shrinks, so the search also stops once ``t_max``
    falls below ``initial_guess / 2**max_doublings``.

    Raises:
        NoFeasibleTimeError: if no guess up to ``initial_guess *
            2**max_doublings`` passes.
    """
    if not initial_guess > 0:
        raise DomainError(f"initial_guess must be positive, got {initial_guess}")
    if not delta_t > 0:
        raise DomainError(f"delta_t must be positive, got {delta_t}")
    t_min = 0.0
    t_max = float(initial_guess)
    doublings = 0
    while not test(t_max):
        if doublings >= max_doublings:
            raise NoFeasibleTimeError(
                f"no valid duration up to {t_max:.6g} s ({max_doublings} doublings)"
            )
        t_min = t_max
        t_max = 2.0 * t_max
        doublings += 1

    floor = initial_guess / 2.0 ** max_doublings
    t_mid = 0.5 * (t_max + t_min)
    while (t_max - t_min) / t_mid > delta_t and t_max > floor:
        t_mid = 0.5 * (t_max + t_min)
        if test(t_mid):
            t_max = t_mid
        else:
            t_min = t_mid
    return t_max


def plan_times(wp: WaypointPath, config: TemporalConfig, ctx: TrackingContext,
               executor=None) -> TimedTrajectory:
    """Arrival times at every waypoint, each segment minimised on its own.

    Segments with the same displacement share one search. ``executor`` may
    be a ``concurrent.futures`` executor to run distinct searches in
    parallel; results do not depend on it.
    """
    pts = wp.points
    displacements = [tuple((b - a).tolist()) for a, b in zip(pts[:-1], pts[1:])]
    for n, d in enumerate(displacements):
        if not any(d):
            raise DomainError(f"segment {n + 1} has zero length")

    unique = list(dict.fromkeys(displacements))
    jobs = [(d, config, ctx) for d in unique]
    if executor is None:
        found = [_search_segment(job) for job in jobs]
    else:
        found = list(executor.map(_search_segment, jobs))
    duration = dict(zip(unique, found))

    times = [0.0]
    for d in displacements:
        times.append(times[-1] + duration[d])
    return TimedTrajectory(wp, tuple(times))


def _search_segment(job):
    d, config, ctx = job
    step = np.array(d)
    length = float(np.linalg.norm(step))
    guess = config.initial_guess or config.guess_scale * length ** 0.25
    T = bisect_time(lambda T: segment_test(np.zeros(3), step, T, ctx), guess, config.delta_t)
    log.debug("segment %s: %.3f m in %.3f s", d, length, T)
    return T


def plan_times_chained(wp: WaypointPath, config: TemporalConfig, ctx: TrackingContext,
                       hold: float = 0.0) -> TimedTrajectory:
    """Arrival times found one segment after another along the flight.

    Each search starts from the state the closed loop reached at the end of
    the previous segment, and the last one also covers ``hold`` seconds of
    hovering at the goal. Durations are whole multiples of ``ctx.dt``, so
    flying the result segment by segment repeats the accepted runs step for
    step.
    """
    pts = wp.points
    for n, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        if np.array_equal(a, b):
            raise DomainError(f"segment {n + 1} has zero length")
    dt = ctx.dt
    x = hover_state(ctx.params, pts[0])
    times = [0.0]
    last = len(pts) - 2
    for n, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        extra = hold if n == last else 0.0
        length = float(np.linalg.norm(b - a))
        guess = config.initial_guess or config.guess_scale * length ** 0.25

        def test(T, x=x, a=a, b=b, extra=extra):
            return fly_segment(x, a, b, whole_steps(T, dt), ctx, hold=extra).ok

        T = whole_steps(bisect_time(test, guess, config.delta_t), dt)
        log.debug("segment %d: %.3f m in %.3f s", n + 1, length, T)
        times.append(times[-1] + T)
        if n < last:
            x = fly_segment(x, a, b, T, ctx).final_state
            x[0:3] += a
    return TimedTrajectory(wp, tuple(times))
