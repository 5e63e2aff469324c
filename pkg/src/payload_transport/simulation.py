"""Fixed-step RK4 integration and the closed-loop tracking simulation shared
by time planning and mission execution."""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .control import ControlLaw, design_gains, DEFAULT_POLES
from .dynamics import QpsParams, _body_torque, rotor_speeds_squared, state_derivative
from .errors import DomainError, NumericalBlowupError, SingularityError
from .terrain import SafetyParams


def rk4_step(x, u, dt: float, params: QpsParams) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step with ``u`` held constant.

    Raises:
        NumericalBlowupError: if the new state is not finite.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = state_derivative(x, u, params)
        k2 = state_derivative(x + 0.5 * dt * k1, u, params)
        k3 = state_derivative(x + 0.5 * dt * k2, u, params)
        k4 = state_derivative(x + dt * k3, u, params)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError("state became non-finite")
    return out


@dataclass(frozen=True)
class TrackingContext:
    """Everything a closed-loop run needs besides the reference."""

    params: QpsParams
    safety: SafetyParams = SafetyParams()
    poles: tuple = DEFAULT_POLES
    dt: float = 1e-3

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")

    def control_law(self) -> ControlLaw:
        return ControlLaw(design_gains(self.poles), self.params)


class StepRecord(NamedTuple):
    t: float
    x: np.ndarray
    squared: tuple
    desired: np.ndarray
    error: float
    rotor_ok: bool
    track_ok: bool


class RunResult(NamedTuple):
    ok: bool
    steps: int
    final_state: np.ndarray
    max_error: float
    max_speed: float
    reason: Optional[str] = None


def rotor_check(squared, s_max):
    """True iff every rotor speed exists and lies in [0, s_max]."""
    limit = s_max * s_max
    return all(0.0 <= s2 <= limit for s2 in squared)


def track(x0, reference: Callable, t_end: float, ctx: TrackingContext,
          on_step: Optional[Callable] = None, stop_on_violation: bool = True) -> RunResult:
    """Simulate the closed loop over ``[0, t_end]``.

    ``reference(t)`` returns the 14-component desired flat state. At every
    step ``t_k = k * dt`` the control is computed and held for the step; the
    rotor bound and the tracking bound are evaluated at ``t_k``. The final
    step lands on or just past ``t_end``.

    A controller singularity ends the run as a violation. Numerical blowup
    propagates. Without ``stop_on_violation`` the run goes to the end and
    ``reason`` names the first violation.
    """
    law = ctx.control_law()
    params, dt = ctx.params, ctx.dt
    s_max, bound = ctx.safety.s_max, ctx.safety.delta
    n_steps = max(0, int(math.ceil(t_end / dt - 1e-9)))
    x = np.array(x0, dtype=np.float64)
    max_err = 0.0
    max_speed = 0.0
    first_violation = None
    for k in range(n_steps + 1):
        t = k * dt
        zd = reference(t)
        try:
            u = law(x, zd)
        except SingularityError as exc:
            return RunResult(False, k, x, max_err, max_speed, f"singularity: {exc}")
        sq = rotor_speeds_squared(x[12], _body_torque(x, u, params), params)
        err = math.dist(x[0:3], zd[0:3])
        rotor_ok = rotor_check(sq, s_max)
        track_ok = err <= bound
        max_err = max(max_err, err)
        max_speed = max(max_speed, max(math.sqrt(abs(s2)) for s2 in sq))
        if on_step is not None:
            on_step(StepRecord(t, x, sq, zd, err, rotor_ok, track_ok))
        if not (rotor_ok and track_ok) and first_violation is None:
            first_violation = "rotor speed bound" if not rotor_ok else "tracking bound"
            if stop_on_violation:
                return RunResult(False, k, x, max_err, max_speed, first_violation)
        if k < n_steps:
            x = rk4_step(x, u, dt, params)
    return RunResult(first_violation is None, n_steps, x, max_err, max_speed, first_violation)
