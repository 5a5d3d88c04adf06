"""Limit cycles of the reduced system through the return map on ``xi = lambda``.

Fixed points of the return map ``P`` on the ray ``0 < eta <= F(lambda)`` are
located by secant steps on ``g(eta) = P(eta) - eta`` with a bisection
fallback once a sign change is bracketed.  Starting points above
``F(lambda)`` are first mapped onto the ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..integrator import VERIFY_CONFIG, Event, IntegratorConfig, NoReturnError, poincare_return, solve
from ..model import ReducedParams, reduced_field, structural_functions, xi_plus

MERGE_TOL = 1e-6


class CycleNotFoundError(RuntimeError):
    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = list(history)


class MultiplicityAlarm(RuntimeError):
    """Distinct starts converged to distinct fixed points of the return map."""

    def __init__(self, fixed_points):
        super().__init__(f"return map has several fixed points: {list(fixed_points)}")
        self.fixed_points = list(fixed_points)


@dataclass(frozen=True)
class CycleReport:
    params: ReducedParams
    exists: bool
    eta_star: float = math.nan
    period: float = math.nan
    xi_min: float = math.nan
    xi_max: float = math.nan
    eta_min: float = math.nan
    eta_max: float = math.nan
    slope: float = math.nan
    start_fixed_points: tuple[float, ...] = ()
    history: tuple[tuple[float, float], ...] = field(default=(), repr=False)
    note: str = ""

    @property
    def amplitude(self) -> float:
        return 0.5 * (self.xi_max - self.xi_min)

    @property
    def spread(self) -> float:
        if not self.start_fixed_points:
            return math.nan
        return max(self.start_fixed_points) - min(self.start_fixed_points)

    @property
    def stable(self) -> bool:
        return self.exists and abs(self.slope) < 1

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "exists": self.exists,
            "eta_star": self.eta_star,
            "period": self.period,
            "xi_min": self.xi_min,
            "xi_max": self.xi_max,
            "eta_min": self.eta_min,
            "eta_max": self.eta_max,
            "amplitude": self.amplitude,
            "slope": self.slope,
            "start_fixed_points": list(self.start_fixed_points),
            "iterations": len(self.history),
            "note": self.note,
        }


def return_fixed_point(params: ReducedParams, eta0: float, config: IntegratorConfig = VERIFY_CONFIG,
                       tol: float = 1e-13, max_expand: int = 200, history: list | None = None,
                       noise: float = 0.0) -> float:
    """Fixed point of the return map reached from ``eta0``.

    Steps from ``eta0`` in the direction the map moves, doubling the step,
    until ``g = P - id`` changes sign; the bracket is then solved with
    Brent's method.  ``g`` also vanishes at ``F(lambda)`` (the equilibrium);
    the search never crosses it, and returns ``F(lambda)`` when it runs into
    it without finding a sign change.  A sign change within 1% of
    ``F(lambda)`` where both values of ``g`` are within ``noise`` of zero is
    treated as integration noise around that trivial root.
    """
    _, F, _ = structural_functions(params)
    F_lam = float(F(params.lam))
    hist = history if history is not None else []

    def P(eta):
        out = poincare_return(params, eta, config)[0]
        hist.append((float(eta), float(out)))
        return out

    x = float(eta0)
    if x >= F_lam:
        x = P(x)
    gx = P(x) - x
    if gx == 0:
        return x
    step = gx
    for _ in range(max_expand):
        y = x + step
        if y >= F_lam:
            y = 0.5 * (x + F_lam)
            if F_lam - y <= 1e-10 * F_lam:
                return F_lam
        elif y <= 0:
            y = 0.5 * x
            if y <= 1e-300:
                break
        gy = P(y) - y
        if gy == 0:
            return y
        if (gy > 0) != (gx > 0):
            if max(abs(gx), abs(gy)) <= noise and F_lam - max(x, y) <= 1e-2 * F_lam:
                return F_lam
            lo, hi = (x, y) if x < y else (y, x)
            return brentq(lambda e: P(e) - e, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
        x, gx = y, gy
        step *= 2.0
    raise CycleNotFoundError(f"no sign change of the return map from eta0={eta0!r}", hist)


def cycle_geometry(params: ReducedParams, eta_star: float, config: IntegratorConfig = VERIFY_CONFIG):
    """Period and extents of the orbit through ``(lambda, eta_star)``."""
    lam = params.lam
    _, F, _ = structural_functions(params)
    events = [
        Event(lambda t, y: y[0] - lam, direction=1, terminal=True, id="section"),
        Event(lambda t, y: y[0] - lam, direction=-1, id="upper"),
        Event(lambda t, y: F(y[0]) - y[1], direction=0, id="xi-extremum"),
    ]
    traj = solve(lambda t, y: reduced_field(params, y), (0.0, 1e7), [lam, eta_star], config, events)
    if not traj.events or traj.events[-1].event_id != "section":
        raise NoReturnError("orbit did not close")
    xi_vals = [r.state[0] for r in traj.events if r.event_id == "xi-extremum"]
    upper = [r.state[1] for r in traj.events if r.event_id == "upper"]
    xs, es = traj.states[:, 0], traj.states[:, 1]
    xi_min = min([xs.min(), *xi_vals])
    xi_max = max([xs.max(), *xi_vals])
    eta_max = max([es.max(), *upper])
    eta_min = min(es.min(), eta_star)
    return traj.events[-1].time, xi_min, xi_max, eta_min, eta_max


def return_slope(params: ReducedParams, eta_star: float, config: IntegratorConfig = VERIFY_CONFIG,
                 rel_step: float = 1e-5) -> float:
    h = rel_step * eta_star
    up = poincare_return(params, eta_star + h, config)[0]
    down = poincare_return(params, eta_star - h, config)[0]
    return (up - down) / (2 * h)


def default_starts(params: ReducedParams) -> list[float]:
    _, F, _ = structural_functions(params)
    F_lam = float(F(params.lam))
    return [0.3 * F_lam, 3.0 * F_lam, F_lam * (1 - 1e-4)]


def find_limit_cycle(params: ReducedParams, config: IntegratorConfig = VERIFY_CONFIG,
                     starts=None, merge_tol: float = MERGE_TOL, gate: bool = True) -> CycleReport:
    """Locate the limit cycle through its return-map fixed point.

    With ``gate=True`` nothing is computed unless ``0 < lambda < xi_plus``.
    Each start is solved independently; fixed points further apart than
    ``merge_tol`` raise :class:`MultiplicityAlarm`.  A fixed point that
    collapses onto ``F(lambda)`` means no cycle.
    """
    lam = params.lam
    if lam >= 1:
        return CycleReport(params, False, note="no interior equilibrium")
    if gate and not lam < xi_plus(params):
        return CycleReport(params, False, note="lambda >= xi_plus: interior equilibrium attracts")
    _, F, _ = structural_functions(params)
    F_lam = float(F(lam))
    starts = default_starts(params) if starts is None else list(starts)

    history: list = []
    fixed = [return_fixed_point(params, s, config, history=history) for s in starts]
    if max(fixed) - min(fixed) > merge_tol:
        raise MultiplicityAlarm(fixed)
    eta_star = float(np.median(fixed))
    if abs(eta_star - F_lam) <= 1e-6 * F_lam:
        return CycleReport(params, False, eta_star=eta_star, start_fixed_points=tuple(fixed),
                           history=tuple(history), note="return map collapses onto the equilibrium")
    period, xi_min, xi_max, eta_min, eta_max = cycle_geometry(params, eta_star, config)
    slope = return_slope(params, eta_star, config)
    return CycleReport(params, True, eta_star, period, xi_min, xi_max, eta_min, eta_max, slope,
                       tuple(fixed), tuple(history))
