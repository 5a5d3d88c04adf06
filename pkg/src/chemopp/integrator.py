"""Adaptive Dormand-Prince 5(4) integration with dense output and events.

The stepper propagates the fifth-order solution (local extrapolation) and
uses the embedded fourth-order solution for error control.  The continuous
extension is the fourth-order interpolant of Hairer, Norsett and Wanner,
which costs no extra function evaluations.

States may be 1-D (one trajectory) or 2-D ``(dim, n)`` (a bundle of ``n``
trajectories sharing the step sequence, controlled by the worst member).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .model import ReducedParams, SystemKind, reduced_field, rhs_for, structural_functions

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order minus fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense output
_D = (
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


class IntegrationError(RuntimeError):
    """Non-finite derivative or step-size underflow."""

    def __init__(self, message: str, t: float, state):
        super().__init__(f"{message} at t={t!r}")
        self.t = t
        self.state = np.array(state, copy=True)


class NoReturnError(RuntimeError):
    """The orbit did not come back to the section within the step budget."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    # effectively pure relative control: orbits of the reduced system pass
    # within 1e-25 of the axes, far below any useful absolute floor
    abs_tol: float = 1e-100
    max_step: float = math.inf
    max_steps: int = 2_000_000
    event_tol: float = 1e-12

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def scaled(self, factor: float) -> "IntegratorConfig":
        """Same config with both tolerances multiplied by ``factor``."""
        return IntegratorConfig(self.rel_tol * factor, self.abs_tol * factor, self.max_step,
                                self.max_steps, self.event_tol)


VERIFY_CONFIG = IntegratorConfig()
SWEEP_CONFIG = IntegratorConfig(rel_tol=1e-6)


@dataclass(frozen=True)
class Event:
    """Scalar event ``fn(t, y)``; ``direction`` +1 for upward, -1 downward, 0 both."""

    fn: Callable[[float, np.ndarray], float]
    direction: int = 0
    terminal: bool = False
    id: str = ""


@dataclass(frozen=True)
class EventRecord:
    time: float
    state: np.ndarray
    event_id: str
    direction: int


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Integrated solution with its continuous extension.

    Segment ``i`` spans ``[seg_t0[i], seg_t0[i] + seg_h[i]]`` and covers
    ``times[i] .. times[i + 1]``; the last segment may be cut short by a
    terminal event.
    """

    times: np.ndarray
    states: np.ndarray
    seg_t0: np.ndarray
    seg_h: np.ndarray
    coeffs: np.ndarray  # (n_segments, 5, *state_shape)
    events: tuple[EventRecord, ...] = ()
    truncated: bool = False
    n_rejected: int = 0

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)

    def __call__(self, t):
        """Interpolated state(s) at ``t`` (scalar or 1-D array)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        forward = self.times[-1] >= self.times[0]
        lo, hi = (self.times[0], self.times[-1]) if forward else (self.times[-1], self.times[0])
        if np.any(ts < lo) or np.any(ts > hi):
            raise ValueError("interpolation outside the integrated interval")
        out = np.empty((len(ts),) + self.states.shape[1:])
        key = self.times if forward else -self.times
        query = ts if forward else -ts
        idx = np.searchsorted(key, query, side="right") - 1
        for j, (tq, i) in enumerate(zip(ts, idx)):
            if i < len(self.times) and self.times[i] == tq:
                out[j] = self.states[i]
                continue
            i = min(i, len(self.seg_h) - 1)
            out[j] = _dense_eval(self.coeffs[i], (tq - self.seg_t0[i]) / self.seg_h[i])
        return out[0] if scalar else out

    def to_csv(self, path, names: Sequence[str], extra: dict[str, Callable] | None = None,
               header: dict | None = None) -> None:
        """Write ``t`` and state columns; ``extra`` adds derived columns ``fn(state)``."""
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            for key, value in (header or {}).items():
                fh.write(f"# {key}: {value}\n")
            w = csv.writer(fh)
            w.writerow(["t", *names, *extra])
            for t, y in zip(self.times, self.states):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in y),
                            *(repr(float(fn(y))) for fn in extra.values())])


def _dense_eval(coef, theta):
    r1, r2, r3, r4, r5 = coef
    return r1 + theta * (r2 + (1.0 - theta) * (r3 + theta * (r4 + (1.0 - theta) * r5)))


def _error_norm(err, y0, y1, rtol, atol):
    r = err / (atol + rtol * np.maximum(np.abs(y0), np.abs(y1)))
    if r.ndim > 1:
        return math.sqrt(float(np.max(np.einsum("i...,i...->...", r, r))) / r.shape[0])
    return math.sqrt(float(r @ r) / r.size)


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, max_step):
    scale = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = rhs(t0 + direction * h0, y0 + direction * h0 * f0)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def solve(rhs: Callable, t_span: tuple[float, float], y0, config: IntegratorConfig = VERIFY_CONFIG,
          events: Iterable[Event | Callable] = (), first_step: float | None = None) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span``.

    Returns a :class:`Trajectory`; if ``config.max_steps`` accepted steps are
    used up first, the partial trajectory is returned with ``truncated=True``.
    """
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not t_end != t0:
        raise ValueError("degenerate time span")
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    direction = 1.0 if t_end > t0 else -1.0
    rtol, atol = config.rel_tol, config.abs_tol
    events = [e if isinstance(e, Event) else Event(e, id=f"event{i}") for i, e in enumerate(events)]

    t = t0
    k1 = np.asarray(rhs(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError("non-finite derivative", t, y)
    h = first_step or _initial_step(rhs, t, y, k1, direction, rtol, atol, config.max_step)
    # a component starting at exactly 0 drives the heuristic towards atol
    h = max(h, 1e-10 * abs(t_end - t0))
    g_prev = [float(e.fn(t, y)) for e in events]

    times, states, seg_t0, seg_h, coeffs, records = [t], [y], [], [], [], []
    n_rejected = 0
    truncated = False
    stop = False
    h_min_rel = 16 * np.finfo(float).eps

    while not stop:
        if len(seg_h) >= config.max_steps:
            truncated = True
            break
        h = min(h, config.max_step, abs(t_end - t))
        if h <= h_min_rel * abs(t) or h <= 0:
            raise IntegrationError("step size underflow", t, y)

        hs = direction * h
        k = [k1]
        for i in range(1, 7):
            a = _A[i]
            inc = a[0] * k[0]
            for j in range(1, i):
                if a[j]:
                    inc = inc + a[j] * k[j]
            k.append(np.asarray(rhs(t + _C[i] * hs, y + hs * inc), dtype=float))
        y_new = y + hs * (_A[6][0] * k[0] + _A[6][2] * k[2] + _A[6][3] * k[3]
                          + _A[6][4] * k[4] + _A[6][5] * k[5])
        k7 = k[6]  # evaluated at y_new (FSAL)

        # one reduction instead of two isfinite passes; overflow also rejects
        if not math.isfinite(float(y_new.sum()) + float(k7.sum())):
            n_rejected += 1
            h *= 0.1
            continue

        err = hs * (_E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3] + _E[4] * k[4]
                    + _E[5] * k[5] + _E[6] * k7)
        err_norm = _error_norm(err, y, y_new, rtol, atol)
        if err_norm > 1.0:
            n_rejected += 1
            h *= max(_FAC_MIN, _SAFETY * err_norm ** -0.2)
            continue

        # accepted step: continuous extension
        r2 = y_new - y
        r3 = hs * k[0] - r2
        r4 = r2 - hs * k7 - r3
        r5 = hs * (_D[0] * k[0] + _D[2] * k[2] + _D[3] * k[3] + _D[4] * k[4]
                   + _D[5] * k[5] + _D[6] * k7)
        coef = (y, r2, r3, r4, r5)
        t_new = t_end if abs(t_end - (t + hs)) <= h_min_rel * max(abs(t_end), 1.0) else t + hs

        seg_t0.append(t)
        seg_h.append(hs)
        coeffs.append(coef)

        if events:
            hits = []
            for ie, ev in enumerate(events):
                g_new = float(ev.fn(t_new, y_new))
                gp = g_prev[ie]
                up = gp < 0.0 <= g_new
                down = gp > 0.0 >= g_new
                if (up and ev.direction >= 0) or (down and ev.direction <= 0):
                    te = _locate(ev, coef, t, hs, gp, g_new, config.event_tol)
                    hits.append((direction * (te - t), te, ie, 1 if up else -1))
                g_prev[ie] = g_new
            hits.sort()
            for _, te, ie, sgn in hits:
                ye = _dense_eval(coef, (te - t) / hs)
                records.append(EventRecord(te, ye, events[ie].id, sgn))
                if events[ie].terminal:
                    t_new, y_new = te, ye
                    stop = True
                    break

        t, y, k1 = t_new, y_new, k7
        times.append(t)
        states.append(y)
        if t == t_end:
            stop = True
        fac = _FAC_MAX if err_norm == 0 else min(_FAC_MAX, max(_FAC_MIN, _SAFETY * err_norm ** -0.2))
        h *= fac

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        seg_t0=np.array(seg_t0),
        seg_h=np.array(seg_h),
        coeffs=np.array(coeffs) if coeffs else np.empty((0, 5) + y.shape),
        events=tuple(records),
        truncated=truncated,
        n_rejected=n_rejected,
    )


def _locate(ev: Event, coef, t, hs, g0, g1, tol):
    """Root of the event function on the interpolant of one step."""
    if g1 == 0.0:
        return t + hs
    g = lambda theta: float(ev.fn(t + theta * hs, _dense_eval(coef, theta)))
    theta = brentq(g, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    # polish to the requested residual if brentq stopped on the interval width
    if abs(g(theta)) > tol:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if (gm < 0) == (g0 < 0):
                lo = mid
            else:
                hi = mid
            if abs(gm) <= tol:
                theta = mid
                break
    return t + theta * hs


def integrate(kind: SystemKind, params, state0, t_span, config: IntegratorConfig = VERIFY_CONFIG,
              events: Iterable[Event | Callable] = ()) -> Trajectory:
    """Integrate one of the model systems."""
    state0 = np.asarray(state0, dtype=float)
    if state0.shape[0] != kind.dim:
        raise ValueError(f"{kind.value} expects dimension {kind.dim}, got {state0.shape[0]}")
    return solve(rhs_for(kind, params), t_span, state0, config, events)


def poincare_return(params: ReducedParams, eta0: float, config: IntegratorConfig = VERIFY_CONFIG,
                    t_max: float = 1e5) -> tuple[float, float | None]:
    """Next upward crossing of ``xi = lambda`` starting from ``(lambda, eta0)``.

    The return is the first crossing after ``t = 0`` at which ``xi`` is
    increasing, i.e. the lower ray ``0 < eta <= F(lambda)``.  Starting below
    ``F(lambda)`` this is a full loop around the interior equilibrium.  The
    equilibrium itself maps to itself with period ``None``.
    """
    if not eta0 > 0:
        raise ValueError("eta0 must be positive")
    if not params.lam < 1:
        raise ValueError("return map needs an interior equilibrium (lambda < 1)")
    _, F, _ = structural_functions(params)
    F_lam = float(F(params.lam))
    if abs(eta0 - F_lam) <= 4 * np.finfo(float).eps * F_lam:
        return eta0, None
    lam = params.lam
    section = Event(lambda t, y: y[0] - lam, direction=1, terminal=True, id="section")
    traj = solve(lambda t, y: reduced_field(params, y), (0.0, t_max), [lam, eta0], config, [section])
    if not traj.events:
        raise NoReturnError(f"no return to the section from eta0={eta0!r} "
                            f"(t reached {traj.t_final:.6g}, truncated={traj.truncated})")
    hit = traj.events[-1]
    return float(hit.state[1]), float(hit.time)
