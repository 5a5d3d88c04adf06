"""Bifurcation-diagram sweeps over one reduced parameter.

Each parameter point is classified numerically, without consulting the
theory: integrate past a transient, accept an equilibrium if the state has
settled on one, otherwise look for a limit cycle with the return map.  The
theoretical prediction is computed separately and disagreements are flagged.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis.cycles import CycleNotFoundError, MultiplicityAlarm, cycle_geometry, return_fixed_point
from .analysis.lyapunov import certificate_theta, isocline_gap, sign_condition_grid
from .analysis.uniqueness import uniqueness_check
from .integrator import (
    SWEEP_CONFIG,
    VERIFY_CONFIG,
    Event,
    IntegrationError,
    IntegratorConfig,
    NoReturnError,
    solve,
)
from .model import ReducedParams, reduced_field, structural_functions, xi_plus

SWEEPABLE = ("lambda", "epsilon", "beta", "mu")
KINDS = ("boundary-equilibrium", "interior-equilibrium", "limit-cycle")
EQ_TOL = 1e-6
CSV_COLUMNS = ("param_value", "kind", "xi_eq", "eta_eq", "cycle_xi_min", "cycle_xi_max",
               "cycle_eta_min", "cycle_eta_max", "period", "flags")


@dataclass(frozen=True)
class SweepSpec:
    base: ReducedParams
    param: str = "lambda"
    lo: float = 0.01
    hi: float = 1.5
    n_points: int = 50
    config: IntegratorConfig = SWEEP_CONFIG
    transient: float = 500.0
    sample: float = 200.0
    certify: bool = True

    def __post_init__(self):
        if self.param not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.param!r}; choose from {SWEEPABLE}")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.n_points == 1:
            if self.lo != self.hi:
                raise ValueError("a single-point sweep needs lo == hi")
        elif not self.lo < self.hi:
            raise ValueError(f"empty range: lo={self.lo!r} must be < hi={self.hi!r}")
        # validity of the end points covers the whole range
        self.params_at(self.lo)
        self.params_at(self.hi)

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1) if self.n_points > 1 else 0.0

    def params_at(self, value: float) -> ReducedParams:
        return self.base.replace(**{self.param: float(value)})

    def to_dict(self) -> dict:
        return {
            "base": self.base.as_dict(),
            "param": self.param,
            "lo": self.lo,
            "hi": self.hi,
            "n_points": self.n_points,
            "config": asdict(self.config),
            "transient": self.transient,
            "sample": self.sample,
            "certify": self.certify,
        }


@dataclass(frozen=True)
class SweepRecord:
    param: str
    param_value: float
    kind: str
    xi_eq: float = math.nan
    eta_eq: float = math.nan
    cycle_xi_min: float = math.nan
    cycle_xi_max: float = math.nan
    cycle_eta_min: float = math.nan
    cycle_eta_max: float = math.nan
    period: float = math.nan
    predicted: str = ""
    certificate: str = ""
    flags: tuple[str, ...] = field(default=())

    @property
    def amplitude(self) -> float:
        return 0.5 * (self.cycle_xi_max - self.cycle_xi_min) if self.kind == "limit-cycle" else 0.0

    @property
    def discrepant(self) -> bool:
        return "discrepant" in self.flags

    def csv_row(self) -> list[str]:
        def num(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))
        return [num(self.param_value), self.kind, num(self.xi_eq), num(self.eta_eq),
                num(self.cycle_xi_min), num(self.cycle_xi_max), num(self.cycle_eta_min),
                num(self.cycle_eta_max), num(self.period), ";".join(self.flags)]


def predicted_kind(p: ReducedParams) -> str:
    if p.lam >= 1:
        return "boundary-equilibrium"
    if p.lam >= xi_plus(p):
        return "interior-equilibrium"
    return "limit-cycle"


def _certificate_summary(p: ReducedParams) -> str:
    """Cheap theorem checks: sign condition for global stability, quartic for uniqueness."""
    if p.lam >= 1:
        return ""
    if p.lam >= xi_plus(p):
        theta = certificate_theta(p)
        grid = sign_condition_grid(p, theta)
        ok = bool(np.max(isocline_gap(p, theta, grid) * (grid - p.lam)) < 0)
        return "global-stability:" + ("pass" if ok else "fail")
    return "uniqueness:" + ("pass" if uniqueness_check(p).passed else "fail")


def classify_point(p: ReducedParams, config: IntegratorConfig = SWEEP_CONFIG, transient: float = 500.0,
                   sample: float = 200.0, start=(0.5, 0.5), param: str = "lambda",
                   value: float | None = None, certify: bool = True) -> SweepRecord:
    """Attractor reached from ``start`` for one parameter set."""
    value = p.lam if value is None else value
    flags: list[str] = []
    rhs = lambda t, y: reduced_field(p, y)
    equilibria = [("boundary-equilibrium", (1.0, 0.0))]
    F_lam = None
    if p.lam < 1:
        _, F, _ = structural_functions(p)
        F_lam = float(F(p.lam))
        equilibria.append(("interior-equilibrium", (p.lam, F_lam)))

    def nearest(y):
        d = [math.hypot(y[0] - e[0], y[1] - e[1]) for _, e in equilibria]
        i = int(np.argmin(d))
        return equilibria[i], d[i]

    # the integrator cannot settle a state much closer than its own tolerance
    eq_tol = max(EQ_TOL, 10 * config.rel_tol)
    kind = None
    data: dict = {}
    try:
        y = solve(rhs, (0.0, transient), start, config).final_state
        (name, loc), dist = nearest(y)
        if dist <= eq_tol:
            kind, data = name, {"xi_eq": loc[0], "eta_eq": loc[1]}
        elif F_lam is not None:
            kind, data = _cycle_or_slow_focus(p, y, config, sample)
        if kind is None:
            # slow approach (critical slowing down near lambda = 1 or xi_plus)
            traj = solve(rhs, (0.0, sample), y, config)
            (name, loc), _ = nearest(traj.final_state)
            flags.append("slow-convergence")
            # compare distance envelopes, not end points: a slow focus is elliptical
            d = np.hypot(traj.states[:, 0] - loc[0], traj.states[:, 1] - loc[1])
            late = traj.times >= 0.5 * sample
            if d[late].max() < d[~late].max() or d[late].max() <= eq_tol:
                kind, data = name, {"xi_eq": loc[0], "eta_eq": loc[1]}
            else:
                kind = "unresolved"
                flags.append("failed")
    except (IntegrationError, CycleNotFoundError, MultiplicityAlarm, NoReturnError) as exc:
        kind = "unresolved"
        flags.append("failed:" + type(exc).__name__)

    predicted = predicted_kind(p)
    if kind != predicted:
        flags.append("discrepant")
    cert = _certificate_summary(p) if certify else ""
    return SweepRecord(param, float(value), kind, predicted=predicted, certificate=cert,
                       flags=tuple(flags), **data)


def _cycle_or_slow_focus(p: ReducedParams, y, config, horizon):
    """Return-map analysis starting from the post-transient state.

    ``(None, {})`` means the state is still creeping towards an equilibrium.
    """
    lam = p.lam
    section = Event(lambda t, s: s[0] - lam, direction=1, terminal=True, id="section")
    traj = solve(lambda t, s: reduced_field(p, s), (0.0, horizon), y, config, [section])
    if not traj.events:
        return None, {}  # monotone approach, no more crossings
    eta0 = float(traj.events[-1].state[1])
    _, F, _ = structural_functions(p)
    F_lam = float(F(lam))
    try:
        eta_star = return_fixed_point(p, eta0, config, noise=100 * config.rel_tol * F_lam)
    except NoReturnError:
        return None, {}
    if abs(eta_star - F_lam) <= 1e-6 * F_lam:
        return None, {}
    period, xi_min, xi_max, eta_min, eta_max = cycle_geometry(p, eta_star, config)
    return "limit-cycle", {"cycle_xi_min": xi_min, "cycle_xi_max": xi_max,
                           "cycle_eta_min": eta_min, "cycle_eta_max": eta_max, "period": period}


def _run_point(args) -> SweepRecord:
    spec, value, config = args
    return classify_point(spec.params_at(value), config, spec.transient, spec.sample,
                          param=spec.param, value=float(value), certify=spec.certify)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRecord]:
    """One record per grid value, in grid order.

    Points within two grid steps of the analytic Hopf threshold are computed
    with the tighter verification tolerances.
    """
    tasks = []
    for v in spec.values:
        config = spec.config
        p = spec.params_at(v)
        near = spec.param == "lambda" and spec.n_points > 1 and abs(p.lam - xi_plus(p)) < 2 * spec.step
        if near and config.rel_tol > VERIFY_CONFIG.rel_tol:
            config = VERIFY_CONFIG
        tasks.append((spec, float(v), config))
    if workers <= 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, tasks))


def kind_sequence(records) -> list[str]:
    """Attractor kinds in parameter order with consecutive repeats merged."""
    out: list[str] = []
    for r in records:
        if not out or out[-1] != r.kind:
            out.append(r.kind)
    return out


def transitions(records) -> list[tuple[str, str, float, float]]:
    """``(kind_before, kind_after, value_before, value_after)`` at every kind change."""
    out = []
    for a, b in zip(records, records[1:]):
        if a.kind != b.kind:
            out.append((a.kind, b.kind, a.param_value, b.param_value))
    return out


@dataclass(frozen=True)
class SweepDiff:
    rows: tuple[dict, ...]
    transitions_a: tuple
    transitions_b: tuple
    pattern_a: tuple[str, ...]
    pattern_b: tuple[str, ...]

    @property
    def pattern_equal(self) -> bool:
        return self.pattern_a == self.pattern_b

    @property
    def empty(self) -> bool:
        return not self.rows and self.transitions_a == self.transitions_b

    def to_dict(self) -> dict:
        return {
            "rows": list(self.rows),
            "transitions_a": [list(t) for t in self.transitions_a],
            "transitions_b": [list(t) for t in self.transitions_b],
            "pattern_a": list(self.pattern_a),
            "pattern_b": list(self.pattern_b),
            "pattern_equal": self.pattern_equal,
        }


def diff_sweeps(a: list[SweepRecord], b: list[SweepRecord], amp_tol: float = 1e-9) -> SweepDiff:
    """Point-by-point differences between two sweeps over the same grid."""
    if len(a) != len(b) or any(x.param != y.param or x.param_value != y.param_value for x, y in zip(a, b)):
        raise ValueError("sweeps are over different parameters or grids")
    rows = []
    for x, y in zip(a, b):
        if x.kind != y.kind or abs(x.amplitude - y.amplitude) > amp_tol:
            rows.append({"param_value": x.param_value, "kind_a": x.kind, "kind_b": y.kind,
                         "amplitude_a": x.amplitude, "amplitude_b": y.amplitude})
    return SweepDiff(tuple(rows), tuple(transitions(a)), tuple(transitions(b)),
                     tuple(kind_sequence(a)), tuple(kind_sequence(b)))


def write_sweep(records, spec: SweepSpec, csv_path, json_path, header: dict | None = None) -> None:
    header = dict(header or {})
    with open(csv_path, "w", newline="") as fh:
        for key, value in header.items():
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.csv_row())
    with open(json_path, "w") as fh:
        json.dump({"spec": spec.to_dict(), **header}, fh, indent=2)


def read_sweep_csv(path, param: str = "lambda") -> list[SweepRecord]:
    def num(s):
        return float(s) if s else math.nan
    with open(path) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    out = []
    for row in rows[1:]:
        d = dict(zip(CSV_COLUMNS, row))
        out.append(SweepRecord(param, float(d["param_value"]), d["kind"], num(d["xi_eq"]), num(d["eta_eq"]),
                               num(d["cycle_xi_min"]), num(d["cycle_xi_max"]), num(d["cycle_eta_min"]),
                               num(d["cycle_eta_max"]), num(d["period"]),
                               flags=tuple(f for f in d["flags"].split(";") if f)))
    return out
