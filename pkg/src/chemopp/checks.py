"""Theorem-level numerical checks.

Each check draws its own parameter sets from a seeded generator, runs one
family of computations and returns a :class:`CheckResult`.  The same
functions back the ``verify`` command and the acceptance tests, so both
report identical numbers for a given seed.

Every check has a default tolerance.  Passing a looser ``tol`` is allowed
but recorded as a warning on the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from . import sampling
from .analysis.cycles import MultiplicityAlarm, find_limit_cycle
from .analysis.equilibria import find_equilibria, jacobian
from .analysis.lyapunov import FAN_STARTS, fan_convergence, global_stability_certificate
from .analysis.uniqueness import forms_agreement, uniqueness_check
from .integrator import VERIFY_CONFIG, IntegratorConfig, integrate
from .model import (
    F_prime,
    H_function,
    ReducedParams,
    SystemKind,
    structural_functions,
    xi_plus,
)
from .sweep import KINDS, SweepSpec, kind_sequence, run_sweep, transitions

HOPF_BASE = ReducedParams(1.0, 4.0, 1.0, 0.05)
CYCLE_START_FRACTIONS = (0.05, 0.3, 0.6, 0.95, 2.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    witness: dict | None = None
    warnings: list[str] = field(default_factory=list)
    criterion: int | None = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        num = f"[{self.criterion}] " if self.criterion is not None else ""
        return f"{tag}  {num}{self.name}: {self.detail}"

    def to_dict(self) -> dict:
        return {"name": self.name, "criterion": self.criterion, "passed": self.passed,
                "detail": self.detail, "witness": self.witness, "warnings": list(self.warnings)}


def _tolerance(default: float, tol: float | None, warnings: list[str], what: str) -> float:
    if tol is None:
        return default
    if tol > default:
        warnings.append(f"loose tolerance for {what}: {tol:g} (default {default:g})")
    return tol


def _config_warnings(config: IntegratorConfig) -> list[str]:
    if config.rel_tol > 1e-6:
        return [f"loose integrator tolerance rel_tol={config.rel_tol:g}"]
    return []


def _pmap(fn: Callable, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# 1. decay of H
# ---------------------------------------------------------------------------

def check_h_decay(seed=None, n: int = 20, t_end: float = 50.0, tol: float | None = None,
                  config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    warnings = _config_warnings(config)
    tol = _tolerance(1e-8, tol, warnings, "H decay")
    rng = sampling.rng_for(seed)
    worst, witness = 0.0, None
    grid = np.linspace(0.0, t_end, 501)
    for _ in range(n):
        p = sampling.chemostat_params(rng)
        y0 = sampling.chemostat_state(rng, p)
        traj = integrate(SystemKind.CHEMOSTAT_3D, p, y0, (0.0, t_end), config)
        states = np.concatenate([traj.states, traj(grid)])
        times = np.concatenate([traj.times, grid])
        H0 = H_function(p, y0)
        H = H_function(p, states.T)
        err = np.abs(H - H0 * np.exp(-p.D * times)) / (1.0 + abs(H0))
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            witness = {"params": p.as_dict(), "state0": y0.tolist(), "t": float(times[i]), "value": worst}
    ok = worst <= tol
    return CheckResult("H decay", ok, f"max |H - H0 exp(-Dt)|/(1+|H0|) = {worst:.3e} over {n} draws "
                       f"(tol {tol:g})", None if ok else witness, warnings, 1)


# ---------------------------------------------------------------------------
# 2. reparametrization
# ---------------------------------------------------------------------------

def check_reparametrization(seed=None, n: int = 20, tau_end: float = 30.0, tol: float | None = None,
                            config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    """Coupled logistic system mapped by the scale factors against the reduced system."""
    warnings = _config_warnings(config)
    tol = _tolerance(1e-6, tol, warnings, "reparametrization")
    rng = sampling.rng_for(seed)
    worst, witness = 0.0, None
    taus = np.linspace(0.0, tau_end, 301)
    for _ in range(n):
        p, rp, sc = sampling.reducible_pair(rng)
        xi0, eta0 = sampling.reduced_state(rng)
        x0, y0 = sc.from_reduced(xi0, eta0)
        ts = taus / sc.time_scale
        direct = integrate(SystemKind.LOGISTIC_COUPLED, p, [x0, y0], (0.0, ts[-1]), config)
        xi, eta = sc.to_reduced(*direct(ts).T)
        red = integrate(SystemKind.REDUCED_COUPLED, rp, [xi0, eta0], (0.0, tau_end), config)(taus)
        err = np.hypot(xi - red[:, 0], eta - red[:, 1]) / np.hypot(red[:, 0], red[:, 1])
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            witness = {"params": p.as_dict(), "reduced": rp.as_dict(), "tau": float(taus[i]), "value": worst}
    ok = worst <= tol
    return CheckResult("reparametrization", ok, f"max relative deviation {worst:.3e} over {n} draws "
                       f"(tol {tol:g})", None if ok else witness, warnings, 2)


# ---------------------------------------------------------------------------
# 3. local classification
# ---------------------------------------------------------------------------

def check_classification(seed=None, n: int = 1000, slope_floor: float = 1e-6, tol=None,
                         config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    """Eigenvalues at ``(lam, F(lam))`` against the sign of ``F'(lam)``.

    Draws have ``lam`` in ``[0.01, 0.99]`` so the interior equilibrium exists;
    the origin and ``(1, 0)`` are checked as well.
    """
    rng = sampling.rng_for(seed)
    checked = mismatches = 0
    witness = None
    for _ in range(n):
        p = sampling.reduced_params(rng, lam=rng.uniform(0.01, 0.99))
        slope = F_prime(p, p.lam)
        if abs(slope) <= slope_floor:
            continue
        checked += 1
        reports = find_equilibria(p)
        bad = [r for r in reports if not r.agrees]
        if bad:
            mismatches += 1
            if witness is None:
                r = bad[0]
                witness = {"params": p.as_dict(), "equilibrium": r.name, "point": list(r.location),
                           "eigenvalues": [[z.real, z.imag] for z in r.eigenvalues.tolist()],
                           "F_prime": slope, "classification": r.classification}
    ok = mismatches == 0
    return CheckResult("classification", ok, f"{checked - mismatches}/{checked} draws agree with sign F'(lam)",
                       witness, [], 3)


# ---------------------------------------------------------------------------
# 4. threshold identity
# ---------------------------------------------------------------------------

def trace_threshold(p: ReducedParams, xtol: float = 1e-15) -> float:
    """``lambda`` where the trace of the interior Jacobian vanishes, by bisection."""
    _, F, _ = structural_functions(p)

    def trace(lam):
        q = p.replace(lam=lam)
        return float(np.trace(jacobian(q, (lam, float(F(lam))))))

    return bisect(trace, 1e-14, 1.0 - 1e-12, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def check_threshold(seed=None, n: int = 100, tol: float | None = None,
                    config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    warnings: list[str] = []
    tol = _tolerance(1e-10, tol, warnings, "threshold identity")
    limit_tol = max(1e-5, tol)
    rng = sampling.rng_for(seed)
    worst, witness = 0.0, None
    for _ in range(n):
        p = sampling.destabilizable_params(rng)
        d = abs(xi_plus(p) - trace_threshold(p))
        if d > worst:
            worst, witness = d, {"params": p.as_dict(), "value": d}
    lim = abs(xi_plus(ReducedParams(1e-6, 2.0, 1.0, 0.5)) - 0.25)
    ok = worst <= tol and lim <= limit_tol
    if lim > limit_tol:
        witness = {"params": {"epsilon": 1e-6, "beta": 2.0}, "value": lim}
    return CheckResult("threshold identity", ok,
                       f"max |closed form - trace bisection| = {worst:.3e} over {n} draws (tol {tol:g}); "
                       f"eps=1e-6, beta=2: |xi_plus - 0.25| = {lim:.3e}", None if ok else witness, warnings, 4)


# ---------------------------------------------------------------------------
# 5. global stability certificate
# ---------------------------------------------------------------------------

def _certificate_task(args):
    p, config, tol, short = args
    return global_stability_certificate(p, config=config, converge_tol=tol, short_circuit=short)


def check_certificates(seed=None, n: int = 100, tol: float | None = None,
                       config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1,
                       below_threshold: bool = False, expect_fail: bool = False) -> CheckResult:
    """Sign condition plus fan convergence for draws in the stable range.

    ``below_threshold`` draws ``lam < xi_plus`` instead, where the interior
    equilibrium is unstable; combined with ``expect_fail`` the check passes
    only if every certificate fails there.
    """
    warnings = _config_warnings(config)
    tol = _tolerance(1e-5, tol, warnings, "fan convergence")
    rng = sampling.rng_for(seed)
    draw = sampling.cycle_regime_params if below_threshold else sampling.stable_regime_params
    params = [draw(rng) for _ in range(n)]
    certs = _pmap(_certificate_task, [(p, config, tol, expect_fail) for p in params], workers)
    failed = [c for c in certs if not c.passed]
    sign_fail = [c for c in certs if not c.sign_condition_holds]
    if expect_fail:
        ok = len(failed) == n
        unexpected = next((c for c in certs if c.passed), None)
        witness = None if unexpected is None else {"params": unexpected.params.as_dict(),
                                                   "value": "certificate passed"}
        detail = f"{len(failed)}/{n} certificates failed as expected"
    else:
        ok = not failed
        witness = None
        if failed:
            c = max(failed, key=lambda c: float(np.max(c.final_distances)))
            witness = {"params": c.params.as_dict(), "point": list(c.target),
                       "value": float(np.max(c.final_distances)), "failures": list(c.failures)}
        detail = (f"{n - len(failed)}/{n} certificates pass; sign condition fails in {len(sign_fail)}, "
                  f"fan convergence within {tol:g} fails in {len(failed) - len(sign_fail)}")
    name = "Lyapunov certificate" + (" (below threshold)" if below_threshold else "")
    return CheckResult(name, ok, detail, witness, warnings, 5)


# ---------------------------------------------------------------------------
# 6. uniqueness quartic
# ---------------------------------------------------------------------------

def check_quartic(seed=None, n: int = 1000, tol: float | None = None,
                  config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    warnings: list[str] = []
    tol = _tolerance(1e-12, tol, warnings, "quartic")
    rng = sampling.rng_for(seed)
    worst_q, witness = -math.inf, None
    for _ in range(n):
        p = sampling.cycle_regime_params(rng)
        rep = uniqueness_check(p, tol=tol)
        if rep.max_value > worst_q:
            worst_q = rep.max_value
            witness = {"params": p.as_dict(), "point": rep.argmax, "value": rep.max_value}
    worst_f, fwit = 0.0, None
    for _ in range(n):
        p = sampling.cycle_regime_params(rng)
        xi = rng.uniform(0.0, 1.0)
        d = float(forms_agreement(p, xi))
        if d > worst_f:
            worst_f, fwit = d, {"params": p.as_dict(), "point": xi, "value": d}
    ok_q, ok_f = worst_q <= tol, worst_f <= tol
    witness = None if ok_q and ok_f else (witness if not ok_q else fwit)
    return CheckResult("uniqueness quartic", ok_q and ok_f,
                       f"max quartic on [0,1] = {worst_q:.3e} over {n} draws; "
                       f"max form disagreement {worst_f:.3e} (tol {tol:g})", witness, warnings, 6)


# ---------------------------------------------------------------------------
# 7. limit cycle uniqueness
# ---------------------------------------------------------------------------

def _cycle_task(args):
    p, config, merge_tol = args
    _, F, _ = structural_functions(p)
    F_lam = float(F(p.lam))
    starts = [f * F_lam for f in CYCLE_START_FRACTIONS]
    try:
        rep = find_limit_cycle(p, config, starts=starts, merge_tol=merge_tol)
    except MultiplicityAlarm as exc:
        return p, None, exc.fixed_points
    return p, rep, list(rep.start_fixed_points)


def check_cycles(seed=None, n: int = 20, tol: float | None = None,
                 config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    warnings = _config_warnings(config)
    tol = _tolerance(1e-6, tol, warnings, "fixed-point spread")
    rng = sampling.rng_for(seed)
    params = [sampling.cycle_regime_params(rng, upper=0.9) for _ in range(n)]
    results = _pmap(_cycle_task, [(p, config, tol) for p in params], workers)
    bad, spread, slope = [], 0.0, 0.0
    for p, rep, pts in results:
        s = max(pts) - min(pts)
        spread = max(spread, s)
        if rep is None or not rep.exists or not abs(rep.slope) < 1:
            bad.append({"params": p.as_dict(), "fixed_points": pts,
                        "value": None if rep is None else rep.slope})
        else:
            slope = max(slope, abs(rep.slope))
    ok = not bad
    return CheckResult("limit cycle uniqueness", ok,
                       f"{n - len(bad)}/{n} draws: one fixed point from {len(CYCLE_START_FRACTIONS)} starts, "
                       f"max spread {spread:.3e} (tol {tol:g}), max |slope| {slope:.4f}",
                       bad[0] if bad else None, warnings, 7)


# ---------------------------------------------------------------------------
# 8. Hopf amplitude scaling
# ---------------------------------------------------------------------------

def hopf_amplitude(base: ReducedParams, delta: float, config: IntegratorConfig = VERIFY_CONFIG) -> float:
    p = base.replace(lam=xi_plus(base) - delta)
    return find_limit_cycle(p, config).amplitude


def check_hopf_scaling(seed=None, base: ReducedParams = HOPF_BASE, deltas=(0.02, 0.04),
                       tol: float | None = None, config: IntegratorConfig = VERIFY_CONFIG,
                       workers: int = 1) -> CheckResult:
    warnings = _config_warnings(config)
    tol = _tolerance(0.15, tol, warnings, "Hopf ratio")
    ratios = {}
    for d in deltas:
        ratios[d] = hopf_amplitude(base, d, config) / hopf_amplitude(base, d / 4, config)
    bad = {d: r for d, r in ratios.items() if not abs(r - 2.0) <= 2.0 * tol}
    text = ", ".join(f"A({d:g})/A({d / 4:g}) = {r:.4f}" for d, r in ratios.items())
    witness = None
    if bad:
        d = next(iter(bad))
        witness = {"params": base.as_dict(), "point": d, "value": bad[d]}
    return CheckResult("supercritical Hopf scaling", not bad, f"{text} (expected 2 +- {100 * tol:g}%)",
                       witness, warnings, 8)


# ---------------------------------------------------------------------------
# 9. sweep ordering
# ---------------------------------------------------------------------------

def check_sweep_order(seed=None, base: ReducedParams = HOPF_BASE, n_points: int = 50,
                      tol=None, config: IntegratorConfig | None = None, workers: int = 1) -> CheckResult:
    spec = SweepSpec(base, "lambda", 0.01, 1.5, n_points, certify=False)
    records = run_sweep(spec, workers)
    seq = kind_sequence(records)
    trans = transitions(records)
    xp = xi_plus(base)
    ok = seq == list(KINDS[::-1]) and len(trans) == 2
    if ok:
        (_, _, a0, b0), (_, _, a1, b1) = trans
        ok = a0 < xp <= b0 and a1 < 1.0 <= b1 and b0 - a0 <= spec.step * (1 + 1e-9) \
            and b1 - a1 <= spec.step * (1 + 1e-9)
    brackets = "; ".join(f"{k0} -> {k1} in ({a:.4f}, {b:.4f}]" for k0, k1, a, b in trans)
    witness = None if ok else {"params": base.as_dict(), "sequence": seq,
                               "transitions": [list(t) for t in trans], "xi_plus": xp}
    return CheckResult("bifurcation ordering", ok,
                       f"sequence {' | '.join(seq)}; {brackets}; xi_plus = {xp:.6f}", witness, [], 9)


# ---------------------------------------------------------------------------
# 10. transcritical boundary
# ---------------------------------------------------------------------------

def check_transcritical(seed=None, base: ReducedParams = HOPF_BASE, lambdas=(1.01, 1.5, 3.0),
                        t_final: float = 2000.0, tol: float | None = None,
                        config: IntegratorConfig = VERIFY_CONFIG, workers: int = 1) -> CheckResult:
    warnings = _config_warnings(config)
    tol = _tolerance(1e-5, tol, warnings, "fan convergence")
    worst, parts, witness = {}, [], None
    for lam in lambdas:
        p = base.replace(lam=lam)
        _, dist = fan_convergence(p, (1.0, 0.0), t_final, config)
        worst[lam] = float(dist.max())
        parts.append(f"lambda={lam:g}: {worst[lam]:.3e}")
        if worst[lam] > tol and witness is None:
            j = int(np.argmax(dist))
            witness = {"params": p.as_dict(), "point": [float(v) for v in FAN_STARTS[j]], "value": worst[lam]}
    ok = witness is None
    return CheckResult("transcritical boundary", ok,
                       f"max fan distance to (1,0) at t={t_final:g}: " + ", ".join(parts) + f" (tol {tol:g})",
                       witness, warnings, 10)


# ---------------------------------------------------------------------------
# single parameter set
# ---------------------------------------------------------------------------

def check_point(p: ReducedParams, config: IntegratorConfig = VERIFY_CONFIG, tol: float | None = None
                ) -> list[CheckResult]:
    """Checks appropriate to one parameter set: local classification plus its regime."""
    warnings = _config_warnings(config)
    out = []
    reports = find_equilibria(p)
    bad = [r for r in reports if not r.agrees]
    out.append(CheckResult("classification", not bad,
                           ", ".join(f"{r.name}: {r.classification}" for r in reports),
                           None if not bad else {"params": p.as_dict(), "equilibrium": bad[0].name,
                                                 "point": list(bad[0].location)}, list(warnings)))
    if p.lam >= xi_plus(p):
        ctol = _tolerance(1e-5, tol, warnings, "fan convergence")
        c = global_stability_certificate(p, config=config, converge_tol=ctol)
        out.append(CheckResult("Lyapunov certificate", c.passed,
                               f"theta = {c.theta:.6g}, worst sign product {c.worst_violation:.3e}, "
                               f"max fan distance {float(np.max(c.final_distances)):.3e}",
                               None if c.passed else {"params": p.as_dict(), "failures": list(c.failures)},
                               list(warnings)))
    else:
        u = uniqueness_check(p)
        out.append(CheckResult("uniqueness quartic", u.passed, f"max quartic {u.max_value:.3e} at xi={u.argmax:.6g}",
                               None if u.passed else {"params": p.as_dict(), "point": u.argmax,
                                                      "value": u.max_value}))
        _, rep, pts = _cycle_task((p, config, tol or 1e-6))
        ok = rep is not None and rep.exists and abs(rep.slope) < 1
        detail = (f"eta* = {rep.eta_star:.10g}, period {rep.period:.6g}, slope {rep.slope:.6g}"
                  if rep is not None and rep.exists else f"fixed points {pts}")
        out.append(CheckResult("limit cycle", ok, detail, None if ok else {"params": p.as_dict(),
                                                                           "fixed_points": pts},
                               list(warnings)))
    return out


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "h-decay": check_h_decay,
    "reparametrization": check_reparametrization,
    "classification": check_classification,
    "threshold": check_threshold,
    "certificate": check_certificates,
    "quartic": check_quartic,
    "cycles": check_cycles,
    "hopf": check_hopf_scaling,
    "sweep": check_sweep_order,
    "transcritical": check_transcritical,
}


def run_checks(names=None, seed=None, tol: float | None = None, config: IntegratorConfig = VERIFY_CONFIG,
               workers: int = 1, **extra) -> list[CheckResult]:
    """Run the named checks (all by default) in registry order."""
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {list(CHECKS)}")
    out = []
    for name in CHECKS:
        if name not in names:
            continue
        kwargs = dict(seed=seed, tol=tol, workers=workers)
        if name != "sweep":
            kwargs["config"] = config
        if name == "certificate":
            kwargs.update(extra)
        out.append(CHECKS[name](**kwargs))
    return out
