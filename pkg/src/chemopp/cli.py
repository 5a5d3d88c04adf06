"""Command-line front end: ``simulate``, ``analyze``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error.  Parameters come from flags or from a flat ``key=value`` file given
with ``--config``; flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis.cycles import find_limit_cycle
from .analysis.equilibria import find_equilibria, predicted_regime
from .analysis.lyapunov import certificate_theta
from .checks import CHECKS, check_point, run_checks
from .integrator import SWEEP_CONFIG, VERIFY_CONFIG, IntegrationError, IntegratorConfig, integrate
from .model import (
    ChemostatParams,
    InvalidParameterError,
    ReducedParams,
    SystemKind,
    H_function,
    xi_plus,
)
from .sampling import DEFAULT_SEED
from .svg import Series, line_plot
from .sweep import SweepSpec, diff_sweeps, kind_sequence, run_sweep, transitions, write_sweep

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REDUCED_KEYS = ("eps", "beta", "mu", "lambda")
CHEMOSTAT_KEYS = ("C", "D", "a", "b", "m", "A", "B", "M")
FORMATS = ("csv", "json", "svg")


class UsageError(Exception):
    """Bad flags or configuration; reported with exit code 2."""


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _formats(text: str) -> list[str]:
    out = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in out if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="key=value parameter file; flags override it")
    g.add_argument("--out", help="output directory (default: current directory)")
    g.add_argument("--format", type=_formats, help="comma-separated subset of csv,json,svg")
    g.add_argument("--seed", type=int, help=f"seed for randomized suites (default {DEFAULT_SEED})")
    g.add_argument("--workers", type=int, help="worker processes (default 1)")
    g.add_argument("--rel-tol", type=float, help="integrator relative tolerance")
    g.add_argument("--abs-tol", type=float, help="integrator absolute tolerance")


def _reduced(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("reduced parameters")
    g.add_argument("--eps", type=float, help="epsilon >= 0 (0 gives the classical system)")
    g.add_argument("--beta", type=float, help="beta >= 0")
    g.add_argument("--mu", type=float, help="mu > 0")
    g.add_argument("--lambda", dest="lam", help="lambda > 0, or 'xi_plus' for the Hopf threshold")


def _chemostat(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("chemostat parameters")
    for key in CHEMOSTAT_KEYS:
        g.add_argument(f"--{key}", dest=f"p_{key}", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemopp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate one system and write the trajectory")
    s.add_argument("--system", choices=[k.value for k in SystemKind], help="default: reduced")
    _reduced(s)
    _chemostat(s)
    s.add_argument("--xi0", type=float)
    s.add_argument("--eta0", type=float)
    s.add_argument("--s0", type=float)
    s.add_argument("--x0", type=float)
    s.add_argument("--y0", type=float)
    s.add_argument("--t", type=float, help="final time")
    _common(s)

    a = sub.add_parser("analyze", help="equilibria, threshold and predicted regime")
    _reduced(a)
    a.add_argument("--verify", action="store_true", help="also run the certificates for this point")
    _common(a)

    w = sub.add_parser("sweep", help="bifurcation diagram over one reduced parameter")
    _reduced(w)
    w.add_argument("--param", choices=["lambda", "epsilon", "beta", "mu"])
    w.add_argument("--lo", type=float)
    w.add_argument("--hi", type=float)
    w.add_argument("--n", type=int, help="number of grid points")
    w.add_argument("--transient", type=float)
    w.add_argument("--sample", type=float)
    w.add_argument("--no-certify", action="store_true", help="skip per-point theorem checks")
    w.add_argument("--compare-eps0", action="store_true", help="overlay the same sweep at epsilon = 0")
    _common(w)

    v = sub.add_parser("verify", help="run the theorem-check suite")
    _reduced(v)
    v.add_argument("--only", help=f"comma-separated subset of {','.join(CHECKS)}")
    v.add_argument("--tol", type=float, help="override every check tolerance (warns when looser)")
    v.add_argument("--lambda-below-threshold", action="store_true",
                   help="draw certificate parameters with lambda < xi_plus")
    v.add_argument("--expect-certificate-fail", action="store_true",
                   help="certificate check passes only if every certificate fails")
    _common(v)
    return ap


def read_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value, got {line!r}")
            key, value = (t.strip() for t in line.split("=", 1))
            out[key] = value
    return out


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, config: dict[str, str]) -> None:
    """Fill options that were not given on the command line from ``config``."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    by_key = {}
    for action in sp._actions:
        for opt in action.option_strings:
            name = opt.lstrip("-")
            by_key[name] = action
            by_key[name.replace("-", "_")] = action
    for key, raw in config.items():
        action = by_key.get(key)
        if action is None or action.dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, action.dest) not in (None, False):
            continue  # flag wins
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        setattr(args, action.dest, value)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require(args, names: dict[str, str]) -> None:
    missing = [flag for dest, flag in names.items() if getattr(args, dest) is None]
    if missing:
        raise UsageError("missing required " + ", ".join(missing))


def _reduced_params(args, require_lambda: bool = True, default_lambda: float | None = None) -> ReducedParams:
    names = {"eps": "--eps", "beta": "--beta", "mu": "--mu"}
    if require_lambda:
        names["lam"] = "--lambda"
    _require(args, names)
    lam_raw = args.lam if args.lam is not None else default_lambda
    base = ReducedParams(args.eps, args.beta, args.mu, 0.5)
    if isinstance(lam_raw, str) and lam_raw.strip().lower() in ("xi_plus", "xi+", "xiplus"):
        lam = xi_plus(base)
        if not lam > 0:
            raise InvalidParameterError("lambda = xi_plus needs beta > 1 + epsilon (xi_plus > 0)")
    else:
        try:
            lam = float(lam_raw)
        except (TypeError, ValueError):
            raise UsageError(f"--lambda expects a number or 'xi_plus', got {lam_raw!r}") from None
    return base.replace(lam=lam)


def _config_from(args, default: IntegratorConfig) -> IntegratorConfig:
    changes = {}
    if args.rel_tol is not None:
        changes["rel_tol"] = args.rel_tol
    if args.abs_tol is not None:
        changes["abs_tol"] = args.abs_tol
    try:
        return replace(default, **changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> str:
    path = args.out or "."
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory {path!r} is not writable")
    return path


def _header(args, params: dict, config: IntegratorConfig | None) -> dict:
    head = {"command": args.command, "version": __version__, "params": json.dumps(params),
            "seed": args.seed if args.seed is not None else DEFAULT_SEED}
    if config is not None:
        head["rel_tol"] = config.rel_tol
        head["abs_tol"] = config.abs_tol
    return head


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    kind = SystemKind(args.system or "reduced")
    _require(args, {"t": "--t"})
    if not args.t > 0:
        raise UsageError("--t must be > 0")
    if kind.reduced:
        params = _reduced_params(args)
        _require(args, {"xi0": "--xi0", "eta0": "--eta0"})
        y0 = [args.xi0, args.eta0]
        names = ["xi", "eta"]
        pdict = params.as_dict()
    else:
        _require(args, {f"p_{k}": f"--{k}" for k in CHEMOSTAT_KEYS})
        params = ChemostatParams(*(getattr(args, f"p_{k}") for k in CHEMOSTAT_KEYS))
        if kind is SystemKind.CHEMOSTAT_3D:
            _require(args, {"s0": "--s0", "x0": "--x0", "y0": "--y0"})
            y0, names = [args.s0, args.x0, args.y0], ["s", "x", "y"]
        else:
            _require(args, {"x0": "--x0", "y0": "--y0"})
            y0, names = [args.x0, args.y0], ["x", "y"]
        pdict = params.as_dict()
    if any(not (math.isfinite(v) and v >= 0) for v in y0):
        raise InvalidParameterError("initial state must be finite and non-negative")
    config = _config_from(args, VERIFY_CONFIG)
    formats = args.format or ["csv", "svg"]
    out = _out_dir(args)
    traj = integrate(kind, params, y0, (0.0, args.t), config)
    header = _header(args, pdict, config)
    header["system"] = kind.value
    header["state0"] = json.dumps([float(v) for v in y0])
    extra = {"H": lambda y: H_function(params, y)} if kind is SystemKind.CHEMOSTAT_3D else None
    written = []
    if "csv" in formats:
        path = os.path.join(out, "trajectory.csv")
        traj.to_csv(path, names, extra, header)
        written.append(path)
    if "json" in formats:
        path = os.path.join(out, "trajectory.json")
        _write_json(path, {**header, "params": pdict, "names": names, "t": traj.times,
                           "states": traj.states, "truncated": traj.truncated})
        written.append(path)
    if "svg" in formats:
        path = os.path.join(out, "trajectory.svg")
        i, j = (0, 1) if kind.reduced or kind is not SystemKind.CHEMOSTAT_3D else (1, 2)
        svg = line_plot([Series("trajectory", traj.states[:, i], traj.states[:, j])],
                        xlabel=names[i], ylabel=names[j], title=f"{kind.value} phase portrait",
                        metadata=header)
        with open(path, "w") as fh:
            fh.write(svg)
        written.append(path)
    final = ", ".join(f"{n}={v:.10g}" for n, v in zip(names, traj.final_state))
    print(f"integrated {kind.value} to t={traj.t_final:g} in {len(traj) - 1} steps; final {final}")
    for path in written:
        print(f"wrote {path}")
    if traj.truncated:
        print("warning: step budget exhausted before the final time", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_analyze(args) -> int:
    params = _reduced_params(args)
    config = _config_from(args, VERIFY_CONFIG)
    report = {
        **_header(args, params.as_dict(), config),
        "params": params.as_dict(),
        "xi_plus": xi_plus(params),
        "theta": certificate_theta(params),
        "predicted_regime": predicted_regime(params),
        "equilibria": [r.to_dict() for r in find_equilibria(params)],
    }
    if params.lam < xi_plus(params):
        report["cycle"] = find_limit_cycle(params, config).to_dict()
    status = EXIT_OK
    if args.verify:
        results = check_point(params, config)
        report["checks"] = [r.to_dict() for r in results]
        for r in results:
            print(r.line())
        if not all(r.passed for r in results):
            status = EXIT_FAIL
    formats = args.format or ["json"]
    if "json" in formats or args.out:
        path = os.path.join(_out_dir(args), "analysis.json")
        _write_json(path, report)
        print(f"wrote {path}")
    print(f"regime: {report['predicted_regime']} (xi_plus = {report['xi_plus']:.12g}, "
          f"lambda = {params.lam:.12g})")
    for e in report["equilibria"]:
        print(f"  {e['name']:9s} {tuple(round(v, 10) for v in e['location'])}: {e['classification']}")
    if "cycle" in report:
        c = report["cycle"]
        print(f"  limit cycle: eta* = {c['eta_star']:.10g}, period = {c['period']:.6g}, "
              f"amplitude = {c['amplitude']:.6g}, slope = {c['slope']:.6g}")
    return status


def _sweep_svg(records, other, param, header) -> str:
    def series(recs, tag, dashed):
        x = np.array([r.param_value for r in recs])
        eq = np.array([r.xi_eq for r in recs])
        lo = np.array([r.cycle_xi_min for r in recs])
        hi = np.array([r.cycle_xi_max for r in recs])
        return [Series(f"xi_eq{tag}", x, eq, dashed=dashed),
                Series(f"cycle_xi_min{tag}", x, lo, color="#d62728", dashed=dashed),
                Series(f"cycle_xi_max{tag}", x, hi, color="#d62728", dashed=dashed)]
    items = series(records, "", False)
    if other is not None:
        items += series(other, " (eps=0)", True)
    return line_plot(items, xlabel=param, ylabel="xi", title="attractor diagram", metadata=header)


def cmd_sweep(args) -> int:
    param = args.param or "lambda"
    base = _reduced_params(args, require_lambda=param != "lambda", default_lambda=0.5)
    config = _config_from(args, SWEEP_CONFIG)
    try:
        spec = SweepSpec(base, param,
                         0.01 if args.lo is None else args.lo,
                         1.5 if args.hi is None else args.hi,
                         50 if args.n is None else args.n, config,
                         500.0 if args.transient is None else args.transient,
                         200.0 if args.sample is None else args.sample,
                         certify=not args.no_certify)
    except ValueError as exc:
        raise UsageError(f"invalid sweep: {exc}") from None
    workers = args.workers or 1
    out = _out_dir(args)
    formats = args.format or ["csv", "json", "svg"]
    records = run_sweep(spec, workers)
    header = _header(args, base.as_dict(), config)
    header["sweep"] = f"{param} in [{spec.lo!r}, {spec.hi!r}], {spec.n_points} points"
    header["sequence"] = " | ".join(kind_sequence(records))
    write_sweep(records, spec, os.path.join(out, "sweep.csv"), os.path.join(out, "sweep.json"), header)
    written = [os.path.join(out, "sweep.csv"), os.path.join(out, "sweep.json")]
    other = None
    if args.compare_eps0:
        spec0 = replace(spec, base=base.replace(epsilon=0.0))
        other = run_sweep(spec0, workers)
        h0 = {**header, "params": json.dumps(spec0.base.as_dict()),
              "sequence": " | ".join(kind_sequence(other))}
        write_sweep(other, spec0, os.path.join(out, "sweep_eps0.csv"), os.path.join(out, "sweep_eps0.json"), h0)
        diff = diff_sweeps(records, other)
        path = os.path.join(out, "sweep_diff.json")
        _write_json(path, {**header, "diff": diff.to_dict()})
        written += [os.path.join(out, "sweep_eps0.csv"), os.path.join(out, "sweep_eps0.json"), path]
    if "svg" in formats:
        path = os.path.join(out, "sweep.svg")
        with open(path, "w") as fh:
            fh.write(_sweep_svg(records, other, param, header))
        written.append(path)
    print(f"sequence: {header['sequence']}")
    for k0, k1, a, b in transitions(records):
        print(f"  {k0} -> {k1} between {param} = {a:.6g} and {b:.6g}")
    if other is not None:
        print(f"eps=0 sequence: {' | '.join(kind_sequence(other))}")
    flagged = [r for r in records if r.flags]
    if flagged:
        print(f"{len(flagged)} point(s) flagged (see the flags column)")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _config_from(args, VERIFY_CONFIG)
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    given = [args.eps, args.beta, args.mu, args.lam]
    if any(v is not None for v in given):
        params = _reduced_params(args)
        results = check_point(params, config, args.tol)
        pdict = params.as_dict()
    else:
        names = None if not args.only else [n.strip() for n in args.only.split(",") if n.strip()]
        if names and any(n not in CHECKS for n in names):
            raise UsageError(f"--only accepts {','.join(CHECKS)}")
        results = run_checks(names, seed, args.tol, config, args.workers or 1,
                             below_threshold=args.lambda_below_threshold,
                             expect_fail=args.expect_certificate_fail)
        pdict = {"suite": "random draws", "seed": seed}
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width + 4}} result")
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        num = f"{r.criterion:>2}." if r.criterion is not None else "   "
        print(f"{num} {r.name:<{width}} {tag}  {r.detail}")
        for w in r.warnings:
            print(f"    warning: {w}", file=sys.stderr)
        if not r.passed and r.witness is not None:
            print(f"    witness: {json.dumps(_jsonable(r.witness))}")
    ok = all(r.passed for r in results)
    if args.out or (args.format and "json" in args.format):
        path = os.path.join(_out_dir(args), "verify.json")
        _write_json(path, {**_header(args, pdict, config), "passed": ok,
                           "checks": [r.to_dict() for r in results]})
        print(f"wrote {path}")
    print("all checks passed" if ok else f"{sum(not r.passed for r in results)} check(s) failed")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on usage errors
    try:
        if args.config:
            apply_config(parser, args, read_config(args.config))
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"{parser.prog} {args.command}: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"{parser.prog} {args.command}: integration failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
