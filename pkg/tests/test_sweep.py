"""Parameter sweeps: specification, classification, determinism and diffs."""

import math

import numpy as np
import pytest

from chemopp.model import InvalidParameterError, ReducedParams, xi_plus
from chemopp.sweep import (
    CSV_COLUMNS,
    SweepRecord,
    SweepSpec,
    classify_point,
    diff_sweeps,
    kind_sequence,
    predicted_kind,
    read_sweep_csv,
    run_sweep,
    transitions,
    write_sweep,
)

BASE = ReducedParams(1.0, 4.0, 1.0, 0.5)
SMALL = SweepSpec(BASE, "lambda", 0.05, 1.4, 6, transient=300.0, sample=150.0)


def test_spec_validation():
    with pytest.raises(ValueError, match="empty range"):
        SweepSpec(BASE, lo=0.5, hi=0.5, n_points=10)
    with pytest.raises(ValueError, match="empty range"):
        SweepSpec(BASE, lo=0.9, hi=0.1)
    with pytest.raises(ValueError, match="cannot sweep"):
        SweepSpec(BASE, param="gamma")
    with pytest.raises(ValueError):
        SweepSpec(BASE, n_points=0)
    with pytest.raises(InvalidParameterError):
        SweepSpec(BASE, param="mu", lo=-1.0, hi=1.0)


def test_single_point_spec():
    spec = SweepSpec(BASE, lo=0.3, hi=0.3, n_points=1)
    assert spec.values.tolist() == [0.3] and spec.step == 0.0
    with pytest.raises(ValueError):
        SweepSpec(BASE, lo=0.3, hi=0.4, n_points=1)


def test_spec_values_and_params():
    spec = SweepSpec(BASE, "beta", 2.0, 6.0, 5)
    assert spec.values.tolist() == [2.0, 3.0, 4.0, 5.0, 6.0]
    assert spec.params_at(3.0) == BASE.replace(beta=3.0)
    assert spec.to_dict()["param"] == "beta"


def test_predicted_kind():
    assert predicted_kind(BASE.replace(lam=1.2)) == "boundary-equilibrium"
    assert predicted_kind(BASE.replace(lam=xi_plus(BASE))) == "interior-equilibrium"
    assert predicted_kind(BASE.replace(lam=0.05)) == "limit-cycle"


@pytest.mark.parametrize("lam, kind", [(1.5, "boundary-equilibrium"), (0.5, "interior-equilibrium"),
                                       (0.05, "limit-cycle")])
def test_classify_point_known_regimes(lam, kind):
    rec = classify_point(BASE.replace(lam=lam))
    assert rec.kind == kind and not rec.discrepant
    if kind == "limit-cycle":
        # frozen reference amplitude for (1, 4, 1, 0.05)
        assert rec.amplitude == pytest.approx(0.14815276109380968, rel=1e-4)
        assert rec.period == pytest.approx(38.682781937972344, rel=1e-4)
        assert rec.certificate == "uniqueness:pass"
    elif kind == "interior-equilibrium":
        assert (rec.xi_eq, rec.certificate) == (0.5, "global-stability:pass")
    else:
        assert (rec.xi_eq, rec.eta_eq, rec.amplitude) == (1.0, 0.0, 0.0)


def test_sweep_is_deterministic_and_ordered():
    a = run_sweep(SMALL)
    b = run_sweep(SMALL)
    assert [r.csv_row() for r in a] == [r.csv_row() for r in b]
    assert [r.param_value for r in a] == SMALL.values.tolist()
    assert kind_sequence(a) == ["limit-cycle", "interior-equilibrium", "boundary-equilibrium"]
    t = transitions(a)
    assert len(t) == 2 and t[0][2] < xi_plus(BASE) <= t[0][3] and t[1][2] < 1.0 <= t[1][3]


def test_workers_give_identical_results():
    # records hold NaN fields, so compare their exact serialized form
    rows = lambda recs: [r.csv_row() + [r.certificate] for r in recs]
    assert rows(run_sweep(SMALL, workers=2)) == rows(run_sweep(SMALL, workers=1))


def test_diff_sweeps():
    a = run_sweep(SMALL)
    d = diff_sweeps(a, list(a))
    assert d.empty and d.pattern_equal
    b = list(a)
    b[0] = SweepRecord("lambda", a[0].param_value, "interior-equilibrium")
    d = diff_sweeps(a, b)
    assert not d.empty and d.rows[0]["kind_b"] == "interior-equilibrium" and not d.pattern_equal
    assert d.to_dict()["pattern_equal"] is False
    with pytest.raises(ValueError):
        diff_sweeps(a, a[:-1])
    with pytest.raises(ValueError):
        diff_sweeps(a, run_sweep(SweepSpec(BASE, "lambda", 0.05, 1.3, 6, transient=300.0, sample=150.0)))


def test_eps_zero_sweep_keeps_pattern():
    classical = SweepSpec(BASE.replace(epsilon=0.0), "lambda", 0.05, 1.4, 6, transient=300.0, sample=150.0)
    d = diff_sweeps(run_sweep(SMALL), run_sweep(classical))
    assert d.pattern_equal


def test_csv_round_trip(tmp_path):
    recs = run_sweep(SMALL)
    csv_path, json_path = tmp_path / "s.csv", tmp_path / "s.json"
    write_sweep(recs, SMALL, csv_path, json_path, {"command": "sweep", "seed": 1})
    lines = csv_path.read_text().splitlines()
    assert lines[:3] == ["# command: sweep", "# seed: 1", ",".join(CSV_COLUMNS)]
    back = read_sweep_csv(csv_path)
    assert len(back) == len(recs)
    for r, s in zip(recs, back):
        assert (r.param_value, r.kind, r.flags) == (s.param_value, s.kind, s.flags)
        for name in ("xi_eq", "eta_eq", "cycle_xi_min", "cycle_xi_max", "period"):
            x, y = getattr(r, name), getattr(s, name)
            assert (math.isnan(x) and math.isnan(y)) or x == y
    assert '"param": "lambda"' in json_path.read_text()
