"""Dormand-Prince integrator: accuracy, dense output, events and serialization."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from chemopp.integrator import (
    VERIFY_CONFIG,
    Event,
    IntegrationError,
    IntegratorConfig,
    NoReturnError,
    integrate,
    poincare_return,
    solve,
)
from chemopp.model import ReducedParams, SystemKind, reduced_field, structural_functions

OSC = lambda t, y: np.array([y[1], -y[0]])


def test_fixed_step_convergence_order():
    # a huge tolerance accepts every step, so max_step fixes h
    errs = []
    exact = np.array([math.cos(5.0), -math.sin(5.0)])
    for h in (0.2, 0.1, 0.05):
        cfg = IntegratorConfig(rel_tol=1e6, abs_tol=1e6, max_step=h)
        traj = solve(OSC, (0.0, 5.0), [1.0, 0.0], cfg, first_step=h)
        assert len(traj) == round(5.0 / h) + 1
        errs.append(np.max(np.abs(traj.final_state - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(4.8 < q < 5.2 for q in orders), orders


def test_tolerance_proportionality():
    errs = []
    for tol in (1e-6, 1e-9):
        traj = solve(OSC, (0.0, 20.0), [1.0, 0.0], IntegratorConfig(rel_tol=tol, abs_tol=tol))
        errs.append(np.max(np.abs(traj.states[:, 0] - np.cos(traj.times))))
    assert errs[1] < 1e-7 and errs[0] / errs[1] > 100


def test_linear_system_against_matrix_exponential():
    A = np.array([[-0.5, 2.0, 0.0], [-2.0, -0.5, 0.3], [0.0, 0.0, -1.0]])
    y0 = np.array([1.0, -0.5, 2.0])
    traj = solve(lambda t, y: A @ y, (0.0, 10.0), y0, IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14))
    for t in (1.0, 3.7, 10.0):
        np.testing.assert_allclose(traj(t), expm(A * t) @ y0, rtol=1e-8, atol=1e-12)


def test_time_reversal_returns_to_start():
    p = ReducedParams(1.0, 4.0, 1.0, 0.3)
    rhs = lambda t, y: reduced_field(p, y)
    fwd = solve(rhs, (0.0, 20.0), [0.5, 0.5], VERIFY_CONFIG)
    back = solve(rhs, (20.0, 0.0), fwd.final_state, VERIFY_CONFIG)
    assert back.t_final == 0.0
    np.testing.assert_allclose(back.final_state, [0.5, 0.5], rtol=1e-7)


def test_dense_output_is_exact_at_nodes_and_accurate_between():
    traj = solve(OSC, (0.0, 10.0), [1.0, 0.0], IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12))
    np.testing.assert_array_equal(traj(traj.times), traj.states)
    mids = 0.5 * (traj.times[1:] + traj.times[:-1])
    np.testing.assert_allclose(traj(mids)[:, 0], np.cos(mids), atol=1e-8)
    assert traj(2.5).shape == (2,)
    with pytest.raises(ValueError):
        traj(10.5)


def test_backward_dense_output():
    traj = solve(OSC, (3.0, 0.0), [math.cos(3.0), -math.sin(3.0)], IntegratorConfig(1e-10, 1e-12))
    np.testing.assert_allclose(traj([2.0, 0.5])[:, 0], np.cos([2.0, 0.5]), atol=1e-8)


def test_events_locate_zero_crossings():
    ev_down = Event(lambda t, y: y[0], direction=-1, id="down")
    ev_any = Event(lambda t, y: y[1], direction=0, id="any")
    traj = solve(OSC, (0.0, 10.0), [1.0, 0.0], IntegratorConfig(1e-10, 1e-12), [ev_down, ev_any])
    down = [r.time for r in traj.events if r.event_id == "down"]
    np.testing.assert_allclose(down, [math.pi / 2, 5 * math.pi / 2], atol=1e-9)
    anyx = [r for r in traj.events if r.event_id == "any"]
    np.testing.assert_allclose([r.time for r in anyx], [math.pi, 2 * math.pi, 3 * math.pi], atol=1e-9)
    assert [r.direction for r in anyx] == [1, -1, 1]
    assert all(abs(r.state[1]) <= 1e-12 for r in anyx)


def test_terminal_event_stops_integration():
    ev = Event(lambda t, y: y[0] - 0.5, direction=-1, terminal=True)
    traj = solve(OSC, (0.0, 10.0), [1.0, 0.0], IntegratorConfig(1e-12, 1e-14), [ev])
    assert traj.t_final == pytest.approx(math.acos(0.5), abs=1e-10)
    assert traj.final_state[0] == pytest.approx(0.5, abs=1e-12)
    assert len(traj.events) == 1


def test_positivity_on_relaxation_cycle():
    # orbits of this cycle pass within about 1e-12 of the xi axis
    p = ReducedParams(1.0, 4.0, 1.0, 0.01)
    traj = integrate(SystemKind.REDUCED_COUPLED, p, [0.5, 0.5], (0.0, 2000.0))
    assert traj.states.min() > 0
    assert traj.states[:, 0].min() < 1e-9


def test_batched_solve_matches_single_solves():
    p = ReducedParams(0.5, 3.0, 1.5, 0.4)
    rhs = lambda t, y: reduced_field(p, y)
    starts = np.array([[0.1, 0.8, 1.2], [0.3, 0.2, 1.0]])
    batch = solve(rhs, (0.0, 50.0), starts, VERIFY_CONFIG)
    for j in range(3):
        single = solve(rhs, (0.0, 50.0), starts[:, j], VERIFY_CONFIG)
        np.testing.assert_allclose(batch.final_state[:, j], single.final_state, rtol=1e-7)


def test_step_budget_truncates():
    traj = solve(OSC, (0.0, 100.0), [1.0, 0.0], IntegratorConfig(max_steps=5))
    assert traj.truncated and len(traj) == 6 and traj.t_final < 100.0


def test_non_finite_derivative_raises():
    with pytest.raises(IntegrationError):
        solve(lambda t, y: np.array([math.nan]), (0.0, 1.0), [1.0])
    with pytest.raises(ValueError):
        solve(OSC, (1.0, 1.0), [1.0, 0.0])


def test_blow_up_reports_underflow():
    with pytest.raises(IntegrationError) as info:
        solve(lambda t, y: y**2, (0.0, 2.0), [1.0])
    assert info.value.t == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("kw", [{"rel_tol": 0.0}, {"abs_tol": -1.0}, {"max_steps": 0}, {"event_tol": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_config_scaled():
    c = VERIFY_CONFIG.scaled(10.0)
    assert c.rel_tol == pytest.approx(1e-8) and c.event_tol == VERIFY_CONFIG.event_tol


def test_integrate_checks_dimension():
    with pytest.raises(ValueError):
        integrate(SystemKind.REDUCED_COUPLED, ReducedParams(1, 4, 1, 0.5), [0.5, 0.5, 0.5], (0, 1))


def test_poincare_return_basics():
    p = ReducedParams(1.0, 4.0, 1.0, 0.5)
    _, F, _ = structural_functions(p)
    F_lam = float(F(p.lam))
    assert poincare_return(p, F_lam) == (F_lam, None)
    eta1, period = poincare_return(p, 0.5 * F_lam)
    # stable focus: the return moves towards F(lambda)
    assert 0.5 * F_lam < eta1 < F_lam and period > 0
    with pytest.raises(ValueError):
        poincare_return(p.replace(lam=1.5), 0.3)
    with pytest.raises(ValueError):
        poincare_return(p, -1.0)


def test_poincare_no_return_raises():
    p = ReducedParams(1.0, 4.0, 1.0, 0.5)
    with pytest.raises(NoReturnError):
        poincare_return(p, 0.3, t_max=1.0)


def test_csv_round_trip(tmp_path):
    traj = solve(OSC, (0.0, 1.0), [1.0, 0.0], VERIFY_CONFIG)
    path = tmp_path / "t.csv"
    traj.to_csv(path, ["u", "v"], {"energy": lambda y: y[0] ** 2 + y[1] ** 2}, {"params": "{}", "seed": 7})
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# params: {}", "# seed: 7", "t,u,v,energy"]
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    np.testing.assert_array_equal(data[:, 0], traj.times)
    np.testing.assert_array_equal(data[:, 1:3], traj.states)
