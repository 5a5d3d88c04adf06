"""Model layer: vector fields, reparametrization and isocline structure."""

import math
import re
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import bisect, minimize_scalar

from chemopp.model import (
    ChemostatParams,
    InvalidParameterError,
    ReducedParams,
    SystemKind,
    F_prime,
    F_prime_factored,
    F_prime_numerator,
    H_function,
    chemostat_field,
    classical_reduced_field,
    f_prime,
    growth_h,
    growth_h_argmax,
    isocline_field,
    logistic_field,
    psi_prime,
    reduced_field,
    reparametrize,
    rhs_for,
    structural_functions,
    surface_field,
    vector_field,
    xi_plus,
    xi_roots,
)

BASE = ChemostatParams(C=2, D=1, a=1, b=0.1, m=1, A=1, B=0.1, M=2)

reduced = st.builds(
    ReducedParams,
    epsilon=st.floats(0.0, 3.0),
    beta=st.floats(0.0, 15.0),
    mu=st.floats(0.05, 5.0),
    lam=st.floats(0.005, 2.0),
)
unit = st.floats(0.001, 1.0)


def test_chemostat_field_exact_rationals():
    # independent evaluation in exact arithmetic
    C, D, a, b, m, A, B, M = (Fraction(v) for v in ("2", "1", "1", "1/10", "1", "1", "1/10", "2"))
    s = x = y = Fraction(1)
    uptake = a * x * s / (1 + a * b * s)
    pred = A * x * y / (1 + A * B * x)
    exact = [C * D - D * s - uptake, m * uptake - D * x - pred, M * pred - D * y]
    assert exact == [Fraction(1, 11), Fraction(-1), Fraction(9, 11)]
    got = chemostat_field(BASE, np.array([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(got, [float(v) for v in exact], rtol=1e-15, atol=1e-15)


def test_reparametrize_worked_example():
    rp, sc = reparametrize(BASE)
    assert rp.epsilon == pytest.approx(0.5, rel=1e-15)
    assert rp.beta == pytest.approx(0.1, rel=1e-15)
    assert rp.mu == pytest.approx(1.9, rel=1e-15)
    assert rp.lam == pytest.approx(1 / 1.9, rel=1e-15)
    assert sc == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("changes, needle", [
    ({"C": 0.5, "D": 1.0}, "a*m*C - D > 0"),
    ({"M": 0.05, "B": 0.5}, "M - B*D > 0"),
])
def test_reparametrize_rejects_with_named_invariant(changes, needle):
    kw = BASE.__dict__ | changes
    with pytest.raises(InvalidParameterError, match=re.escape(needle)):
        reparametrize(ChemostatParams(**kw))


@pytest.mark.parametrize("kw", [{"D": 0.0}, {"C": -1.0}, {"b": -0.1}, {"M": math.nan}])
def test_chemostat_params_validation(kw):
    with pytest.raises(InvalidParameterError):
        ChemostatParams(**(BASE.__dict__ | kw))


@pytest.mark.parametrize("kw", [{"mu": 0.0}, {"lam": 0.0}, {"epsilon": -1e-3}, {"beta": math.inf}])
def test_reduced_params_validation(kw):
    base = dict(epsilon=1.0, beta=4.0, mu=1.0, lam=0.5)
    with pytest.raises(InvalidParameterError):
        ReducedParams(**(base | kw))


def test_reduced_params_replace_and_dict():
    p = ReducedParams(1.0, 4.0, 1.0, 0.5)
    q = p.replace(**{"lambda": 0.25})
    assert q.lam == 0.25 and p.lam == 0.5
    assert q.as_dict() == {"epsilon": 1.0, "beta": 4.0, "mu": 1.0, "lambda": 0.25}


def test_vector_field_dimension_and_type_errors():
    with pytest.raises(ValueError):
        vector_field(SystemKind.CHEMOSTAT_3D, BASE, [1.0, 1.0])
    with pytest.raises(TypeError):
        vector_field(SystemKind.REDUCED_COUPLED, BASE, [0.5, 0.5])
    with pytest.raises(TypeError):
        vector_field(SystemKind.SURFACE_EXACT, ReducedParams(1, 4, 1, 0.5), [0.5, 0.5])


def test_rhs_for_matches_vector_field():
    rp = ReducedParams(1, 4, 1, 0.3)
    for kind, params, y in [(SystemKind.REDUCED_COUPLED, rp, [0.4, 0.6]),
                            (SystemKind.CHEMOSTAT_3D, BASE, [1.0, 0.5, 0.3]),
                            (SystemKind.SURFACE_EXACT, BASE, [0.5, 0.3]),
                            (SystemKind.LOGISTIC_COUPLED, BASE, [0.5, 0.3]),
                            (SystemKind.LOGISTIC_CLASSICAL, BASE, [0.5, 0.3])]:
        np.testing.assert_array_equal(rhs_for(kind, params)(0.0, np.array(y)), vector_field(kind, params, y))


def test_batched_states():
    rp = ReducedParams(0.7, 3.0, 1.2, 0.3)
    pts = np.array([[0.1, 0.5, 0.9], [0.2, 0.4, 1.5]])
    batch = reduced_field(rp, pts)
    for j in range(3):
        np.testing.assert_allclose(batch[:, j], reduced_field(rp, pts[:, j]), rtol=0, atol=0)


@settings(max_examples=60, deadline=None)
@given(s=st.floats(0.01, 3), x=st.floats(0.01, 3), y=st.floats(0.01, 3))
def test_H_derivative_is_minus_D_H(s, x, y):
    p = BASE
    ds, dx, dy = chemostat_field(p, np.array([s, x, y]))
    dH = p.m * ds + dx + dy / p.M
    H = H_function(p, [s, x, y])
    assert dH == pytest.approx(-p.D * H, abs=1e-12 * (1 + abs(s) + abs(x) + abs(y)))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.01, 1.0), y=st.floats(0.01, 1.0))
def test_surface_field_is_restriction_of_chemostat(x, y):
    p = BASE
    s = p.C - (x + y / p.M) / p.m
    full = chemostat_field(p, np.array([s, x, y]))
    np.testing.assert_allclose(surface_field(p, np.array([x, y])), full[1:], rtol=1e-12, atol=1e-14)


def test_classical_logistic_drops_the_coupling_term():
    p = BASE
    z = np.array([0.4, 0.7])
    diff = logistic_field(p, z, coupled=True) - logistic_field(p, z, coupled=False)
    np.testing.assert_allclose(diff, [-p.a * z[0] * z[1] / p.M, 0.0], rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(0, 10), mu=st.floats(0.1, 3), lam=st.floats(0.01, 1.5), xi=unit, eta=unit)
def test_eps_zero_is_classical(beta, mu, lam, xi, eta):
    p = ReducedParams(0.0, beta, mu, lam)
    np.testing.assert_allclose(reduced_field(p, [xi, eta]), classical_reduced_field(beta, mu, lam, [xi, eta]),
                               rtol=1e-14, atol=1e-16)


@settings(max_examples=100, deadline=None)
@given(p=reduced, xi=unit, eta=st.floats(0.001, 3.0))
def test_isocline_form_equals_reduced_field(p, xi, eta):
    np.testing.assert_allclose(isocline_field(p, [xi, eta]), reduced_field(p, [xi, eta]),
                               rtol=1e-12, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(p=reduced, xi=st.floats(0.01, 0.99))
def test_derivatives_match_finite_differences(p, xi):
    f, F, psi = structural_functions(p)
    h = 1e-6
    fd = lambda g: (g(xi + h) - g(xi - h)) / (2 * h)
    assert f_prime(p, xi) == pytest.approx(fd(f), rel=1e-6, abs=1e-8)
    assert psi_prime(p, xi) == pytest.approx(fd(psi), rel=1e-6, abs=1e-8)
    assert F_prime(p, xi) == pytest.approx(fd(F), rel=1e-6, abs=1e-7)


def test_F_prime_at_zero():
    assert F_prime(ReducedParams(1.0, 4.0, 1.0, 0.5), 0.0) == 0.5


def test_xi_plus_closed_form_against_bisection():
    p = ReducedParams(1.0, 4.0, 1.0, 0.5)
    root = bisect(lambda x: F_prime_numerator(p, x), 0.0, 1.0, xtol=1e-16)
    assert xi_plus(p) == pytest.approx((-2 + math.sqrt(6)) / 4, abs=1e-15)
    assert xi_plus(p) == pytest.approx(root, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(0.01, 3), beta=st.floats(0.1, 15))
def test_roots_are_zeros_of_numerator(eps, beta):
    p = ReducedParams(eps, beta, 1.0, 0.5)
    xp, xm = xi_roots(p)
    scale = beta + 1 + eps + 2 * beta * (1 + eps) * abs(xm) + beta**2 * eps * xm**2
    assert abs(F_prime_numerator(p, xp)) <= 1e-13 * (beta + 1 + eps)
    assert abs(F_prime_numerator(p, xm)) <= 1e-12 * scale
    assert xm < 0


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(0.05, 3), beta=st.floats(0.1, 15), xi=unit)
def test_factored_form(eps, beta, xi):
    p = ReducedParams(eps, beta, 1.0, 0.5)
    xp, xm = xi_roots(p)
    if abs(xi - 0.5 * (xp + xm)) < 1e-3:
        return
    assert F_prime_factored(p, xi) == pytest.approx(F_prime(p, xi), rel=1e-9, abs=1e-12)


def test_xi_plus_eps_zero_limit_and_clipping():
    assert xi_plus(ReducedParams(0.0, 2.0, 1.0, 0.5)) == 0.25
    assert xi_plus(ReducedParams(1e-6, 2.0, 1.0, 0.5)) == pytest.approx(0.25, abs=1e-5)
    assert xi_plus(ReducedParams(1.0, 1.5, 1.0, 0.5)) == 0.0
    assert xi_plus(ReducedParams(1.0, 0.0, 1.0, 0.5)) == 0.0
    assert xi_roots(ReducedParams(0.0, 0.0, 1.0, 0.5)) == (None, None)


def test_growth_h_argmax_against_grid():
    p = ChemostatParams(C=1, D=0.1, a=1, b=1, m=1, A=1, B=0.1, M=1)
    assert growth_h_argmax(p) == pytest.approx(2 / (2 + math.sqrt(2)), rel=1e-15)
    res = minimize_scalar(lambda x: -growth_h(p, x), bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    assert growth_h_argmax(p) == pytest.approx(res.x, abs=1e-8)
    with pytest.raises(ValueError):
        growth_h(p, -0.1)
    with pytest.raises(ValueError):
        growth_h(p, 2.0)  # at the asymptote m C + m / (a b)
