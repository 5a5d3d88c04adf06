"""Chemostat predator-prey model family.

Five right-hand sides are provided: the three-species chemostat, its exact
restriction to the invariant plane ``H = 0``, the logistic approximation with
and without the predator coupling term, and the dimensionless reduced system
in ``(xi, eta)``.  The reduced system is also available in isocline form
``xi' = f(xi) (F(xi) - eta)``, ``eta' = eta psi(xi)``.

Every vector field accepts a state of shape ``(dim,)`` or ``(dim, n)``; the
second form evaluates ``n`` states at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class InvalidParameterError(ValueError):
    """A parameter set violates one of the model's invariants."""


class SystemKind(enum.Enum):
    CHEMOSTAT_3D = "chemostat"
    SURFACE_EXACT = "surface"
    LOGISTIC_COUPLED = "logistic-coupled"
    LOGISTIC_CLASSICAL = "logistic-classical"
    REDUCED_COUPLED = "reduced"

    @property
    def dim(self) -> int:
        return 3 if self is SystemKind.CHEMOSTAT_3D else 2

    @property
    def reduced(self) -> bool:
        return self is SystemKind.REDUCED_COUPLED


@dataclass(frozen=True)
class ChemostatParams:
    """Dimensional parameters of the chemostat.

    ``C`` inflow concentration, ``D`` dilution rate, ``a``/``A`` search
    rates, ``b``/``B`` handling times and ``m``/``M`` conversion factors of
    prey and predator.  ``b = 0`` is allowed (unsaturated prey).
    """

    C: float
    D: float
    a: float
    b: float
    m: float
    A: float
    B: float
    M: float

    def __post_init__(self) -> None:
        for name in ("C", "D", "a", "m", "A", "B", "M"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be > 0, got {value!r}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise InvalidParameterError(f"b must be >= 0, got {self.b!r}")

    @property
    def growth_margin(self) -> float:
        """``amC - D``; positive when the prey can invade the empty chemostat."""
        return self.a * self.m * self.C - self.D

    @property
    def conversion_margin(self) -> float:
        """``M - BD``."""
        return self.M - self.B * self.D

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("C", "D", "a", "b", "m", "A", "B", "M")}


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless parameters ``(epsilon, beta, mu, lambda)``.

    ``epsilon = 0`` selects the classical system without the coupling term.
    """

    epsilon: float
    beta: float
    mu: float
    lam: float

    def __post_init__(self) -> None:
        for name, lower_ok in (("epsilon", True), ("beta", True), ("mu", False), ("lam", False)):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
            if value < 0 or (value == 0 and not lower_ok):
                op = ">=" if lower_ok else ">"
                raise InvalidParameterError(f"{name} must be {op} 0, got {value!r}")

    def replace(self, **changes: float) -> "ReducedParams":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        fields = {"epsilon": self.epsilon, "beta": self.beta, "mu": self.mu, "lam": self.lam}
        fields.update(changes)
        return ReducedParams(**fields)

    def as_dict(self) -> dict[str, float]:
        return {"epsilon": self.epsilon, "beta": self.beta, "mu": self.mu, "lambda": self.lam}


class ScaleFactors(NamedTuple):
    """Linear maps ``xi = x_scale * x``, ``eta = y_scale * y``, ``tau = time_scale * t``."""

    x_scale: float
    y_scale: float
    time_scale: float

    def to_reduced(self, x, y):
        return self.x_scale * np.asarray(x), self.y_scale * np.asarray(y)

    def from_reduced(self, xi, eta):
        return np.asarray(xi) / self.x_scale, np.asarray(eta) / self.y_scale


def reparametrize(params: ChemostatParams) -> tuple[ReducedParams, ScaleFactors]:
    """Map chemostat parameters to the reduced ``(epsilon, beta, mu, lambda)``.

    Raises :class:`InvalidParameterError` unless ``amC - D > 0`` and
    ``M - BD > 0``.
    """
    p = params
    k = p.growth_margin
    if not k > 0:
        raise InvalidParameterError(f"a*m*C - D > 0 violated (a*m*C - D = {k!r})")
    q = p.conversion_margin
    if not q > 0:
        raise InvalidParameterError(f"M - B*D > 0 violated (M - B*D = {q!r})")
    reduced = ReducedParams(
        epsilon=p.a / (p.M * p.A),
        beta=p.A * p.B * k / p.a,
        mu=p.A * q / p.a,
        lam=p.D * p.a / (p.A * k * q),
    )
    return reduced, ScaleFactors(p.a / k, p.A / k, k)


# ---------------------------------------------------------------------------
# invariant plane
# ---------------------------------------------------------------------------

def H_function(params: ChemostatParams, state) -> float:
    """``m s + x + y / M - m C``; decays like ``exp(-D t)`` along solutions."""
    s, x, y = state[0], state[1], state[2]
    return params.m * s + x + y / params.M - params.m * params.C


def growth_h(params: ChemostatParams, x):
    """Prey growth on the invariant plane in the absence of predators."""
    p = params
    x = np.asarray(x, dtype=float)
    bad = x < 0
    if p.b > 0:
        bad |= x >= p.m * p.C + p.m / (p.a * p.b)
    if np.any(bad):
        raise ValueError("x outside [0, mC + m/(ab))")
    w = p.m * p.C - x
    out = p.a * x * w / (1.0 + p.a * p.b / p.m * w)
    return float(out) if out.ndim == 0 else out


def growth_h_argmax(params: ChemostatParams) -> float:
    p = params
    r = 1.0 + p.a * p.b * p.C
    return p.m * p.C * r / (r + math.sqrt(r))


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

def chemostat_field(p: ChemostatParams, state):
    s, x, y = state[0], state[1], state[2]
    uptake = p.a * x * s / (1.0 + p.a * p.b * s)
    predation = p.A * x * y / (1.0 + p.A * p.B * x)
    return np.array([
        p.C * p.D - p.D * s - uptake,
        p.m * uptake - p.D * x - predation,
        p.M * predation - p.D * y,
    ])


def surface_field(p: ChemostatParams, state):
    x, y = state[0], state[1]
    w = p.m * p.C - x - y / p.M
    predation = p.A * x * y / (1.0 + p.A * p.B * x)
    return np.array([
        p.a * x * w / (1.0 + p.a * p.b / p.m * w) - p.D * x - predation,
        p.M * predation - p.D * y,
    ])


def logistic_field(p: ChemostatParams, state, coupled: bool = True):
    x, y = state[0], state[1]
    predation = p.A * x * y / (1.0 + p.A * p.B * x)
    dx = p.a * x * (p.m * p.C - x) - p.D * x - predation
    if coupled:
        dx = dx - p.a * x * y / p.M
    return np.array([dx, p.M * predation - p.D * y])


def reduced_field(p: ReducedParams, state):
    xi, eta = state[0], state[1]
    sat = 1.0 + p.beta * xi
    return np.array([
        xi * (1.0 - xi) - p.epsilon * xi * eta - xi * eta / sat,
        eta * p.mu * (xi - p.lam) / sat,
    ])


def classical_reduced_field(beta: float, mu: float, lam: float, state):
    """Reduced form of the logistic system without the coupling term."""
    xi, eta = state[0], state[1]
    sat = 1.0 + beta * xi
    return np.array([xi * (1.0 - xi) - xi * eta / sat, mu * eta * (xi - lam) / sat])


def isocline_field(p: ReducedParams, state):
    xi, eta = state[0], state[1]
    f, F, psi = structural_functions(p)
    return np.array([f(xi) * (F(xi) - eta), eta * psi(xi)])


def vector_field(kind: SystemKind, params, state):
    """Right-hand side of the system selected by ``kind``."""
    state = np.asarray(state, dtype=float)
    if state.shape[0] != kind.dim:
        raise ValueError(f"{kind.value} expects a state of dimension {kind.dim}, got {state.shape[0]}")
    if kind.reduced:
        if not isinstance(params, ReducedParams):
            raise TypeError("reduced system needs ReducedParams")
        return reduced_field(params, state)
    if not isinstance(params, ChemostatParams):
        raise TypeError(f"{kind.value} needs ChemostatParams")
    if kind is SystemKind.CHEMOSTAT_3D:
        return chemostat_field(params, state)
    if kind is SystemKind.SURFACE_EXACT:
        return surface_field(params, state)
    return logistic_field(params, state, coupled=kind is SystemKind.LOGISTIC_COUPLED)


def rhs_for(kind: SystemKind, params) -> Callable:
    """Bind ``params`` into an ``rhs(t, state)`` callable for the integrator."""
    if kind.reduced:
        return lambda t, y: reduced_field(params, y)
    if kind is SystemKind.CHEMOSTAT_3D:
        return lambda t, y: chemostat_field(params, y)
    if kind is SystemKind.SURFACE_EXACT:
        return lambda t, y: surface_field(params, y)
    coupled = kind is SystemKind.LOGISTIC_COUPLED
    return lambda t, y: logistic_field(params, y, coupled)


# ---------------------------------------------------------------------------
# isocline-form structure of the reduced system
# ---------------------------------------------------------------------------

def structural_functions(p: ReducedParams):
    """Return ``(f, F, psi)`` for the reduced system as callables of ``xi``."""
    eps, beta, mu, lam = p.epsilon, p.beta, p.mu, p.lam

    def f(xi):
        return eps * xi + xi / (1.0 + beta * xi)

    def F(xi):
        return (1.0 + beta * xi) * (1.0 - xi) / (1.0 + eps + eps * beta * xi)

    def psi(xi):
        return mu * (xi - lam) / (1.0 + beta * xi)

    return f, F, psi


def f_prime(p: ReducedParams, xi):
    return p.epsilon + 1.0 / (1.0 + p.beta * xi) ** 2


def psi_prime(p: ReducedParams, xi):
    return p.mu * (1.0 + p.beta * p.lam) / (1.0 + p.beta * xi) ** 2


def F_prime_numerator(p: ReducedParams, xi):
    eps, beta = p.epsilon, p.beta
    return beta - 1.0 - eps - 2.0 * beta * xi - 2.0 * beta * eps * xi - beta**2 * eps * xi**2


def F_prime(p: ReducedParams, xi):
    """Slope of the prey isocline, expanded form."""
    return F_prime_numerator(p, xi) / (1.0 + p.epsilon + p.epsilon * p.beta * xi) ** 2


def F_prime_factored(p: ReducedParams, xi):
    """Factored form through the roots; only defined for ``epsilon * beta > 0``.

    Loses accuracy near ``(xi_plus + xi_minus) / 2``; used as a cross-check.
    """
    xp, xm = xi_roots(p)
    if xm is None:
        raise ValueError("factored form needs epsilon > 0 and beta > 0")
    mid = 0.5 * (xp + xm)
    return -(xi - xp) * (xi - xm) / (p.epsilon * (xi - mid) ** 2)


def xi_roots(p: ReducedParams) -> tuple[float | None, float | None]:
    """Roots ``(xi_plus, xi_minus)`` of the numerator of ``F'``.

    ``xi_plus`` uses a cancellation-free form that also covers ``epsilon = 0``,
    where it equals ``(beta - 1) / (2 beta)``.  ``xi_minus`` is ``None`` unless
    ``epsilon * beta > 0``; ``xi_plus`` is ``None`` for ``beta = 0``.
    """
    eps, beta = p.epsilon, p.beta
    if beta == 0:
        return None, None
    root = math.sqrt(1.0 + eps + beta * eps)
    xi_plus = (beta - 1.0 - eps) / (beta * (root + 1.0 + eps))
    if eps * beta == 0:
        return xi_plus, None
    return xi_plus, (-1.0 - eps - root) / (beta * eps)


def xi_plus(p: ReducedParams) -> float:
    """``xi_plus`` clipped at 0; the Hopf threshold in ``lambda``."""
    xp, _ = xi_roots(p)
    return max(0.0, xp) if xp is not None else 0.0


def interior_equilibrium(p: ReducedParams) -> tuple[float, float] | None:
    if p.lam >= 1.0:
        return None
    _, F, _ = structural_functions(p)
    return p.lam, float(F(p.lam))
