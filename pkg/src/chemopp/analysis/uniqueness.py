"""Limit-cycle uniqueness condition of Kuang and Freedman for the reduced system.

The condition asks ``d/dxi (f F' / psi) <= 0`` for ``xi != lam`` in ``[0, 1]``.
Its numerator is the quartic below; a Taylor rearrangement around
``xi = lam`` gives the same polynomial divided by ``eps beta^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ReducedParams, xi_roots


def quartic_coefficients(p: ReducedParams) -> np.ndarray:
    """Coefficients, highest degree first."""
    e, b, l = p.epsilon, p.beta, p.lam
    c = 1.0 + e
    return np.array([
        -(e**2) * b**3,
        -2.0 * e * b**2 * (c - l * e * b),
        -b * (c * (2.0 + e) + e * b - 5.0 * l * e * b * c),
        4.0 * l * b * c**2,
        -l * c * (b - c),
    ])


def kuang_quartic(p: ReducedParams, xi):
    return np.polyval(quartic_coefficients(p), xi)


def quartic_term_scale(p: ReducedParams, xi):
    """Sum of the absolute monomials; the natural size for relative comparisons."""
    return np.polyval(np.abs(quartic_coefficients(p)), np.abs(xi))


def taylor_form(p: ReducedParams, xi):
    """Expansion around ``xi = lam``; equals ``kuang_quartic / (eps beta^2)``.

    Needs ``eps > 0`` and ``beta > 0``.
    """
    e, b, l = p.epsilon, p.beta, p.lam
    xp, xm = xi_roots(p)
    if xm is None:
        raise ValueError("Taylor form needs epsilon > 0 and beta > 0")
    be = b * e
    c = 1.0 + e
    shift = l + c / be
    prod = (l - xm) * (l - xp)
    u = xi - l
    return (be * l * shift * prod
            + 2.0 * be * l * prod * u
            - c * (shift + 1.0 / be) * u**2
            - u**2 * (1.0 + 2.0 * be * shift * u + be * u**2))


@dataclass(frozen=True)
class UniquenessReport:
    params: ReducedParams
    max_value: float
    argmax: float
    critical_points: tuple[float, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "max_value": self.max_value,
            "argmax": self.argmax,
            "critical_points": list(self.critical_points),
            "passed": self.passed,
        }


def uniqueness_check(p: ReducedParams, tol: float = 1e-12, n: int = 10_000) -> UniquenessReport:
    """Maximum of the quartic over ``[0, 1]``: uniform grid plus its critical points."""
    coef = quartic_coefficients(p)
    crit = np.roots(np.polyder(np.trim_zeros(coef, "f")))
    crit = crit[np.abs(crit.imag) <= 1e-12 * np.maximum(1.0, np.abs(crit.real))].real
    crit = np.sort(crit[(crit >= 0) & (crit <= 1)])
    pts = np.union1d(np.linspace(0.0, 1.0, n + 1), crit)
    vals = np.polyval(coef, pts)
    i = int(np.argmax(vals))
    return UniquenessReport(p, float(vals[i]), float(pts[i]), tuple(float(x) for x in crit),
                            bool(vals[i] <= tol))


def forms_agreement(p: ReducedParams, xi) -> np.ndarray:
    """Relative difference between the quartic and the scaled Taylor form."""
    q = kuang_quartic(p, xi)
    t = p.epsilon * p.beta**2 * taylor_form(p, xi)
    return np.abs(q - t) / quartic_term_scale(p, xi)
