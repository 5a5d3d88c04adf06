"""Equilibria of the reduced system and their linear stability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import (
    F_prime,
    ReducedParams,
    f_prime,
    psi_prime,
    reduced_field,
    structural_functions,
    xi_plus,
)

HYPERBOLIC_TOL = 1e-10


@dataclass(frozen=True)
class EquilibriumReport:
    name: str
    location: tuple[float, float]
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    paper_prediction: str

    @property
    def stability(self) -> str:
        """Classification with the node/focus distinction dropped."""
        return self.classification.split("-")[0] if self.classification != "non-hyperbolic" \
            else "non-hyperbolic"

    @property
    def agrees(self) -> bool:
        return self.stability == self.paper_prediction

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "location": list(self.location),
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classification": self.classification,
            "paper_prediction": self.paper_prediction,
        }


def jacobian(params: ReducedParams, state) -> np.ndarray:
    """Analytic Jacobian of the isocline form at ``state``."""
    xi, eta = float(state[0]), float(state[1])
    f, F, psi = structural_functions(params)
    fp = f_prime(params, xi)
    return np.array([
        [fp * F(xi) + f(xi) * F_prime(params, xi) - eta * fp, -f(xi)],
        [eta * psi_prime(params, xi), psi(xi)],
    ])


def classify(eigenvalues, tol: float = HYPERBOLIC_TOL) -> str:
    re = np.real(eigenvalues)
    if np.any(np.abs(re) <= tol):
        return "non-hyperbolic"
    if re.min() < 0 < re.max():
        return "saddle"
    kind = "focus" if np.any(np.abs(np.imag(eigenvalues)) > 0) else "node"
    return ("stable-" if re.max() < 0 else "unstable-") + kind


def _predicted_interior(params: ReducedParams) -> str:
    slope = F_prime(params, params.lam)
    f, _, _ = structural_functions(params)
    # the trace is f(lam) F'(lam); inside the classifier's band it is a tie
    if abs(f(params.lam) * slope) <= 2 * HYPERBOLIC_TOL:
        return "non-hyperbolic"
    if slope < 0:
        return "stable"
    if slope > 0:
        return "unstable"
    return "non-hyperbolic"


def _report(params, name, loc, prediction) -> EquilibriumReport:
    J = jacobian(params, loc)
    ev = np.linalg.eigvals(J)
    return EquilibriumReport(name, (float(loc[0]), float(loc[1])), J, ev, classify(ev), prediction)


def find_equilibria(params: ReducedParams) -> list[EquilibriumReport]:
    """Origin, ``(1, 0)`` and, for ``lambda < 1``, ``(lambda, F(lambda))``."""
    lam = params.lam
    if lam > 1:
        boundary = "stable"
    elif lam == 1:
        boundary = "non-hyperbolic"
    else:
        boundary = "saddle"
    out = [
        _report(params, "origin", (0.0, 0.0), "saddle"),
        _report(params, "boundary", (1.0, 0.0), boundary),
    ]
    if lam < 1:
        _, F, _ = structural_functions(params)
        out.append(_report(params, "interior", (lam, float(F(lam))), _predicted_interior(params)))
    return out


def equilibrium_residual(params: ReducedParams, report: EquilibriumReport) -> float:
    return float(np.linalg.norm(reduced_field(params, np.array(report.location))))


def hopf_threshold(params: ReducedParams) -> float:
    """Value of ``lambda`` where the interior equilibrium changes stability.

    Zero when ``beta <= 1 + epsilon``.
    """
    return xi_plus(params)


def predicted_regime(params: ReducedParams) -> str:
    lam, xp = params.lam, hopf_threshold(params)
    if lam >= 1:
        return "boundary equilibrium globally stable"
    if lam > xp:
        return "interior equilibrium globally stable"
    if lam == xp:
        return "interior equilibrium globally stable (boundary case)"
    return "unique stable limit cycle"
