"""Lyapunov machinery for the reduced system.

``V`` gives the bounded trapping region; the family ``W_theta`` certifies
global stability of the interior equilibrium through the sign of
``F - Fbar_theta``.  All integrals of ``1/f`` and ``psi/f`` are evaluated in
closed form (partial fractions), written so that differences vanishing at
``xi = lambda`` are formed without cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from ..integrator import VERIFY_CONFIG, IntegratorConfig, solve
from ..model import ReducedParams, reduced_field, structural_functions, xi_plus

FAN_STARTS = np.array([
    [0.1, 0.1], [0.1, 1.0], [0.5, 0.05], [0.5, 2.0],
    [0.9, 0.5], [1.2, 0.1], [1.5, 1.5], [0.3, 0.6],
])


def _shifted_log_over_d(p: ReducedParams, xi):
    """``ln((c + d xi) / (c + d lam)) / d`` with ``c = 1 + eps``, ``d = eps beta``."""
    c, d = 1.0 + p.epsilon, p.epsilon * p.beta
    step = (np.asarray(xi, dtype=float) - p.lam) / (c + d * p.lam)
    z = d * step
    # log1p(z) / z -> 1 as z -> 0; dividing by d directly breaks for subnormal d
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(z == 0, 1.0, np.log1p(z) / np.where(z == 0, 1.0, z))
    return ratio * step


def _log_ratio(p: ReducedParams, xi):
    """``ln(xi / lam)``."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi must be > 0 (logarithmic singularity at 0)")
    u = (xi - p.lam) / p.lam
    # log1p only where it helps; far below lam it would round xi/lam to 0
    return np.where(u > -0.5, np.log1p(np.maximum(u, -0.5)), np.log(xi / p.lam))


def psi_over_f_integral(p: ReducedParams, xi):
    """``int_lambda^xi psi / f``."""
    c, d = 1.0 + p.epsilon, p.epsilon * p.beta
    return p.mu * (-(p.lam / c) * _log_ratio(p, xi) + (1.0 + p.lam * d / c) * _shifted_log_over_d(p, xi))


def inverse_f_integral(p: ReducedParams, xi):
    """``int_lambda^xi 1 / f``."""
    c = 1.0 + p.epsilon
    return _log_ratio(p, xi) / c + (p.beta / c) * _shifted_log_over_d(p, xi)


def F_bar_theta(p: ReducedParams, theta: float, xi):
    if theta < 0:
        raise ValueError("theta must be >= 0")
    _, F, _ = structural_functions(p)
    return F(p.lam) - theta * psi_over_f_integral(p, xi)


def F_difference(p: ReducedParams, xi):
    """``F(xi) - F(lam)`` via the divided difference."""
    eps, beta, lam = p.epsilon, p.beta, p.lam
    c, d = 1.0 + eps, eps * beta
    num_lam = 1.0 + (beta - 1.0) * lam - beta * lam**2
    den_lam = c + d * lam
    slope_num = ((beta - 1.0) - beta * (xi + lam)) * den_lam - num_lam * d
    return (xi - lam) * slope_num / ((c + d * xi) * den_lam)


def isocline_gap(p: ReducedParams, theta: float, xi):
    """``F(xi) - Fbar_theta(xi)``."""
    return F_difference(p, xi) + theta * psi_over_f_integral(p, xi)


def gap_stationary_points(p: ReducedParams, theta: float, lo: float = 0.0, hi: float = 1.0):
    """Real roots in ``(lo, hi)`` of ``d/dxi (F - Fbar_theta)``.

    Over the common denominator ``xi (c + d xi)^2`` the numerator is the
    cubic ``xi N(xi) + theta mu (xi - lam)(c + d xi)``, ``N`` the numerator
    of ``F'``.
    """
    eps, beta, mu, lam = p.epsilon, p.beta, p.mu, p.lam
    c, d = 1.0 + eps, eps * beta
    # xi * N(xi)
    poly = np.array([-beta**2 * eps, -2 * beta * c, beta - c, 0.0])
    poly = poly + theta * mu * np.array([0.0, d, c - d * lam, -c * lam])
    poly = np.trim_zeros(poly, "f")
    if len(poly) < 2:
        return np.array([])
    r = np.roots(poly)
    r = r[np.abs(r.imag) <= 1e-12 * np.maximum(1.0, np.abs(r.real))].real
    return np.sort(r[(r > lo) & (r < hi)])


def certificate_theta(p: ReducedParams) -> float:
    return max(0.0, 2.0 * xi_plus(p) * p.beta / p.mu)


def _F_lam(p: ReducedParams) -> float:
    if not p.lam < 1:
        raise ValueError("W and V need an interior equilibrium (lambda < 1)")
    _, F, _ = structural_functions(p)
    return float(F(p.lam))


def _eta_integral(p: ReducedParams, theta: float, eta):
    """``int_{F(lam)}^eta s^theta (s - F(lam)) / s ds``."""
    Fl = _F_lam(p)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("eta must be > 0")
    r = np.log(eta / Fl)
    if theta == 0:
        return (eta - Fl) - Fl * r
    # (eta^(th+1) - Fl^(th+1))/(th+1) - Fl (eta^th - Fl^th)/th, via expm1
    return (Fl ** (theta + 1) * np.expm1((theta + 1) * r) / (theta + 1)
            - Fl ** (theta + 1) * np.expm1(theta * r) / theta)


def lyapunov_W(p: ReducedParams, theta: float, state):
    xi, eta = state[0], state[1]
    if np.any(np.asarray(xi) <= 0) or np.any(np.asarray(eta) <= 0):
        raise ValueError("W is defined on the open positive cone")
    return eta**theta * psi_over_f_integral(p, xi) + _eta_integral(p, theta, eta)


def lyapunov_W_gradient(p: ReducedParams, theta: float, state):
    xi, eta = state[0], state[1]
    f, _, psi = structural_functions(p)
    Fl = _F_lam(p)
    d_xi = eta**theta * psi(xi) / f(xi)
    d_eta = theta * eta ** (theta - 1) * psi_over_f_integral(p, xi) + eta ** (theta - 1) * (eta - Fl)
    return np.array([d_xi, d_eta])


def lyapunov_Wdot(p: ReducedParams, theta: float, state):
    """Derivative of ``W_theta`` along the reduced flow."""
    xi, eta = state[0], state[1]
    if np.any(np.asarray(xi) <= 0) or np.any(np.asarray(eta) <= 0):
        raise ValueError("W is defined on the open positive cone")
    _, _, psi = structural_functions(p)
    return eta**theta * psi(xi) * isocline_gap(p, theta, xi)


def rotated_field(p: ReducedParams, theta: float, state):
    """Vector field for which ``W_theta`` is a first integral."""
    xi, eta = state[0], state[1]
    f, _, psi = structural_functions(p)
    return np.array([f(xi) * (F_bar_theta(p, theta, xi) - eta), eta * psi(xi)])


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------

def lyapunov_V(p: ReducedParams, state):
    xi, eta = state[0], state[1]
    return inverse_f_integral(p, xi) + np.log(eta / _F_lam(p))


def lyapunov_Vdot(p: ReducedParams, state):
    xi, eta = state[0], state[1]
    _, F, psi = structural_functions(p)
    return F(xi) - eta + psi(xi)


def trapping_level(p: ReducedParams) -> float:
    """Level ``kappa`` with ``Vdot < 0`` on ``{V > kappa, lam <= xi <= 1}``."""
    _, F, psi = structural_functions(p)
    Fl = _F_lam(p)
    g = lambda x: F(x) + psi(x)
    grid = np.linspace(p.lam, 1.0, 4001)
    vals = g(grid)
    i = int(np.argmax(vals))
    res = minimize_scalar(lambda x: -g(x), bounds=(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    peak = max(float(vals[i]), float(-res.fun))
    return float(inverse_f_integral(p, 1.0)) + float(np.log(peak / Fl))


# ---------------------------------------------------------------------------
# global stability certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovCertificate:
    params: ReducedParams
    theta: float
    target: tuple[float, float]
    grid: np.ndarray
    gap: np.ndarray
    worst_violation: float
    worst_xi: float
    trajectories_checked: int
    max_Wdot: float
    final_distances: np.ndarray
    failures: tuple[str, ...] = field(default=())

    @property
    def sign_condition_holds(self) -> bool:
        return self.worst_violation < 0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "theta": self.theta,
            "target": list(self.target),
            "grid_points": int(len(self.grid)),
            "worst_violation": self.worst_violation,
            "worst_xi": self.worst_xi,
            "trajectories_checked": self.trajectories_checked,
            "max_Wdot": self.max_Wdot,
            "final_distances": [float(v) for v in self.final_distances],
            "passed": self.passed,
            "failures": list(self.failures),
        }


def sign_condition_grid(p: ReducedParams, theta: float, n: int = 10_000) -> np.ndarray:
    """Uniform grid of ``(0, 1]`` plus stationary points of the gap, minus ``lam``."""
    grid = np.linspace(0.0, 1.0, n + 1)[1:]
    grid = np.union1d(grid, gap_stationary_points(p, theta))
    return grid[grid != p.lam]


def fan_convergence(p: ReducedParams, target, t_final: float = 2000.0,
                    config: IntegratorConfig = VERIFY_CONFIG, starts=FAN_STARTS):
    """Integrate a bundle of starts; return the trajectory and final distances to ``target``."""
    y0 = np.asarray(starts, dtype=float).T.copy()
    traj = solve(lambda t, y: reduced_field(p, y), (0.0, t_final), y0, config)
    final = traj.final_state
    dist = np.hypot(final[0] - target[0], final[1] - target[1])
    return traj, dist


def global_stability_certificate(p: ReducedParams, t_final: float = 2000.0,
                                 config: IntegratorConfig = VERIFY_CONFIG,
                                 converge_tol: float = 1e-5, wdot_tol: float = 1e-10,
                                 grid_points: int = 10_000, short_circuit: bool = False
                                 ) -> LyapunovCertificate:
    """Check the sign condition for ``W_theta`` and the convergence of a trajectory fan.

    ``theta = max(0, 2 xi_plus beta / mu)``.  The certificate passes when
    ``(F - Fbar_theta)(xi - lam) < 0`` on the grid (so ``Wdot <= 0``), every
    fan member ends within ``converge_tol`` of the equilibrium and the
    largest ``Wdot`` seen along the fan is at most ``wdot_tol``.  For
    ``lam >= 1`` only the fan towards ``(1, 0)`` is checked.  With
    ``short_circuit`` a violated sign condition ends the check before the
    fan is integrated (the verdict is already fixed).
    """
    theta = certificate_theta(p)
    failures = []
    if p.lam >= 1:
        target = (1.0, 0.0)
        grid = gap = np.array([])
        worst, worst_xi = float("-inf"), float("nan")
    else:
        _, F, _ = structural_functions(p)
        target = (p.lam, float(F(p.lam)))
        grid = sign_condition_grid(p, theta, grid_points)
        gap = isocline_gap(p, theta, grid)
        prod = gap * (grid - p.lam)
        i = int(np.argmax(prod))
        worst, worst_xi = float(prod[i]), float(grid[i])
        if not worst < 0:
            failures.append(f"sign condition violated at xi={worst_xi:.12g} (value {worst:.3e})")
            if short_circuit:
                return LyapunovCertificate(p, theta, target, grid, gap, worst, worst_xi, 0,
                                           float("nan"), np.array([]), tuple(failures))

    traj, dist = fan_convergence(p, target, t_final, config)
    max_wdot = float("nan")
    if p.lam < 1:
        states = traj.states  # (n_times, 2, n_starts)
        xi, eta = states[:, 0, :], states[:, 1, :]
        ok = (xi > 0) & (eta > 0)
        wdot = lyapunov_Wdot(p, theta, (xi[ok], eta[ok]))
        max_wdot = float(np.max(wdot))
        if max_wdot > wdot_tol:
            failures.append(f"Wdot reached {max_wdot:.3e} along the fan")
    for j, dj in enumerate(dist):
        if not dj <= converge_tol:
            failures.append(f"trajectory {j} from {tuple(float(v) for v in FAN_STARTS[j])} ended {dj:.3e} from target")
    return LyapunovCertificate(p, theta, target, grid, gap, worst, worst_xi, len(dist),
                               max_wdot, dist, tuple(failures))
