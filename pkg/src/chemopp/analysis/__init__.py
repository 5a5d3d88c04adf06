"""Equilibria, Lyapunov certificates, uniqueness condition and limit cycles."""

from .cycles import CycleNotFoundError, CycleReport, MultiplicityAlarm, find_limit_cycle
from .equilibria import EquilibriumReport, find_equilibria, hopf_threshold, jacobian, predicted_regime
from .lyapunov import (
    LyapunovCertificate,
    F_bar_theta,
    global_stability_certificate,
    lyapunov_W,
    lyapunov_Wdot,
    trapping_level,
)
from .uniqueness import UniquenessReport, kuang_quartic, taylor_form, uniqueness_check

__all__ = [
    "CycleNotFoundError", "CycleReport", "MultiplicityAlarm", "find_limit_cycle",
    "EquilibriumReport", "find_equilibria", "hopf_threshold", "jacobian", "predicted_regime",
    "LyapunovCertificate", "F_bar_theta", "global_stability_certificate", "lyapunov_W",
    "lyapunov_Wdot", "trapping_level",
    "UniquenessReport", "kuang_quartic", "taylor_form", "uniqueness_check",
]
