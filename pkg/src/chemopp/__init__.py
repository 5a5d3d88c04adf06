"""Chemostat predator-prey model family: simulation, stability analysis and sweeps."""

from .model import (
    ChemostatParams,
    InvalidParameterError,
    ReducedParams,
    SystemKind,
    reparametrize,
    vector_field,
    xi_plus,
)
from .integrator import IntegratorConfig, integrate, solve

__version__ = "0.1.0"

__all__ = [
    "ChemostatParams", "InvalidParameterError", "ReducedParams", "SystemKind", "reparametrize",
    "vector_field", "xi_plus", "IntegratorConfig", "integrate", "solve", "__version__",
]
