"""Random parameter draws for the property and verification suites."""

from __future__ import annotations

import numpy as np

from .model import ChemostatParams, ReducedParams, reparametrize, xi_plus

DEFAULT_SEED = 20240607


def rng_for(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def chemostat_params(rng: np.random.Generator) -> ChemostatParams:
    """Chemostat parameters admitting the reduction (``amC > D``, ``M > BD``)."""
    while True:
        p = ChemostatParams(
            C=rng.uniform(1.0, 4.0), D=rng.uniform(0.1, 1.0), a=rng.uniform(0.5, 2.0),
            b=rng.uniform(0.0, 0.5), m=rng.uniform(0.5, 2.0), A=rng.uniform(0.5, 2.0),
            B=rng.uniform(0.05, 0.5), M=rng.uniform(0.5, 3.0),
        )
        if p.growth_margin > 0.2 and p.conversion_margin > 0.1:
            return p


def chemostat_state(rng: np.random.Generator, p: ChemostatParams) -> np.ndarray:
    return np.array([rng.uniform(0.1, p.C), rng.uniform(0.1, p.m * p.C), rng.uniform(0.1, 2.0)])


def reduced_params(rng: np.random.Generator, lam: float | None = None) -> ReducedParams:
    return ReducedParams(
        epsilon=rng.uniform(0.0, 2.0), beta=rng.uniform(0.0, 12.0), mu=rng.uniform(0.2, 3.0),
        lam=rng.uniform(0.01, 1.5) if lam is None else lam,
    )


def destabilizable_params(rng: np.random.Generator) -> ReducedParams:
    """``(epsilon, beta, mu)`` with ``beta > 1 + epsilon``; ``lambda`` left at 0.5."""
    eps = rng.uniform(0.05, 2.0)
    beta = 1.0 + eps + rng.uniform(0.5, 10.0)
    return ReducedParams(eps, beta, rng.uniform(0.2, 3.0), 0.5)


def stable_regime_params(rng: np.random.Generator) -> ReducedParams:
    """``lambda`` uniform in ``[max(xi_plus, 0.01), 0.99]``."""
    base = reduced_params(rng, lam=0.5)
    lo = max(xi_plus(base), 0.01)
    return base.replace(lam=rng.uniform(lo, 0.99))


def cycle_regime_params(rng: np.random.Generator, upper: float = 1.0) -> ReducedParams:
    """``lambda`` uniform in ``(0, upper * xi_plus)``."""
    base = destabilizable_params(rng)
    lam = 0.0
    while lam == 0.0:
        lam = rng.uniform(0.0, upper * xi_plus(base))
    return base.replace(lam=lam)


def reduced_state(rng: np.random.Generator, n: int | None = None):
    size = None if n is None else (n,)
    return np.array([rng.uniform(0.01, 1.5, size), rng.uniform(0.01, 2.0, size)])


def reducible_pair(rng: np.random.Generator):
    p = chemostat_params(rng)
    return p, *reparametrize(p)
