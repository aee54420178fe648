"""Large-N laws of rescaled incremental values and their finite-N approximants.

With factors rescaled by ``1/sqrt(N)``, the incremental singular values
``lambda_* = exp(mu) / sqrt(N)`` of a long product follow the triangular law
``rho(lambda) = 2 lambda`` on ``[0, 1]`` as ``N -> inf``.  At ``t = inf`` and
finite ``N`` they are deterministic, ``exp(psi(n)/2) / sqrt(N)``, which gives
a staircase CDF.  Taking ``N -> inf`` first instead, moments follow from the
Fuss-Catalan numbers; both orders agree globally but not for level spacings.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import special

from . import specfun

__all__ = [
    "StaircaseCDF",
    "SpacingDistribution",
    "triangular_density",
    "triangular_cdf",
    "triangular_exponent_density",
    "staircase",
    "staircase_cdf",
    "staircase_sup_deviation",
    "fuss_catalan_moment",
    "level_spacing_finite_N",
    "mc_level_spacing",
]


def triangular_density(lambda_star):
    """``2 lambda`` on ``[0, 1]``, zero elsewhere."""
    x = np.asarray(lambda_star, dtype=float)
    return np.where((x >= 0) & (x <= 1), 2.0 * x, 0.0)


def triangular_cdf(lambda_star):
    x = np.asarray(lambda_star, dtype=float)
    return np.clip(x, 0.0, 1.0) ** 2


def triangular_exponent_density(mu_star):
    """Triangular law in the exponent ``mu_* = ln lambda_*``: ``2 exp(2 mu)`` for ``mu <= 0``."""
    m = np.asarray(mu_star, dtype=float)
    return np.where(m <= 0, 2.0 * np.exp(2.0 * np.minimum(m, 0.0)), 0.0)


@dataclasses.dataclass(frozen=True)
class StaircaseCDF:
    """Counting function of the ``t = inf`` values ``exp(psi(n)/2) / sqrt(N)``."""

    N: int
    jump_locations: np.ndarray
    jump_height: float

    def __call__(self, lambda_star):
        x = np.asarray(lambda_star, dtype=float)
        return np.searchsorted(self.jump_locations, x, side="right") / self.N


def staircase(N):
    if int(N) != N or N < 1:
        raise ValueError("N must be ≥ 1")
    N = int(N)
    loc = np.exp(special.psi(np.arange(1, N + 1)) / 2.0) / np.sqrt(N)
    return StaircaseCDF(N, loc, 1.0 / N)


def staircase_cdf(N, lambda_star):
    """Right-continuous staircase CDF at ``lambda_star``."""
    return staircase(N)(lambda_star)


def staircase_sup_deviation(N):
    """Exact ``sup_lambda |F_N(lambda) - min(lambda^2, 1)|``.

    Between jumps ``F_N`` is constant and ``lambda^2`` monotone, so the
    supremum is attained at a jump (from either side) or at ``lambda = 1``.
    """
    sc = staircase(N)
    x = np.concatenate([sc.jump_locations, [1.0]])
    tri = np.minimum(x * x, 1.0)
    right = sc(x)
    left = np.searchsorted(sc.jump_locations, x, side="left") / sc.N
    return float(max(np.abs(right - tri).max(), np.abs(left - tri).max()))


def fuss_catalan_moment(N_limit_first, t, n):
    """``<lambda_*^n>`` in the large-N limit.

    ``N_limit_first=True``: the ``N -> inf`` moment at finite ``t``, the
    Fuss-Catalan number ``FC_t(k)`` at ``k = n/(2t)``.  ``False``: the
    ``t -> inf`` first value, the triangular-law moment ``2/(n+2)``.
    """
    if int(t) != t or t < 1:
        raise ValueError("t must be ≥ 1")
    if not n >= 1:
        raise ValueError("n must be ≥ 1")
    if N_limit_first:
        return float(specfun.fuss_catalan(int(t), n / (2.0 * t)))
    return 2.0 / (n + 2.0)


@dataclasses.dataclass(frozen=True)
class SpacingDistribution:
    """Discrete distribution with equal-weight atoms."""

    atoms: np.ndarray
    weights: np.ndarray

    def mass_in(self, lo, hi):
        sel = (self.atoms >= lo) & (self.atoms <= hi)
        return float(self.weights[sel].sum())


def level_spacing_finite_N(N):
    """Spacings of ``r_*^2 = exp(psi(j))`` at ``t = inf``: atoms ``exp(psi(j)) (e^{1/j} - 1)``."""
    if int(N) != N or N < 2:
        raise ValueError("N must be ≥ 2")
    j = np.arange(1, int(N), dtype=float)
    atoms = np.exp(special.psi(j)) * np.expm1(1.0 / j)
    return SpacingDistribution(atoms, np.full(atoms.size, 1.0 / atoms.size))


def mc_level_spacing(N, t, samples, seed, method="matrix", threads=1):
    """Pooled nearest-neighbour spacings of sorted ``r^2 = |Z|^(2/t)`` from simulation.

    ``r = exp(nu)`` are the incremental radii of complex Ginibre products.
    """
    from .montecarlo import run_ev_experiment
    from .rng import EnsembleSpec

    if int(N) != N or N < 2:
        raise ValueError("N must be ≥ 2")
    spec = EnsembleSpec("ginibre-beta2", N, t, samples, seed, "ev-lyapunov")
    nu = run_ev_experiment(spec, method=method, threads=threads).rows
    return np.diff(np.exp(2.0 * nu), axis=1).ravel()
