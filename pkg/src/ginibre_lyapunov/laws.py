"""Finite-t densities of Lyapunov exponents for products of Ginibre matrices.

Singular-value side
    ``f_ab`` is the density of ``(1/2t) ln`` of a product of ``t-1``
    ``Gamma(b)`` variables and one ``Gamma(a+b-1)`` variable; the exact
    one-point density is a Hankel-cofactor combination of these.  For large
    ``t`` each peak becomes Gaussian with mean ``psi(b)/2`` and variance
    ``psi'(b)/(4t)``.

Eigenvalue side
    The moduli of the complex eigenvalues are independent: ``nu_b`` is
    ``(1/2t) ln`` of a product of ``t`` ``Gamma(b)`` variables, with density
    ``tilde f_bb``.

All densities are computed in the log domain and exponentiated last.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import math
from typing import Tuple

import numpy as np
from scipy import special

from . import specfun
from .specfun import MeijerParams, hankel_cofactor_matrix, log_meijer_g_t0, permanent

__all__ = [
    "PeakParams",
    "peak_params",
    "DensityModel",
    "f_ab_exact",
    "log_f_ab_exact",
    "cumulants_ab",
    "moments_from_cumulants",
    "gaussian_peak",
    "saddle_h_ab",
    "density_sv_lyapunov",
    "density_incremental_sv",
    "eigen_peak_exact",
    "eigen_prefactor",
    "joint_density",
    "density_beta4_radial",
    "deterministic_positions",
    "integrate_density",
]

SADDLE_MAX_N = 12
EXACT_JOINT_MAX_N = 6
PERMANENT_JOINT_MAX_N = 10


def _check_pos_int(**kw):
    for name, v in kw.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be ≥ 1")


# ---------------------------------------------------------------------------
# single peaks


@dataclasses.dataclass(frozen=True)
class PeakParams:
    """Gaussian peak ``b`` at ``t``: mean ``psi(b)/2``, std ``sqrt(psi'(b)/(4t))``."""

    b: float
    t: int
    mean: float
    std: float


def peak_params(b, t):
    return PeakParams(b, t, float(special.psi(b)) / 2.0,
                      math.sqrt(float(special.polygamma(1, b)) / (4.0 * t)))


def _normal_pdf(x, m, s):
    z = (np.asarray(x, dtype=float) - m) / s
    return np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))


def gaussian_peak(b, t, x):
    """Normal density with mean ``psi(b)/2`` and variance ``psi'(b)/(4t)``."""
    _check_pos_int(t=t)
    if not b > 0:
        raise ValueError("b must be > 0")
    p = peak_params(b, t)
    return _normal_pdf(x, p.mean, p.std)


def _f_ab_params(a, b, t):
    return MeijerParams.repeated(b, t, last=a + b - 1)


def log_f_ab_exact(a, b, t, mu):
    """``ln f_ab(mu)``."""
    _check_pos_int(a=a, b=b, t=t)
    mu = np.asarray(mu, dtype=float)
    lg = (t - 1) * special.gammaln(b) + special.gammaln(a + b - 1)
    return math.log(2 * t) + log_meijer_g_t0(_f_ab_params(a, b, t), 2 * t * mu) - lg


def f_ab_exact(a, b, t, mu):
    """Exact one-variable density ``f_ab(mu) = 2t G(b..b, a+b-1 | e^{2t mu}) / norm``.

    The normalisation is ``Gamma(b)^(t-1) Gamma(a+b-1)``.
    """
    return np.exp(log_f_ab_exact(a, b, t, mu))


def cumulants_ab(a, b, t, n_max):
    """Cumulants ``kappa_1 .. kappa_n_max`` of ``f_ab``.

    ``kappa_n = [(t-1) psi^(n-1)(b) + psi^(n-1)(a+b-1)] / (2t)^n``.
    """
    _check_pos_int(a=a, b=b, t=t, n_max=n_max)
    if n_max > 8:
        raise ValueError("n_max must be ≤ 8")
    out = []
    for n in range(1, n_max + 1):
        pb = special.psi(b) if n == 1 else special.polygamma(n - 1, b)
        pab = special.psi(a + b - 1) if n == 1 else special.polygamma(n - 1, a + b - 1)
        out.append(float(((t - 1) * pb + pab) / (2.0 * t) ** n))
    return out


def moments_from_cumulants(kappa):
    """Raw moments ``m_1 .. m_n`` from cumulants (moment-cumulant recursion)."""
    k = list(kappa)
    m = [1.0]
    for n in range(1, len(k) + 1):
        m.append(sum(math.comb(n - 1, j - 1) * k[j - 1] * m[n - j] for j in range(1, n + 1)))
    return m[1:]


def _log_saddle_raw(a, b, t, mu):
    th = specfun.theta0(mu)
    mu = np.asarray(mu, dtype=float)
    return (0.5 * np.log(2.0 * t / (math.pi * special.polygamma(1, th)))
            + (t - 1) * (special.gammaln(th) - special.gammaln(b))
            + special.gammaln(a - 1 + th) - special.gammaln(a + b - 1)
            - 2.0 * t * mu * (th - b))


@functools.lru_cache(maxsize=512)
def _saddle_norm(a, b, t):
    p = peak_params(b, t)
    sd = math.sqrt(cumulants_ab(a, b, t, 2)[1])
    m = cumulants_ab(a, b, t, 1)[0]
    return integrate_density(lambda x: np.exp(_log_saddle_raw(a, b, t, x)),
                             m - 40 * max(sd, p.std), m + 15 * max(sd, p.std),
                             h=min(sd, p.std) / 25)


def saddle_h_ab(a, b, t, mu, normalized=False):
    """Saddle-point approximation of ``f_ab``.

    With ``normalized=False`` returns ``h_ab = Gamma(a+b-1) f_ab^saddle``, the
    raw saddle-point form scaled as in the level-density formula.  With
    ``normalized=True`` returns ``f_ab^saddle`` divided by its integral, a
    proper probability density.
    """
    _check_pos_int(a=a, b=b, t=t)
    lf = _log_saddle_raw(a, b, t, mu)
    if normalized:
        return np.exp(lf) / _saddle_norm(a, b, t)
    return np.exp(lf + special.gammaln(a + b - 1))


def _cofactor_weights(N):
    """``C_ab Gamma(a+b-1) / det``; the weights of each ``f_ab`` in the density."""
    W = hankel_cofactor_matrix(N)
    ab = np.add.outer(np.arange(1, N + 1), np.arange(1, N + 1))
    return W * special.gamma(ab - 1)


def density_sv_lyapunov(N, t, mu, method="gaussian"):
    """One-point density of finite-t Lyapunov exponents from singular values.

    ``method="gaussian"``: equal mixture of the ``N`` Gaussian peaks.
    ``method="saddle"``: Hankel-cofactor combination of normalised
    saddle-point densities.  ``method="exact"``: the same combination of the
    exact ``f_ab``.
    """
    _check_pos_int(N=N, t=t)
    mu = np.asarray(mu, dtype=float)
    if method == "gaussian":
        return sum(gaussian_peak(b, t, mu) for b in range(1, N + 1)) / N
    if method not in ("saddle", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if N > SADDLE_MAX_N:
        raise ValueError(f"N={N} too large for the cofactor expansion (max {SADDLE_MAX_N})")
    W = _cofactor_weights(N)
    out = np.zeros_like(mu)
    for a in range(1, N + 1):
        for b in range(1, N + 1):
            if method == "saddle":
                f = saddle_h_ab(a, b, t, mu, normalized=True)
            else:
                f = f_ab_exact(a, b, t, mu)
            out = out + W[a - 1, b - 1] * f
    return np.maximum(out / N, 0.0)


def density_incremental_sv(N, t, lam):
    """Log-normal mixture density of incremental singular values ``exp(mu)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise ValueError("lambda must be > 0")
    return density_sv_lyapunov(N, t, np.log(lam), "gaussian") / lam


def eigen_peak_exact(a, b, t, nu):
    """``tilde f_ab(nu) = 2t G((a+b)/2, ... | e^{2t nu}) / Gamma((a+b)/2)^t``."""
    _check_pos_int(a=a, b=b, t=t)
    c = 0.5 * (a + b)
    lg = t * special.gammaln(c)
    nu = np.asarray(nu, dtype=float)
    return np.exp(math.log(2 * t) + log_meijer_g_t0(MeijerParams.repeated(c, t), 2 * t * nu) - lg)


def eigen_prefactor(a, b, t):
    """``D_ab(t) = (Gamma((a+b)/2) / sqrt(Gamma(a) Gamma(b)))^t``."""
    _check_pos_int(a=a, b=b, t=t)
    lg = special.gammaln(0.5 * (a + b)) - 0.5 * (special.gammaln(a) + special.gammaln(b))
    return float(np.exp(t * lg))


def density_beta4_radial(N, t, nu):
    """Quaternion eigenvalue exponents: Gaussians at ``psi(2c)/2``, ``c = 1..N``."""
    _check_pos_int(N=N, t=t)
    if N > 12:
        raise ValueError("N must be ≤ 12")
    return sum(gaussian_peak(2 * c, t, nu) for c in range(1, N + 1)) / N


def deterministic_positions(N, beta=2):
    """Limiting exponents ``psi(beta b / 2) / 2``, ``b = 1..N``, ascending."""
    _check_pos_int(N=N)
    if beta not in (1, 2, 4):
        raise ValueError("beta must be 1, 2 or 4")
    return special.psi(beta * np.arange(1, N + 1) / 2.0) / 2.0


# ---------------------------------------------------------------------------
# joint densities


def joint_density(points, N, t, kind):
    """Joint density of ``N`` exponents (or incremental radii) at ``points``.

    kinds
        ``sv-exact``: exact law of the singular-value exponents, a sum over
        permutations of determinants of ``Gamma(a+b-1) f_ab``.
        ``sv-permanent`` / ``ev-permanent``: large-t permanent of Gaussian peaks.
        ``incremental-permanent``: the same for ``r = exp(nu)`` (log-normal).
        ``ev-exact``: exact angle-integrated law of the eigenvalue exponents,
        a permanent of ``tilde f_bb``.
    """
    _check_pos_int(N=N, t=t)
    x = np.asarray(points, dtype=float).ravel()
    if x.size != N:
        raise ValueError(f"expected {N} points, got {x.size}")
    if kind == "sv-exact":
        if N > EXACT_JOINT_MAX_N:
            raise ValueError(f"N={N} too large for {kind} (max {EXACT_JOINT_MAX_N})")
        F = np.empty((N, N, N))
        for a in range(1, N + 1):
            for b in range(1, N + 1):
                F[a - 1, b - 1] = math.gamma(a + b - 1) * f_ab_exact(a, b, t, x)
        total = 0.0
        cols = np.arange(N)
        for w in itertools.permutations(range(N)):
            total += np.linalg.det(F[:, cols, list(w)])
        norm = math.factorial(N) * specfun.hankel_gamma_det(N)
        return max(total / norm, 0.0)
    if kind not in ("sv-permanent", "ev-permanent", "incremental-permanent", "ev-exact"):
        raise ValueError(f"unknown kind {kind!r}")
    limit = EXACT_JOINT_MAX_N if kind == "ev-exact" else PERMANENT_JOINT_MAX_N
    if N > limit:
        raise ValueError(f"N={N} too large for {kind} (max {limit})")
    # the permanent is symmetric; a canonical order makes the value bit-exact
    x = np.sort(x)
    M = np.empty((N, N))
    for b in range(1, N + 1):
        if kind == "ev-exact":
            M[:, b - 1] = eigen_peak_exact(b, b, t, x)
        elif kind == "incremental-permanent":
            if np.any(x <= 0):
                return 0.0
            M[:, b - 1] = gaussian_peak(b, t, np.log(x)) / x
        else:
            M[:, b - 1] = gaussian_peak(b, t, x)
    return float(permanent(M)) / math.factorial(N)


# ---------------------------------------------------------------------------
# quadrature and density models


def integrate_density(f, lo, hi, h):
    """Trapezoidal integral of a smooth, rapidly decaying ``f`` on ``[lo, hi]``."""
    n = max(int(math.ceil((hi - lo) / h)), 16) + 1
    x = np.linspace(lo, hi, n)
    return float(np.trapezoid(f(x), x))


_KINDS = ("exact-meijer", "gaussian-mixture", "saddle", "lognormal-mixture",
          "eigen-exact", "beta4-radial", "triangular", "staircase")


@dataclasses.dataclass(frozen=True)
class DensityModel:
    """A one-dimensional law, evaluable as ``pdf`` and ``cdf``.

    ``exact-meijer``, ``gaussian-mixture`` and ``saddle`` are densities of the
    singular-value exponents ``mu``; ``lognormal-mixture`` is the density of
    ``exp(mu)``; ``eigen-exact`` and ``beta4-radial`` are densities of the
    eigenvalue exponents ``nu``; ``triangular`` and ``staircase`` are the
    large-N laws of the rescaled incremental values.
    """

    kind: str
    N: int = 1
    t: int = 1
    beta: int = 2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {_KINDS}")
        _check_pos_int(N=self.N, t=self.t)
        if self.kind == "beta4-radial" and self.beta != 4:
            object.__setattr__(self, "beta", 4)

    # -- analytic peaks ----------------------------------------------------
    def _peaks(self) -> Tuple[np.ndarray, np.ndarray]:
        idx = np.arange(1, self.N + 1, dtype=float)
        shape = 2 * idx if self.kind == "beta4-radial" else idx
        return special.psi(shape) / 2.0, np.sqrt(special.polygamma(1, shape) / (4.0 * self.t))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "gaussian-mixture":
            return density_sv_lyapunov(self.N, self.t, x, "gaussian")
        if k == "beta4-radial":
            return density_beta4_radial(self.N, self.t, x)
        if k == "lognormal-mixture":
            out = np.zeros_like(x)
            pos = x > 0
            out[pos] = density_incremental_sv(self.N, self.t, x[pos])
            return out
        if k == "saddle":
            return density_sv_lyapunov(self.N, self.t, x, "saddle")
        if k == "exact-meijer":
            return density_sv_lyapunov(self.N, self.t, x, "exact")
        if k == "eigen-exact":
            return sum(eigen_peak_exact(b, b, self.t, x) for b in range(1, self.N + 1)) / self.N
        if k == "triangular":
            from .asymptotics import triangular_density
            return triangular_density(x)
        raise ValueError("the staircase law has no density; use cdf")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k in ("gaussian-mixture", "beta4-radial"):
            m, s = self._peaks()
            return special.ndtr((x[..., None] - m) / s).mean(-1)
        if k == "lognormal-mixture":
            m, s = self._peaks()
            with np.errstate(divide="ignore"):
                lx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
            return special.ndtr((lx[..., None] - m) / s).mean(-1)
        if k == "triangular":
            return np.clip(x, 0.0, 1.0) ** 2
        if k == "staircase":
            from .asymptotics import staircase_cdf
            return staircase_cdf(self.N, x)
        grid, F = self._cdf_table
        return np.interp(x, grid, F, left=0.0, right=1.0)

    def support(self):
        """Interval holding all but a negligible fraction of the mass."""
        if self.kind in ("triangular", "staircase"):
            return 0.0, 1.5
        m, s = self._peaks()
        if self.kind == "lognormal-mixture":
            return float(np.exp(m[0] - 12 * s[0])), float(np.exp(m[-1] + 12 * s[-1]))
        return float(m[0] - 40 * s[0]), float(m[-1] + 15 * s[-1])

    @functools.cached_property
    def _cdf_table(self):
        lo, hi = self.support()
        _, s = self._peaks()
        n = int(min(max((hi - lo) / (s.min() / 12.0), 2000), 20000))
        grid = np.linspace(lo, hi, n)
        p = self.pdf(grid)
        F = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(grid))])
        F /= F[-1]
        return grid, np.maximum.accumulate(F)
