"""Special functions and combinatorial kernels.

Log-gamma and polygamma are thin, validated wrappers around :mod:`scipy.special`.
Everything else here (the Meijer G-function ``G^{t,0}_{0,t}``, the inverse
digamma, Fuss-Catalan numbers, the factorial Hankel determinant and its
cofactors, permanents) is implemented directly.

Meijer G convention
-------------------
``G^{t,0}_{0,t}(a_1, ..., a_t | s)`` is normalised so that its Mellin transform
is ``prod_j Gamma(a_j + u)``.  Equivalently ``G(a | s) = s p(s) prod_j
Gamma(a_j)`` where ``p`` is the density of a product of independent
``Gamma(a_j, 1)`` variables.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np
from scipy import special

__all__ = [
    "MeijerParams",
    "MeijerGConvergenceError",
    "log_gamma",
    "polygamma",
    "theta0",
    "meijer_g_t0",
    "log_meijer_g_t0",
    "fuss_catalan",
    "hankel_gamma_det",
    "log_hankel_gamma_det",
    "hankel_cofactor",
    "permanent",
]

PERMANENT_MAX_SIZE = 12
HANKEL_MAX_N = 12
MEIJER_MAX_T = 1024


class MeijerGConvergenceError(ArithmeticError):
    """Mellin-Barnes quadrature did not converge.

    ``achieved`` holds the best error estimate that was reached.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved


# ---------------------------------------------------------------------------
# gamma family


def log_gamma(x):
    """``ln Gamma(x)`` for ``x > 0`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("log_gamma requires x > 0")
    out = special.gammaln(x)
    return float(out) if out.ndim == 0 else out


def polygamma(n, x):
    """``psi^{(n)}(x)``; ``n = 0`` is the digamma function."""
    if int(n) != n or n < 0:
        raise ValueError("polygamma order must be a nonnegative integer")
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("polygamma requires x > 0")
    out = special.psi(x) if n == 0 else special.polygamma(int(n), x)
    return float(out) if out.ndim == 0 else out


def theta0(mu):
    """Solve ``psi(theta) = 2 mu`` for ``theta > 0``.

    The digamma function is a bijection of ``(0, inf)`` onto the real line,
    so the solution exists and is unique.  Safeguarded Newton iteration from
    Minka's initial guess.
    """
    y = 2.0 * np.asarray(mu, dtype=float)
    euler = -special.psi(1.0)
    left = np.minimum(y, -2.22)
    x = np.where(y >= -2.22, np.exp(np.minimum(y, 700.0)) + 0.5, -1.0 / (left + euler))
    for _ in range(60):
        f = special.psi(x) - y
        step = f / special.polygamma(1, x)
        xn = x - step
        # Newton from the left of the root can jump past zero
        xn = np.where(xn <= 0, 0.5 * x, xn)
        done = np.abs(xn - x) <= 1e-15 * np.abs(xn)
        x = xn
        if np.all(done):
            break
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Meijer G^{t,0}_{0,t}


class MeijerParams:
    """Upper-index list ``a_1..a_t`` of ``G^{t,0}_{0,t}``, stored compressed.

    Indices usually repeat (``(b, ..., b, a+b-1)``), so the list is kept as
    distinct values with multiplicities.
    """

    __slots__ = ("values", "counts")

    def __init__(self, a):
        a = np.asarray(a, dtype=float).ravel()
        if a.size < 1 or a.size > MEIJER_MAX_T:
            raise ValueError(f"Meijer G needs 1 <= t <= {MEIJER_MAX_T}, got t={a.size}")
        if np.any(~(a > 0)):
            raise ValueError("Meijer G indices must be positive")
        self.values, counts = np.unique(a, return_counts=True)
        self.counts = counts.astype(float)

    @classmethod
    def repeated(cls, value, t, last=None):
        """``(value,)*t`` or ``(value,)*(t-1) + (last,)``."""
        if last is None:
            return cls(np.full(t, float(value)))
        return cls(np.r_[np.full(t - 1, float(value)), float(last)])

    @property
    def t(self):
        return int(self.counts.sum())

    def __repr__(self):
        pairs = ", ".join(f"{v:g}x{int(c)}" for v, c in zip(self.values, self.counts))
        return f"MeijerParams({pairs})"


def _as_params(a):
    return a if isinstance(a, MeijerParams) else MeijerParams(a)


def _saddle(p, log_s):
    """Real saddle ``c`` of ``sum_j lnGamma(a_j+u) - u ln s``: sum psi(a_j+c) = ln s.

    Vectorised safeguarded Newton inside a shrinking bracket.
    """
    vals, cnts = p.values, p.counts
    amin = vals[0]

    def phi_at(c, ls):
        z = vals[None, :] + c[:, None]
        return (cnts * special.psi(z)).sum(1) - ls, (cnts * special.polygamma(1, z)).sum(1)

    n = log_s.size
    # bracket: psi(x) < ln(x) and psi(x) > ln(x) - 1/x
    lo = np.full(n, -amin)
    hi = np.maximum(np.exp(np.minimum(log_s / p.t, 700.0)) + 1.0, 1.0) - amin + 1.0
    c = np.where(log_s / p.t > -1.0, np.exp(np.minimum(log_s / p.t, 700.0)) - amin + 0.5,
                 -amin + p.t / np.maximum(p.t - log_s, 1.0))
    c = np.clip(c, lo + 1e-300, hi)
    # any line inside the strip gives the same integral; the saddle only
    # sets the quadrature cost, so a loose tolerance is enough
    active = np.arange(n)
    for _ in range(200):
        f, df = phi_at(c[active], log_s[active])
        lo[active] = np.where(f < 0, c[active], lo[active])
        hi[active] = np.where(f > 0, c[active], hi[active])
        cn = c[active] - f / df
        bad = ~((cn > lo[active]) & (cn < hi[active]))
        cn = np.where(bad, np.where(np.isfinite(hi[active]), 0.5 * (lo[active] + hi[active]),
                                    2 * c[active] + 1), cn)
        done = np.abs(cn - c[active]) <= 1e-10 * np.maximum(1.0, np.abs(cn))
        c[active] = cn
        active = active[~done]
        if active.size == 0:
            break
    return c


def log_meijer_g_t0(a, log_s, *, tol=1e-15, max_points=200_000):
    """``ln G^{t,0}_{0,t}(a | s)`` as a function of ``ln s``.

    Mellin-Barnes integral over the vertical line through the real saddle
    point of the integrand, evaluated by the trapezoidal rule.  Along this
    line the integrand is positive at the centre and decays at least like a
    Gaussian, so the sum converges geometrically and is computed relative to
    the peak.  No overflow occurs for any ``t`` or ``s``.
    """
    p = _as_params(a)
    scalar = np.ndim(log_s) == 0
    L = np.atleast_1d(np.asarray(log_s, dtype=float)).ravel()
    if not np.all(np.isfinite(L)):
        raise ValueError("log_s must be finite")
    vals, cnts = p.values, p.counts
    c = _saddle(p, L)

    curv = (cnts * special.polygamma(1, vals[None, :] + c[:, None])).sum(1)
    width = 1.0 / np.sqrt(curv)
    strip = vals[0] + c
    h = np.minimum(0.5 * width, strip / 6.5)
    F0 = (cnts * special.gammaln(vals[None, :] + c[:, None])).sum(1) - c * L

    total = np.zeros_like(L)
    total_even = np.zeros_like(L)
    active = np.ones(L.size, dtype=bool)
    k0 = 0
    chunk = 32
    while np.any(active):
        idx = np.nonzero(active)[0]
        k = np.arange(k0, k0 + chunk)
        y = h[idx, None] * k[None, :]
        u = c[idx, None] + 1j * y
        F = (cnts[None, None, :] * special.loggamma(vals[None, None, :] + u[:, :, None])).sum(2)
        F = F - u * L[idx, None] - F0[idx, None]
        w = np.exp(F).real
        w[:, k == 0] *= 0.5
        total[idx] += w.sum(1)
        total_even[idx] += w[:, (k % 2) == 0].sum(1)
        k0 += chunk
        # stop once the envelope is negligible and we are past the core
        tail = F.real[:, -8:].max(1)
        finished = (tail < np.log(tol) - 5.0) & (h[idx] * k0 > 8.0 * width[idx])
        active[idx[finished]] = False
        if k0 > max_points:
            raise MeijerGConvergenceError("Meijer G quadrature did not reach its tail",
                                          achieved=float(np.exp(tail.max())))
    integral = h * total
    coarse = 2.0 * h * total_even
    if np.any(integral <= 0):
        raise MeijerGConvergenceError("Meijer G quadrature lost positivity",
                                      achieved=float(np.max(np.abs(coarse - integral))))
    out = F0 + np.log(integral / np.pi)
    return float(out[0]) if scalar else out.reshape(np.shape(log_s))


def meijer_g_t0(a, s):
    """``G^{t,0}_{0,t}(a_1..a_t | s)`` for ``s > 0``."""
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("Meijer G argument must be positive")
    out = np.exp(log_meijer_g_t0(a, np.log(s)))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# combinatorics


def _is_integral(k):
    if isinstance(k, Integral):
        return True
    if isinstance(k, Rational):
        return k.denominator == 1
    return float(k).is_integer()


def fuss_catalan(t, k):
    """Fuss-Catalan number ``binom((t+1)k, k) / (tk + 1)``.

    Integer ``0 <= k <= 20`` returns the exact Python ``int``; other ``k``
    use the gamma-function extension, valid for ``k > -1/(t+1)``.
    """
    if int(t) != t or t < 1:
        raise ValueError("t must be a positive integer")
    t = int(t)
    if _is_integral(k) and 0 <= k <= 20:
        k = int(k)
        num = math.comb((t + 1) * k, k)
        q, r = divmod(num, t * k + 1)
        assert r == 0
        return q
    kf = float(Fraction(k)) if isinstance(k, Rational) else float(k)
    if not kf > -1.0 / (t + 1):
        raise ValueError(f"k must exceed -1/(t+1) = {-1.0 / (t + 1)!r}")
    return math.exp(special.gammaln((t + 1) * kf + 1) - special.gammaln(kf + 1)
                    - special.gammaln(t * kf + 2))


def _bareiss_det(m):
    """Exact determinant of an integer matrix (fraction-free elimination)."""
    a = [list(map(int, row)) for row in m]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[-1][-1]


def _hankel_int(N):
    return [[math.factorial(a + b) for b in range(N)] for a in range(N)]


def _check_hankel_n(N):
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")


def log_hankel_gamma_det(N):
    """``ln det[Gamma(a+b-1)]_{a,b=1..N} = 2 sum_a ln Gamma(a)``, any ``N``."""
    _check_hankel_n(N)
    return 2.0 * float(special.gammaln(np.arange(1, N + 1)).sum())


def hankel_gamma_det(N, method="closed"):
    """``det[Gamma(a+b-1)]_{1<=a,b<=N}``.

    ``method="closed"`` uses ``prod_a Gamma(a)^2``; ``method="direct"``
    evaluates the determinant exactly in integer arithmetic.  Both are limited
    to ``N <= 12``; use :func:`log_hankel_gamma_det` beyond that.
    """
    _check_hankel_n(N)
    if N > HANKEL_MAX_N:
        raise ValueError(f"N={N} overflows doubles; use log_hankel_gamma_det")
    if method == "closed":
        return float(math.prod(math.factorial(a - 1) for a in range(1, N + 1)) ** 2)
    if method == "direct":
        return float(_bareiss_det(_hankel_int(N)))
    raise ValueError(f"unknown method {method!r}")


def _hankel_cofactor_exact(N, j, l):
    """Exact rational cofactor from the Laguerre-sum closed form."""
    pref = math.prod(math.factorial(a) for a in range(N)) ** 2
    s = Fraction(0)
    for k in range(max(j, l) - 1, N):
        s += Fraction(math.factorial(k) ** 2,
                      (math.factorial(j - 1) * math.factorial(l - 1)) ** 2
                      * math.factorial(k - j + 1) * math.factorial(k - l + 1))
    return (-1) ** (j + l) * pref * s


def hankel_cofactor(N, j, l, method="formula"):
    """Cofactor ``C_jl`` of the matrix ``[Gamma(a+b-1)]_{1<=a,b<=N}``.

    ``method="formula"`` sums the Laguerre closed form with ``1/Gamma`` of a
    nonpositive integer taken as exactly zero; ``method="direct"`` evaluates
    the signed minor exactly.
    """
    _check_hankel_n(N)
    if N > HANKEL_MAX_N:
        raise ValueError(f"N={N} is out of range (max {HANKEL_MAX_N})")
    if not (1 <= j <= N and 1 <= l <= N):
        raise ValueError(f"indices must lie in 1..{N}")
    if method == "formula":
        return float(_hankel_cofactor_exact(N, j, l))
    if method == "direct":
        h = _hankel_int(N)
        minor = [[h[a][b] for b in range(N) if b != l - 1] for a in range(N) if a != j - 1]
        return float((-1) ** (j + l) * _bareiss_det(minor))
    raise ValueError(f"unknown method {method!r}")


def hankel_cofactor_matrix(N):
    """All cofactors divided by the determinant, ``C_jl / det`` (exact then rounded)."""
    det = math.prod(math.factorial(a) for a in range(N)) ** 2
    return np.array([[float(_hankel_cofactor_exact(N, j, l) / det) for l in range(1, N + 1)]
                     for j in range(1, N + 1)])


def permanent(M):
    """Permanent of a square matrix by Ryser's inclusion-exclusion formula.

    All ``2^n`` column subsets are enumerated at once, so the cost is
    ``O(2^n n^2)``; sizes above 12 are refused.
    """
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("permanent needs a square matrix")
    n = A.shape[0]
    if n > PERMANENT_MAX_SIZE:
        raise ValueError(f"matrix of size {n} is too large (max {PERMANENT_MAX_SIZE})")
    if n == 0:
        return 1.0
    subsets = (np.arange(1, 2 ** n)[:, None] >> np.arange(n)) & 1
    row_sums = subsets @ A.T
    sizes = subsets.sum(1)
    signs = np.where((n - sizes) % 2 == 0, 1.0, -1.0)
    return (signs * np.prod(row_sums, axis=1)).sum()
