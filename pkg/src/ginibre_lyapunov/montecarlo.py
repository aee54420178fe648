"""Reproducible Monte-Carlo experiments on products of random matrices.

Sample ``i`` of an experiment always draws from stream ``i`` of the master
seed, so results are bit-identical for any thread count.  A kernel failure
aborts the run; samples are never silently dropped or redrawn.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np
from scipy import special, stats

from . import kernels
from .kernels import KernelError
from .laws import DensityModel
from .rng import EnsembleSpec, derive_stream

__all__ = [
    "ExperimentError",
    "SampleSet",
    "Histogram",
    "TwoByTwoReport",
    "run_sv_experiment",
    "run_ev_experiment",
    "run_2x2_bounds",
    "check_spectral_inequalities",
    "newman_projector_average",
    "newman_target",
    "histogram",
    "ks_distance",
    "ks_two_sample",
]

CHUNK = 64
REAL_ANGLE_TOL = 1e-7


class ExperimentError(RuntimeError):
    """A sample failed; ``failures`` lists ``(sample_index, message)``."""

    def __init__(self, failures):
        self.failures = list(failures)
        first = self.failures[0]
        super().__init__(f"{len(self.failures)} sample(s) failed; first: sample {first[0]}: {first[1]}")


@dataclasses.dataclass(frozen=True)
class SampleSet:
    """Per-sample exponents (rows sorted ascending) with optional angles.

    ``extra`` holds per-sample side columns, e.g. ``real_fraction`` for
    real Ginibre eigenvalue runs.
    """

    spec: EnsembleSpec
    rows: np.ndarray
    kind: str
    angles: Optional[np.ndarray] = None
    extra: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        r = self.rows
        if r.ndim != 2 or r.shape[0] != self.spec.samples:
            raise ValueError("rows must have one line per sample")
        if not np.isfinite(r).all():
            raise ValueError("sample rows contain non-finite values")
        if np.any(np.diff(r, axis=1) < 0):
            raise ValueError("sample rows must be sorted ascending")

    def component(self, which="pooled"):
        """Flattened values (``"pooled"``) or the order statistic ``b`` (1-based)."""
        if which == "pooled":
            return self.rows.ravel()
        b = int(which)
        if not 1 <= b <= self.rows.shape[1]:
            raise ValueError(f"component must be 'pooled' or in 1..{self.rows.shape[1]}")
        return self.rows[:, b - 1]


@dataclasses.dataclass(frozen=True)
class Histogram:
    lo: float
    hi: float
    n_bins: int
    counts: np.ndarray
    density: np.ndarray
    provenance: str
    outside: int = 0

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.n_bins + 1)

    @property
    def centers(self):
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])


# ---------------------------------------------------------------------------
# parallel driver


def _chunked(n, fn, threads):
    """Apply ``fn(lo, hi)`` to consecutive index blocks and stack results in order."""
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    threads = max(int(threads or 1), 1)
    if threads == 1 or len(bounds) == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    return parts


def _fail_on_nonfinite(values, lo):
    bad = np.nonzero(~np.isfinite(values).all(axis=1))[0]
    if bad.size:
        raise ExperimentError([(lo + int(i), "singular or non-finite spectrum") for i in bad])


def _pairs(values):
    """Drop the Kramers partner of every doubly degenerate quaternion value."""
    return values[..., ::2]


# ---------------------------------------------------------------------------
# experiments


def run_sv_experiment(spec: EnsembleSpec, threads=1, backend=None) -> SampleSet:
    """Finite-t singular-value exponents ``mu_n = ln s_n / (2t)`` per sample.

    For ``observable="incremental-sv"`` the rows hold ``lambda_n = exp(mu_n)``.
    Quaternion runs report each Kramers-degenerate value once.
    """
    if spec.observable not in ("sv-lyapunov", "incremental-sv"):
        raise ValueError("run_sv_experiment needs observable sv-lyapunov or incremental-sv")

    def work(lo, hi):
        chains = np.stack([spec.factors(i) for i in range(lo, hi)])
        try:
            ls = kernels.log_singular_values_batch(chains, backend=backend)
        except KernelError as exc:
            raise ExperimentError([(lo, str(exc))]) from exc
        _fail_on_nonfinite(ls, lo)
        return ls

    ls = np.concatenate(_chunked(spec.samples, work, threads))
    if spec.family == "ginibre-beta4":
        ls = _pairs(ls)
    mu = ls / (2.0 * spec.t)
    rows = np.exp(mu) if spec.observable == "incremental-sv" else mu
    return SampleSet(spec, rows, spec.observable)


def _ev_matrix(spec, threads, backend):
    def work(lo, hi):
        out = np.empty((hi - lo, spec.matrix_size))
        ang = np.empty_like(out)
        for i in range(lo, hi):
            try:
                sp = kernels.log_eigenvalue_moduli(spec.factors(i), backend=backend)
            except KernelError as exc:
                raise ExperimentError([(i, str(exc))]) from exc
            out[i - lo] = sp.values
            ang[i - lo] = sp.angles
        _fail_on_nonfinite(out, lo)
        return out, ang

    parts = _chunked(spec.samples, work, threads)
    logmod = np.concatenate([p[0] for p in parts])
    angles = np.concatenate([p[1] for p in parts])
    return logmod, angles


def _ev_gamma(spec):
    shapes = np.arange(1, spec.N + 1, dtype=float)
    if spec.family == "ginibre-beta4":
        shapes = 2.0 * shapes
    rows = np.empty((spec.samples, spec.N))
    for i in range(spec.samples):
        g = derive_stream(spec.master_seed, i).standard_gamma(shapes[:, None], size=(spec.N, spec.t))
        rows[i] = np.sort(np.log(g).sum(axis=1)) / (2.0 * spec.t)
    return rows


def run_ev_experiment(spec: EnsembleSpec, method="matrix", threads=1, backend=None) -> SampleSet:
    """Finite-t eigenvalue-modulus exponents ``nu_n = ln|Z_n| / t`` per sample.

    ``method="matrix"`` diagonalises the product (periodic Schur) and also
    returns the eigenvalue phases.  ``method="gamma-product"`` draws each
    ``|Z_n|^2`` directly as a product of ``t`` independent ``Gamma(n)``
    variables (``Gamma(2n)`` for quaternions), which has the same joint law of
    moduli for complex and quaternion Ginibre products; no angles are produced.

    Real Ginibre runs add ``extra["real_fraction"]``, the fraction of real
    eigenvalues in each sample.  Quaternion runs report each member of a
    complex-conjugate pair once, with its phase folded into ``[0, pi]``.
    """
    if spec.observable not in ("ev-lyapunov", "incremental-radius"):
        raise ValueError("run_ev_experiment needs observable ev-lyapunov or incremental-radius")
    extra = {}
    angles = None
    if method == "gamma-product":
        if spec.family not in ("ginibre-beta2", "ginibre-beta4"):
            raise ValueError("the gamma-product method is valid for complex and quaternion Ginibre only")
        nu = _ev_gamma(spec)
    elif method == "matrix":
        logmod, angles = _ev_matrix(spec, threads, backend)
        if spec.family == "ginibre-beta1":
            extra["real_fraction"] = (np.abs(np.sin(angles)) <= REAL_ANGLE_TOL).mean(axis=1)
        if spec.family == "ginibre-beta4":
            logmod = _pairs(logmod)
            folded = np.where(angles > np.pi, 2 * np.pi - angles, angles)
            angles = _pairs(folded)
        nu = logmod / spec.t
    else:
        raise ValueError(f"unknown method {method!r}")
    rows = np.exp(nu) if spec.observable == "incremental-radius" else nu
    return SampleSet(spec, rows, spec.observable, angles=angles, extra=extra)


@dataclasses.dataclass(frozen=True)
class TwoByTwoReport:
    """Per-sample 2x2 quantities and a summary of the exact checks.

    ``mu_max``: largest exponent from the Schur data; ``lower``: the bound
    ``max(ln|z1|, ln|z2|) / t``; ``sum_residual``: ``|mu_1 + mu_2 - nu_1 - nu_2|``
    with ``mu`` from the singular-value kernel and ``nu`` from the Schur data.
    """

    mu_max: np.ndarray
    mu_max_svd: np.ndarray
    lower: np.ndarray
    lower_ok: np.ndarray
    sum_residual: np.ndarray
    target: Optional[float]

    @property
    def violations(self):
        return int((~self.lower_ok).sum())

    def summary(self):
        n = self.mu_max.size
        return {
            "samples": n,
            "lower_bound_violations": self.violations,
            "max_sum_residual": float(self.sum_residual.max()),
            "mean_mu_max": float(self.mu_max.mean()),
            "stderr_mu_max": float(self.mu_max.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"),
            "target": self.target,
            "max_schur_svd_gap": float(np.abs(self.mu_max - self.mu_max_svd).max()),
        }


def run_2x2_bounds(spec: EnsembleSpec, backend=None) -> TwoByTwoReport:
    """Check the 2x2 lower bound and sum identity on every sample.

    ``target`` is the large-t limit of the largest exponent, ``psi(2)/2``,
    for complex Ginibre factors; ``None`` otherwise.
    """
    if spec.N != 2 or spec.family == "ginibre-beta4":
        raise ValueError("run_2x2_bounds needs N = 2 with 2x2 factors")
    n = spec.samples
    mu_max = np.empty(n)
    mu_svd = np.empty(n)
    lower = np.empty(n)
    resid = np.empty(n)
    for i in range(n):
        A = spec.factors(i)
        try:
            sd = kernels.schur_chain_2x2(A, backend=backend)
            ls = kernels.log_singular_values(A, backend=backend).values
        except KernelError as exc:
            raise ExperimentError([(i, str(exc))]) from exc
        mu_max[i] = kernels.max_exponent_2x2(sd, spec.t)
        mu_svd[i] = ls[-1] / (2 * spec.t)
        lower[i] = max(sd.log_z1, sd.log_z2) / spec.t
        resid[i] = abs(ls.sum() / (2 * spec.t) - (sd.log_z1 + sd.log_z2) / spec.t)
    target = float(special.psi(2.0)) / 2 if spec.family == "ginibre-beta2" else None
    return TwoByTwoReport(mu_max, mu_svd, lower, mu_max >= lower, resid, target)


def check_spectral_inequalities(factors, backend=None):
    """Exact relations between singular values and eigenvalues of one product.

    Returns a dict with
    ``weyl_ok``: every top-k partial sum of ``ln|Z|`` is at most the top-k
    partial sum of ``ln sigma`` (``k < n``); ``det_residual``: the largest of
    ``|sum ln sigma - sum ln|Z||`` and ``|sum ln sigma - sum_j ln|det X_j||``,
    relative to ``max(1, |sum ln sigma|)``.
    """
    A = np.asarray(factors)
    if A.ndim == 2:
        A = A[None]
    lsig = 0.5 * kernels.log_singular_values(A, backend=backend).values[::-1]
    lz = kernels.log_eigenvalue_moduli(A, backend=backend).values[::-1]
    cs, cz = np.cumsum(lsig), np.cumsum(lz)
    logdet = float(np.linalg.slogdet(A)[1].sum())
    scale = max(1.0, abs(cs[-1]))
    det_res = max(abs(cs[-1] - cz[-1]), abs(cs[-1] - logdet)) / scale
    return {"weyl_ok": bool(np.all(cz[:-1] <= cs[:-1])), "det_residual": float(det_res),
            "partial_gap": cs - cz}


# ---------------------------------------------------------------------------
# Newman projector average


def newman_target(N, k):
    """``(1/2) sum_{j=N-k+1}^{N} psi(j)``, the top-k sum of limiting exponents."""
    if not 1 <= k <= N:
        raise ValueError("need 1 ≤ k ≤ N")
    return 0.5 * float(special.psi(np.arange(N - k + 1, N + 1)).sum())


def newman_projector_average(N, k, samples, seed):
    """Monte-Carlo ``(1/2) < ln det P_k^H X^H X P_k >`` over single complex Ginibre ``X``.

    ``P_k`` embeds ``C^k`` as the first ``k`` coordinates, so ``X P_k`` is the
    first ``k`` columns of ``X``.  Returns ``(estimate, stderr)``.
    """
    if not 1 <= k <= N:
        raise ValueError("need 1 ≤ k ≤ N")
    if samples < 2:
        raise ValueError("samples must be ≥ 2")
    vals = np.empty(samples)
    block = 8192
    for j, lo in enumerate(range(0, samples, block)):
        hi = min(lo + block, samples)
        rng = derive_stream(seed, j)
        z = rng.standard_normal((hi - lo, N, k, 2))
        Y = (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)
        vals[lo:hi] = 0.5 * np.linalg.slogdet(np.conj(np.swapaxes(Y, 1, 2)) @ Y)[1]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# summaries


def histogram(sset: SampleSet, component="pooled", lo=None, hi=None, n_bins=100) -> Histogram:
    """Normalised density histogram of one component or of all values pooled."""
    x = sset.component(component)
    lo = float(x.min()) if lo is None else float(lo)
    hi = float(x.max()) if hi is None else float(hi)
    if int(n_bins) != n_bins or n_bins < 1:
        raise ValueError("n_bins must be ≥ 1")
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    if not lo < hi:
        raise ValueError("histogram range is empty: need lo < hi")
    counts, edges = np.histogram(x, bins=int(n_bins), range=(lo, hi))
    inside = int(counts.sum())
    if inside == 0:
        raise ValueError(f"no samples fall in [{lo}, {hi}]")
    density = counts / (inside * np.diff(edges))
    return Histogram(lo, hi, int(n_bins), counts, density, sset.spec.digest(), x.size - inside)


def ks_distance(empirical: Union[SampleSet, Histogram, np.ndarray], model: DensityModel,
                component="pooled") -> float:
    """``sup |F_emp - F_model|``.

    A histogram is compared at its bin edges only, so the value is a lower
    bound on the sample KS distance.
    """
    if isinstance(empirical, Histogram):
        e = empirical.edges
        F_emp = np.concatenate([[0.0], np.cumsum(empirical.counts)]) / empirical.counts.sum()
        Fm = model.cdf(e)
        Fm = (Fm - Fm[0]) / (Fm[-1] - Fm[0])
        return float(np.abs(F_emp - Fm).max())
    x = empirical.component(component) if isinstance(empirical, SampleSet) else np.ravel(empirical)
    return float(stats.kstest(x, model.cdf).statistic)


def ks_two_sample(x, y) -> float:
    """Two-sample KS statistic."""
    return float(stats.ks_2samp(np.ravel(x), np.ravel(y)).statistic)
