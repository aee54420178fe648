"""Public product-spectrum API on top of the selected backend."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from . import _kernels_py
from ._kernels_py import KernelError

__all__ = [
    "KernelError",
    "LogSpectrum",
    "SchurData2x2",
    "qr_positive",
    "log_singular_values",
    "log_singular_values_batch",
    "log_eigenvalue_moduli",
    "schur_chain_2x2",
    "max_exponent_2x2",
]


def _backend(name=None):
    if name is None:
        from . import _backend as b
        return b
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


@dataclasses.dataclass(frozen=True)
class LogSpectrum:
    """Sorted log-domain spectrum of a product of ``t`` factors of size ``N``.

    ``kind`` is ``"log-singular"`` (values ``ln s_n``, with ``s_n`` the
    eigenvalues of ``Pi^H Pi``) or ``"log-modulus"`` (values ``ln |Z_n|`` with
    angles ``arg Z_n`` in ``[0, 2 pi)``).
    """

    kind: str
    values: np.ndarray
    t: int
    N: int
    angles: Optional[np.ndarray] = None

    @property
    def singular(self):
        """True when the product is exactly singular (a ``-inf`` value)."""
        return bool(np.isneginf(self.values).any())


@dataclasses.dataclass(frozen=True)
class SchurData2x2:
    """Generalised Schur data of a 2x2 chain: ``Pi = U [[z1, D], [0, z2]] U^H``."""

    log_z1: float
    log_z2: float
    phase_z1: float
    phase_z2: float
    log_abs_delta: float


def _as_chain(factors):
    A = np.asarray(factors)
    if A.ndim == 2:
        A = A[None]
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValueError("factors must be a sequence of square matrices of equal size")
    if A.shape[0] < 1:
        raise ValueError("need at least one factor")
    A = np.ascontiguousarray(A, dtype=np.complex128)
    if not np.isfinite(A).all():
        raise ValueError("factors contain NaN or Inf")
    return A


def qr_positive(A):
    """QR factorisation with a strictly positive real diagonal in ``R``.

    Raises :class:`KernelError` if a diagonal pivot is exactly zero.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("qr_positive needs a square matrix")
    q, r = np.linalg.qr(A.astype(complex))
    d = np.diagonal(r).copy()
    ad = np.abs(d)
    if np.any(ad == 0):
        raise KernelError("matrix is rank deficient: zero pivot in R")
    ph = d / ad
    return q * ph[None, :], r * ph.conj()[:, None]


def log_singular_values(factors, backend=None):
    """``ln s_n`` of ``Pi = X_t ... X_1`` (``factors[0] = X_1``), ascending.

    ``s_n`` are the squared singular values of ``Pi``; the finite-t Lyapunov
    exponents are ``ln s_n / (2t)``.  Accurate in the log domain even when the
    values span thousands of nats.
    """
    A = _as_chain(factors)
    vals = _backend(backend).log_sv_chain(A)
    return LogSpectrum("log-singular", np.asarray(vals), A.shape[0], A.shape[1])


def log_singular_values_batch(chains, backend=None):
    """Ascending ``ln s_n`` for a batch of chains, shape ``(S, t, n, n) -> (S, n)``."""
    A = np.ascontiguousarray(chains, dtype=np.complex128)
    if A.ndim != 4 or A.shape[2] != A.shape[3]:
        raise ValueError("chains must have shape (S, t, n, n)")
    return _backend(backend).log_sv_batch(A)


def log_eigenvalue_moduli(factors, backend=None):
    """``ln |Z_n|`` and ``arg Z_n`` of the eigenvalues of the product, by modulus."""
    A = _as_chain(factors)
    logmod, angles, _ = _backend(backend).periodic_schur(A)
    order = np.argsort(logmod, kind="stable")
    return LogSpectrum("log-modulus", logmod[order], A.shape[0], A.shape[1],
                       angles=angles[order])


def schur_chain_2x2(factors, backend=None):
    """``z1, z2, Delta`` of a chain of 2x2 factors, accumulated in log scale.

    The triangular factors ``T_j`` of the periodic Schur form give
    ``z_i = prod_j T_j[i, i]`` and ``Delta`` is the upper-right entry of
    ``T_t ... T_1``, built by the recursion
    ``D_k = T_k[0,0] D_{k-1} + T_k[0,1] prod_{l<k} T_l[1,1]``.
    """
    A = _as_chain(factors)
    if A.shape[1] != 2:
        raise ValueError("schur_chain_2x2 needs 2x2 factors")
    _, _, T = _backend(backend).periodic_schur(A)
    d0 = T[:, 0, 0]
    d1 = T[:, 1, 1]
    with np.errstate(divide="ignore"):
        log_z1 = float(np.log(np.abs(d0)).sum())
        log_z2 = float(np.log(np.abs(d1)).sum())
    ph1 = float(np.mod(np.angle(d0).sum(), 2 * np.pi))
    ph2 = float(np.mod(np.angle(d1).sum(), 2 * np.pi))
    # D = dm * exp(ds), Z = zm * exp(zs) with |dm|, |zm| <= 1
    dm, ds = 0j, 0.0
    zm, zs = 1 + 0j, 0.0
    for Tk in T:
        top = max(ds, zs)
        if top > -math.inf:
            dm = (Tk[0, 0] * dm * math.exp(ds - top)
                  + Tk[0, 1] * zm * math.exp(zs - top))
            mag = abs(dm)
            if mag > 0:
                dm, ds = dm / mag, top + math.log(mag)
            else:
                dm, ds = 0j, -math.inf
        zm = zm * Tk[1, 1]
        mz = abs(zm)
        if mz == 0:
            zm, zs = 0j, -math.inf
        else:
            zm /= mz
            zs += math.log(mz)
    log_delta = ds + math.log(abs(dm)) if abs(dm) > 0 else -math.inf
    return SchurData2x2(log_z1, log_z2, ph1, ph2, float(log_delta))


def max_exponent_2x2(sd: SchurData2x2, t: int) -> float:
    """Largest finite-t exponent ``ln lambda_max / (2t)`` from 2x2 Schur data.

    ``lambda_max`` is the larger eigenvalue of ``Pi^H Pi``, written as
    ``u (1 + delta)`` with ``u = max(|z1|, |z2|)^2`` and ``delta >= 0``
    computed without cancellation, so the result never falls below
    ``max(ln|z1|, ln|z2|) / t``.
    """
    if int(t) != t or t < 1:
        raise ValueError("t must be ≥ 1")
    l_hi = max(sd.log_z1, sd.log_z2)
    l_lo = min(sd.log_z1, sd.log_z2)
    lu = 2.0 * l_hi
    lw = 2.0 * sd.log_abs_delta
    if lw == -math.inf:
        return lu / (2 * t)
    if lu == -math.inf or lw - lu > 300.0:
        # measure in units of w = |Delta|^2
        u = math.exp(lu - lw) if lu > -math.inf else 0.0
        v = math.exp(2.0 * l_lo - lw) if l_lo > -math.inf else 0.0
        disc = math.sqrt((u - v) ** 2 + 1.0 + 2.0 * u + 2.0 * v)
        return (lw + math.log(0.5 * (1.0 + u + v + disc))) / (2 * t)
    v = math.exp(2.0 * l_lo - lu)
    w = math.exp(lw - lu)
    e = w * (w + 2.0 + 2.0 * v)
    delta = 0.5 * (w + e / (math.sqrt((1.0 - v) ** 2 + e) + (1.0 - v)))
    return (lu + math.log1p(delta)) / (2 * t)
