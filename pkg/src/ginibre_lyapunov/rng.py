"""Reproducible random streams and matrix ensembles.

Every experiment sample owns its own stream, keyed by ``(master_seed,
stream_id)`` with ``stream_id`` equal to the sample index.  Streams are
Philox counter-based generators seeded through :class:`numpy.random.SeedSequence`,
so the output of a sample never depends on which worker produced it or in what
order.

Complex Gaussian entries are normalised to ``E|x|^2 = 1``, i.e. the weight
``exp(-Tr X^H X)``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Callable, Optional

import numpy as np

__all__ = [
    "FAMILIES",
    "OBSERVABLES",
    "EnsembleSpec",
    "derive_stream",
    "sample_ginibre",
    "sample_ginibre_chain",
    "sample_gamma",
    "haar_unitary",
    "sample_isotropic_custom",
]

_MASK64 = (1 << 64) - 1

FAMILIES = ("ginibre-beta1", "ginibre-beta2", "ginibre-beta4", "isotropic-custom")
OBSERVABLES = ("sv-lyapunov", "ev-lyapunov", "incremental-sv", "incremental-radius",
               "two-by-two-schur")


def derive_stream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, stream_id)``.

    Both arguments are taken modulo ``2**64`` so signed and unsigned 64-bit
    values map to the same stream.
    """
    seq = np.random.SeedSequence(int(master_seed) & _MASK64,
                                 spawn_key=(int(stream_id) & _MASK64,))
    return np.random.Generator(np.random.Philox(seq))


def _complex_normal(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_ginibre_chain(rng, beta, N, t):
    """Draw ``t`` independent Ginibre factors, shape ``(t, n, n)`` complex.

    ``n = N`` for ``beta`` 1 and 2; ``n = 2N`` for ``beta = 4`` where each
    factor has the quaternion block form ``[[A, B], [-conj(B), conj(A)]]``.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be ≥ 1")
    if int(t) != t or t < 1:
        raise ValueError("t must be ≥ 1")
    N, t = int(N), int(t)
    if beta == 2:
        return _complex_normal(rng, (t, N, N))
    if beta == 1:
        return rng.standard_normal((t, N, N)).astype(complex)
    if beta == 4:
        A = _complex_normal(rng, (t, N, N))
        B = _complex_normal(rng, (t, N, N))
        top = np.concatenate([A, B], axis=2)
        bottom = np.concatenate([-B.conj(), A.conj()], axis=2)
        return np.concatenate([top, bottom], axis=1)
    raise ValueError(f"beta must be 1, 2 or 4, got {beta!r}")


def sample_ginibre(rng, beta, N):
    """A single Ginibre matrix (see :func:`sample_ginibre_chain`)."""
    return sample_ginibre_chain(rng, beta, N, 1)[0]


def sample_gamma(rng, shape, size=None):
    """``Gamma(shape, 1)`` draws."""
    shape = np.asarray(shape, dtype=float)
    if np.any(~(shape > 0)):
        raise ValueError("gamma shape must be > 0")
    return rng.standard_gamma(shape, size=size)


def haar_unitary(rng, N):
    """Haar-distributed ``N x N`` unitary: QR of a Ginibre draw, diag(R) > 0."""
    from .kernels import qr_positive

    q, _ = qr_positive(_complex_normal(rng, (N, N)))
    return q


def sample_isotropic_custom(rng, N, sv_sampler: Callable):
    """``U diag(s) V`` with Haar ``U, V`` and ``s = sv_sampler(rng)``."""
    if int(N) != N or N < 1:
        raise ValueError("N must be ≥ 1")
    s = np.asarray(sv_sampler(rng), dtype=float).ravel()
    if s.size != N:
        raise ValueError(f"sv_sampler returned {s.size} values, expected N={N}")
    if np.any(~(s > 0)):
        raise ValueError("sv_sampler must return strictly positive values")
    u = haar_unitary(rng, N)
    v = haar_unitary(rng, N)
    return (u * s) @ v


@dataclasses.dataclass(frozen=True)
class EnsembleSpec:
    """What to simulate: ensemble family, sizes, sample count, seed, observable."""

    family: str = "ginibre-beta2"
    N: int = 3
    t: int = 1
    samples: int = 1000
    master_seed: int = 0
    observable: str = "sv-lyapunov"
    sv_sampler: Optional[Callable] = dataclasses.field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.observable not in OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable!r}; choose from {OBSERVABLES}")
        for name in ("N", "t", "samples"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be ≥ 1")
        if self.family == "isotropic-custom" and self.sv_sampler is None:
            raise ValueError("isotropic-custom needs an sv_sampler")

    @property
    def beta(self):
        return {"ginibre-beta1": 1, "ginibre-beta2": 2, "ginibre-beta4": 4}.get(self.family)

    @property
    def matrix_size(self):
        """Dimension of the realised complex matrices (2N for quaternions)."""
        return 2 * self.N if self.family == "ginibre-beta4" else self.N

    def factors(self, stream_id):
        """The ``t`` factors of sample ``stream_id``, ordered ``X_1 .. X_t``."""
        rng = derive_stream(self.master_seed, stream_id)
        if self.family == "isotropic-custom":
            return np.stack([sample_isotropic_custom(rng, self.N, self.sv_sampler)
                             for _ in range(self.t)])
        return sample_ginibre_chain(rng, self.beta, self.N, self.t)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d.pop("sv_sampler")
        return d

    def digest(self):
        """Short stable hash identifying this spec."""
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
