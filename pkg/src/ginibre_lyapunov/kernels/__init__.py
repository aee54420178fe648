"""Stable spectral kernels for long matrix products.

The hot loops live in a compiled extension (``_ckernels``).  When it is not
available, or when ``GINIBRE_LYAPUNOV_PURE_PYTHON=1`` is set, the numpy
implementation in ``_kernels_py`` is used instead.  ``BACKEND`` names the one
in effect.
"""

import os

from . import _kernels_py

if os.environ.get("GINIBRE_LYAPUNOV_PURE_PYTHON", "") not in ("", "0"):
    _backend = _kernels_py
else:
    try:
        from . import _ckernels as _backend
    except ImportError:  # extension not built
        _backend = _kernels_py

BACKEND = "cython" if _backend is not _kernels_py else "python"

from .linalg import (  # noqa: E402
    KernelError,
    LogSpectrum,
    SchurData2x2,
    log_eigenvalue_moduli,
    log_singular_values,
    log_singular_values_batch,
    max_exponent_2x2,
    qr_positive,
    schur_chain_2x2,
)

__all__ = [
    "BACKEND",
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
