# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled product kernels (see ``_kernels_py`` for the reference version)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, hypot, cos, sin, copysign, INFINITY, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double EPS = 2.220446049250313e-16
cdef int MAX_SWEEPS = 60
# intermediate products only need near-orthogonal columns: B diag(exp(ell))
# stays an exact representation, and the last step is swept to full precision
cdef double LOOSE_TOL = 1e-9
cdef int MAX_QR_ITER = 80
cdef double GRADED = 1e-3


from ._kernels_py import KernelError


cdef inline double cabs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs_(double complex z) noexcept nogil:
    return hypot(z.real, z.imag)


cdef inline double complex conj_(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


# ---------------------------------------------------------------------------
# singular values


cdef double _vec_norm(double complex* x, int n, int stride) noexcept nogil:
    # scaled by the largest modulus so tiny vectors do not underflow
    cdef int k
    cdef double m = 0, a, acc = 0
    for k in range(n):
        a = cabs_(x[k * stride])
        if a > m:
            m = a
    if m == 0:
        return 0
    for k in range(n):
        a = cabs_(x[k * stride]) / m
        acc += a * a
    return m * sqrt(acc)


cdef int _jacobi_pair(double complex* B, double* ell, int n, int i, int j,
                      double tol) noexcept nogil:
    """Orthogonalise columns i and j (column-contiguous storage)."""
    cdef double complex* bi = B + i * n
    cdef double complex* bj = B + j * n
    cdef double complex g = 0
    cdef int k
    for k in range(n):
        g = g + conj_(bi[k]) * bj[k]
    cdef double ag = cabs_(g)
    if not (ag > tol) or not isfinite(ell[i]) or not isfinite(ell[j]):
        return 0
    cdef int p = i, q = j
    if ell[j] > ell[i]:
        p = j
        q = i
        g = conj_(g)
    cdef double complex* bp = B + p * n
    cdef double complex* bq = B + q * n
    cdef double r = exp(ell[q] - ell[p])
    cdef double qq = 1.0 - r * r
    cdef double tau = -2.0 * ag / (qq + sqrt(qq * qq + 4.0 * ag * ag * r * r))
    cdef double rt = r * tau
    cdef double c = 1.0 / sqrt(1.0 + rt * rt)
    cdef double complex phase = g / ag
    cdef double complex ph_c = conj_(phase)
    cdef double trr = tau * r * r
    cdef double np_ = 0, nq_ = 0
    cdef double complex xp, xq
    for k in range(n):
        xq = bq[k] * ph_c
        xp = bp[k]
        bp[k] = xp - trr * xq
        bq[k] = tau * xp + xq
    np_ = _vec_norm(bp, n, 1)
    nq_ = _vec_norm(bq, n, 1)
    cdef double lc = log(c)
    if np_ > 0:
        ell[p] = ell[p] + lc + log(np_)
        for k in range(n):
            bp[k] = bp[k] / np_
    else:
        ell[p] = -INFINITY
    if nq_ > 0:
        ell[q] = ell[q] + lc + log(nq_)
        for k in range(n):
            bq[k] = bq[k] / nq_
    else:
        ell[q] = -INFINITY
    return 1


cdef void _sort_columns(double complex* B, double* ell, int n) noexcept nogil:
    """Insertion sort of columns by descending scale."""
    cdef int a, b, k
    cdef double key
    cdef double complex tmp
    for a in range(1, n):
        b = a
        while b > 0 and ell[b] > ell[b - 1]:
            key = ell[b]
            ell[b] = ell[b - 1]
            ell[b - 1] = key
            for k in range(n):
                tmp = B[b * n + k]
                B[b * n + k] = B[(b - 1) * n + k]
                B[(b - 1) * n + k] = tmp
            b -= 1


cdef int _log_sv_one(const double complex[:, :, ::1] A, double* out,
                     double complex* B, double complex* W, double* ell) noexcept nogil:
    cdef int t = A.shape[0]
    cdef int n = A.shape[1]
    cdef int step, r, c, k, sweep, rotated, i, j
    cdef double complex acc
    cdef double nrm
    cdef double tight = n * EPS
    cdef double tol
    for c in range(n):
        ell[c] = 0
        for r in range(n):
            B[c * n + r] = 1.0 if r == c else 0.0
    for step in range(t):
        tol = tight if step == t - 1 else LOOSE_TOL
        for c in range(n):
            nrm = 0
            for r in range(n):
                acc = 0
                for k in range(n):
                    acc = acc + A[step, r, k] * B[c * n + k]
                W[c * n + r] = acc
            nrm = _vec_norm(&W[c * n], n, 1)
            if nrm > 0:
                ell[c] = ell[c] + log(nrm)
                for r in range(n):
                    B[c * n + r] = W[c * n + r] / nrm
            else:
                ell[c] = -INFINITY
                for r in range(n):
                    B[c * n + r] = 0
        for sweep in range(MAX_SWEEPS + 1):
            if sweep == MAX_SWEEPS:
                return 1
            _sort_columns(B, ell, n)
            rotated = 0
            for i in range(n - 1):
                for j in range(i + 1, n):
                    rotated += _jacobi_pair(B, ell, n, i, j, tol)
            if rotated == 0:
                break
    for c in range(n):
        out[c] = 2.0 * ell[c]
    return 0


def log_sv_batch(A):
    """Log squared singular values of each chain in ``A`` (shape ``(S, t, n, n)``)."""
    cdef const double complex[:, :, :, ::1] Av = np.ascontiguousarray(A, dtype=np.complex128)
    cdef Py_ssize_t S = Av.shape[0]
    cdef int n = Av.shape[2]
    out = np.empty((S, n))
    cdef double[:, ::1] ov = out
    cdef double complex* B = <double complex*> malloc(n * n * sizeof(double complex))
    cdef double complex* W = <double complex*> malloc(n * n * sizeof(double complex))
    cdef double* ell = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t s
    cdef int fail = 0
    try:
        with nogil:
            for s in range(S):
                if _log_sv_one(Av[s], &ov[s, 0], B, W, ell):
                    fail = 1
                    break
    finally:
        free(B)
        free(W)
        free(ell)
    if fail:
        raise KernelError("one-sided Jacobi did not converge")
    out.sort(axis=1)
    return out


def log_sv_chain(A):
    """Single-chain version of :func:`log_sv_batch`."""
    return log_sv_batch(np.asarray(A)[None])[0]


# ---------------------------------------------------------------------------
# periodic Schur


cdef inline void _givens(double complex f, double complex g,
                         double* c, double complex* s) noexcept nogil:
    cdef double af = cabs_(f)
    cdef double ag = cabs_(g)
    cdef double nrm
    if ag == 0.0:
        c[0] = 1.0
        s[0] = 0
    elif af == 0.0:
        c[0] = 0.0
        s[0] = conj_(g / ag)
    else:
        nrm = hypot(af, ag)
        c[0] = af / nrm
        s[0] = (f / af) * conj_(g) / nrm


cdef inline void _rot_rows(double complex[:, :, ::1] T, int j, int p,
                           double c, double complex s) noexcept nogil:
    cdef int n = T.shape[2]
    cdef int k
    cdef double complex x, y
    cdef double complex sc = conj_(s)
    for k in range(n):
        x = T[j, p, k]
        y = T[j, p + 1, k]
        T[j, p, k] = c * x + s * y
        T[j, p + 1, k] = -sc * x + c * y


cdef inline void _rot_cols(double complex[:, :, ::1] T, int j, int p,
                           double c, double complex s) noexcept nogil:
    cdef int n = T.shape[1]
    cdef int k
    cdef double complex x, y
    cdef double complex sc = conj_(s)
    for k in range(n):
        x = T[j, k, p]
        y = T[j, k, p + 1]
        T[j, k, p] = c * x + sc * y
        T[j, k, p + 1] = -s * x + c * y


cdef void _chase(double complex[:, :, ::1] T, int p, double c,
                 double complex s) noexcept nogil:
    cdef int t = T.shape[0]
    cdef int j
    _rot_rows(T, t - 1, p, c, s)
    _rot_cols(T, 0, p, c, s)
    for j in range(t - 1):
        _givens(T[j, p, p], T[j, p + 1, p], &c, &s)
        _rot_rows(T, j, p, c, s)
        T[j, p + 1, p] = 0
        _rot_cols(T, j + 1, p, c, s)


cdef void _triangularize_chain(double complex[:, :, ::1] T) noexcept nogil:
    """QR of T[0..t-2] by Givens rotations, pushing Q into the next factor."""
    cdef int t = T.shape[0]
    cdef int n = T.shape[1]
    cdef int j, k, i
    cdef double c
    cdef double complex s
    for j in range(t - 1):
        for k in range(n - 1):
            for i in range(n - 1, k, -1):
                _givens(T[j, i - 1, k], T[j, i, k], &c, &s)
                _rot_rows(T, j, i - 1, c, s)
                T[j, i, k] = 0
                _rot_cols(T, j + 1, i - 1, c, s)
    cdef int h = t - 1
    for k in range(n - 2):
        for i in range(n - 1, k + 1, -1):
            _givens(T[h, i - 1, k], T[h, i, k], &c, &s)
            _chase(T, i - 1, c, s)
            T[h, i, k] = 0


cdef inline double complex csqrt_(double complex z) noexcept nogil:
    # principal root; the larger component first to avoid cancellation
    cdef double rz = cabs_(z)
    cdef double re, im
    if rz == 0:
        return 0
    if z.real >= 0:
        re = sqrt(0.5 * (rz + z.real))
        im = z.imag / (2.0 * re)
    else:
        im = copysign(sqrt(0.5 * (rz - z.real)), z.imag)
        re = z.imag / (2.0 * im)
    return re + 1j * im


cdef void _eig2(double complex a, double complex b, double complex c,
                double complex d, double complex* l1, double complex* l2) noexcept nogil:
    """Eigenvalues of a 2x2 block, larger modulus first."""
    cdef double complex half = 0.5 * (a - d)
    cdef double complex disc = csqrt_(half * half + b * c)
    cdef double complex mid = 0.5 * (a + d)
    if cabs_(mid + disc) >= cabs_(mid - disc):
        l1[0] = mid + disc
    else:
        l1[0] = mid - disc
    if cabs_(l1[0]) != 0:
        l2[0] = (a * d - b * c) / l1[0]
    else:
        l2[0] = 0


cdef void _qr_step(double complex[:, :, ::1] T, int lo, int hi,
                   double exceptional) noexcept nogil:
    cdef int t = T.shape[0]
    cdef int h = t - 1
    cdef int m = hi - 2 if hi - 2 > lo else lo
    cdef int nb = hi - m + 1
    cdef double complex R[9]
    cdef double complex Rn[9]
    cdef int a, b, k, j
    cdef double mx, scale = 0
    cdef double complex acc
    for a in range(nb):
        for b in range(nb):
            R[a * 3 + b] = 1.0 if a == b else 0.0
    for j in range(t - 1):
        mx = 0
        for a in range(nb):
            for b in range(nb):
                acc = 0
                for k in range(nb):
                    acc = acc + T[j, m + a, m + k] * R[k * 3 + b]
                Rn[a * 3 + b] = acc
                if cabs_(acc) > mx:
                    mx = cabs_(acc)
        if mx == 0:
            scale = -INFINITY
            break
        for a in range(nb):
            for b in range(nb):
                R[a * 3 + b] = Rn[a * 3 + b] / mx
        scale += log(mx)
    cdef int off = hi - 1 - m
    cdef double complex P[4]
    for a in range(2):
        for b in range(2):
            acc = 0
            for k in range(nb):
                acc = acc + T[h, hi - 1 + a, m + k] * R[k * 3 + off + b]
            P[a * 2 + b] = acc
    cdef double complex sigma, l1, l2, f, g
    cdef double c
    cdef double complex s
    if hi - lo == 1 and exceptional == 0:
        # two-by-two window: rotate the dominant eigenvector to the top
        _eig2(P[0], P[1], P[2], P[3], &l1, &l2)
        if cabs_(P[1]) + cabs_(l1 - P[0]) >= cabs_(l1 - P[3]) + cabs_(P[2]):
            f = P[1]
            g = l1 - P[0]
        else:
            f = l1 - P[3]
            g = P[2]
        if cabs_(f) == 0 and cabs_(g) == 0:
            T[h, hi, lo] = 0
            return
        _givens(f, g, &c, &s)
        _chase(T, lo, c, s)
        return
    if exceptional != 0:
        sigma = P[3] + 0.75 * cabs_(P[2]) * (cos(exceptional) + 1j * sin(exceptional))
    else:
        _eig2(P[0], P[1], P[2], P[3], &l1, &l2)
        if cabs_(l2) < GRADED * cabs_(l1):
            sigma = l2
        elif cabs_(l1 - P[3]) <= cabs_(l2 - P[3]):
            sigma = l1
        else:
            sigma = l2
    cdef double lr = 0
    cdef double complex ph = 1.0
    cdef double complex d
    cdef double ad
    for j in range(t - 1):
        d = T[j, lo, lo]
        ad = cabs_(d)
        if ad == 0:
            lr = -INFINITY
            break
        lr += log(ad)
        ph = ph * (d / ad)
    cdef double top = lr if lr > scale else scale
    cdef double complex x0, x1
    cdef double w1, w2
    if not isfinite(top):
        x0 = ph * T[h, lo, lo]
        x1 = ph * T[h, lo + 1, lo]
    else:
        w1 = exp(lr - top) if isfinite(lr) else 0.0
        w2 = exp(scale - top) if isfinite(scale) else 0.0
        x0 = w1 * ph * T[h, lo, lo] - w2 * sigma
        x1 = w1 * ph * T[h, lo + 1, lo]
    _givens(x0, x1, &c, &s)
    _chase(T, lo, c, s)
    for k in range(lo, hi - 1):
        _givens(T[h, k + 1, k], T[h, k + 2, k], &c, &s)
        _chase(T, k + 1, c, s)
        T[h, k + 2, k] = 0


cdef int _periodic_schur(double complex[:, :, ::1] T) noexcept nogil:
    cdef int t = T.shape[0]
    cdef int n = T.shape[1]
    cdef int h = t - 1
    _triangularize_chain(T)
    cdef int hi = n - 1
    cdef int it = 0, lo, l
    cdef double ref
    while hi > 0:
        lo = 0
        l = hi
        while l > 0:
            ref = cabs_(T[h, l, l]) + cabs_(T[h, l - 1, l - 1])
            if ref == 0:
                ref = cabs_(T[h, l - 1, l]) + cabs_(T[h, l, l - 1])
            if cabs_(T[h, l, l - 1]) <= EPS * ref:
                T[h, l, l - 1] = 0
                lo = l
                break
            l -= 1
        if lo == hi:
            hi -= 1
            it = 0
            continue
        it += 1
        if it > MAX_QR_ITER:
            return 1
        _qr_step(T, lo, hi, (1.0 + it) if it % 10 == 0 else 0.0)
    return 0


def periodic_schur(A):
    """Periodic Schur form of a chain; returns ``(log_moduli, angles, T)``."""
    T = np.array(A, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, :, ::1] Tv = T
    cdef int fail
    with nogil:
        fail = _periodic_schur(Tv)
    if fail:
        raise KernelError("periodic QR did not converge")
    d = np.diagonal(T, axis1=1, axis2=2)
    with np.errstate(divide="ignore"):
        logmod = np.log(np.abs(d)).sum(0)
    angles = np.mod(np.angle(d).sum(0), 2 * np.pi)
    return logmod, angles, T
