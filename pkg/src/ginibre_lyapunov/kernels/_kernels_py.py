"""Pure numpy implementation of the product kernels.

This is the reference backend.  The compiled module ``_ckernels`` implements
the same algorithms, operation for operation, and is preferred when present.

Chains are arrays ``A`` of shape ``(t, n, n)`` with ``A[0] = X_1`` the factor
applied first, so the product is ``A[t-1] @ ... @ A[0]``.
"""

import math

import numpy as np

EPS = np.finfo(float).eps
GRADED = 1e-3
MAX_SWEEPS = 60
MAX_QR_ITER = 80


class KernelError(ArithmeticError):
    """A product kernel failed to converge."""


# ---------------------------------------------------------------------------
# singular values: one-sided Jacobi on log-scaled columns


def _col_norm(B):
    # scaled by the largest modulus so tiny columns do not underflow
    m = np.abs(B).max(-2)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sqrt((np.abs(B / safe[..., None, :]) ** 2).sum(-2))


def _normalize_columns(B, ell):
    nrm = _col_norm(B)
    zero = nrm == 0
    safe = np.where(zero, 1.0, nrm)
    B /= safe[..., None, :]
    with np.errstate(divide="ignore"):
        ell += np.where(zero, -np.inf, np.log(safe))


def _jacobi_pair(B, ell, i, j, tol):
    """Orthogonalise columns ``i`` and ``j`` of every sample in the batch.

    Column ``k`` of the running product is ``exp(ell[k]) * B[:, k]`` with unit
    ``B[:, k]``.  Returns the number of samples that needed a rotation.
    """
    bi = B[:, :, i]
    bj = B[:, :, j]
    g = np.einsum("sk,sk->s", bi.conj(), bj)
    ag = np.abs(g)
    act = (ag > tol) & np.isfinite(ell[:, i]) & np.isfinite(ell[:, j])
    if not act.any():
        return 0
    # orient so that column p has the larger scale
    swap = ell[:, j] > ell[:, i]
    li = np.where(swap, ell[:, j], ell[:, i])
    lj = np.where(swap, ell[:, i], ell[:, j])
    bp = np.where(swap[:, None], bj, bi)
    bq = np.where(swap[:, None], bi, bj)
    gp = np.where(swap, g.conj(), g)
    r = np.exp(lj - li)
    q = 1.0 - r * r
    tau = -2.0 * ag / (q + np.sqrt(q * q + 4.0 * ag * ag * r * r))
    rt = r * tau
    c = 1.0 / np.sqrt(1.0 + rt * rt)
    phase = np.where(ag > 0, gp / np.where(ag > 0, ag, 1.0), 1.0)
    bq_t = bq * phase.conj()[:, None]
    new_p = bp - (tau * r * r)[:, None] * bq_t
    new_q = tau[:, None] * bp + bq_t
    np_ = _col_norm(new_p[:, :, None])[:, 0]
    nq_ = _col_norm(new_q[:, :, None])[:, 0]
    lc = np.log(c)
    with np.errstate(divide="ignore"):
        lp = li + lc + np.log(np_)
        lq = lj + lc + np.log(nq_)
    new_p = new_p / np.where(np_ > 0, np_, 1.0)[:, None]
    new_q = new_q / np.where(nq_ > 0, nq_, 1.0)[:, None]
    ni = np.where(swap[:, None], new_q, new_p)
    nj = np.where(swap[:, None], new_p, new_q)
    li_new = np.where(swap, lq, lp)
    lj_new = np.where(swap, lp, lq)
    B[act, :, i] = ni[act]
    B[act, :, j] = nj[act]
    ell[act, i] = li_new[act]
    ell[act, j] = lj_new[act]
    return int(act.sum())


def log_sv_batch(A):
    """Log squared singular values ``ln s_n`` of each product, shape ``(S, n)``.

    ``A`` has shape ``(S, t, n, n)``.  The running product of every sample is
    held as ``B diag(exp(ell))`` with orthonormal ``B``; after each new factor
    the columns are re-orthogonalised by one-sided Jacobi sweeps.  Values are
    returned ascending; an exactly singular product yields ``-inf``.
    """
    A = np.asarray(A, dtype=complex)
    S, t, n, _ = A.shape
    B = np.broadcast_to(np.eye(n, dtype=complex), (S, n, n)).copy()
    ell = np.zeros((S, n))
    tol = n * EPS
    for k in range(t):
        B = A[:, k] @ B
        _normalize_columns(B, ell)
        for _ in range(MAX_SWEEPS):
            order = np.argsort(-ell, axis=1, kind="stable")
            B = np.take_along_axis(B, order[:, None, :], axis=2)
            ell = np.take_along_axis(ell, order, axis=1)
            rotated = 0
            for i in range(n - 1):
                for j in range(i + 1, n):
                    rotated += _jacobi_pair(B, ell, i, j, tol)
            if rotated == 0:
                break
        else:
            raise KernelError("one-sided Jacobi did not converge")
    return np.sort(2.0 * ell, axis=1)


def log_sv_chain(A):
    """Single-chain version of :func:`log_sv_batch`."""
    return log_sv_batch(np.asarray(A)[None])[0]


# ---------------------------------------------------------------------------
# eigenvalue moduli: periodic Schur decomposition by periodic QR


def _givens(f, g):
    """``(c, s)`` with ``[[c, s], [-conj(s), c]] @ [f, g] = [r, 0]``."""
    af = abs(f)
    ag = abs(g)
    if ag == 0.0:
        return 1.0, 0j
    if af == 0.0:
        return 0.0, (g / ag).conjugate()
    nrm = math.hypot(af, ag)
    return af / nrm, (f / af) * g.conjugate() / nrm


def _rot_rows(M, p, c, s):
    """Rows ``p, p+1`` of ``M`` times ``[[c, s], [-conj(s), c]]``."""
    x = M[p].copy()
    y = M[p + 1]
    M[p] = c * x + s * y
    M[p + 1] = -s.conjugate() * x + c * y


def _rot_cols(M, p, c, s):
    """Columns ``p, p+1`` of ``M`` times the adjoint of the row rotation."""
    x = M[:, p].copy()
    y = M[:, p + 1]
    M[:, p] = c * x + s.conjugate() * y
    M[:, p + 1] = -s * x + c * y


def _chase(T, p, c, s):
    """Apply a row rotation to the last factor and restore triangularity.

    The rotation acts on rows ``p, p+1`` of ``T[t-1]``; the implied change of
    basis is propagated around the cycle through ``T[0], ..., T[t-2]``, each of
    which gets a fill-in at ``(p+1, p)`` that is rotated away in turn.
    """
    t = T.shape[0]
    _rot_rows(T[t - 1], p, c, s)
    _rot_cols(T[0], p, c, s)
    for j in range(t - 1):
        c, s = _givens(T[j, p, p], T[j, p + 1, p])
        _rot_rows(T[j], p, c, s)
        T[j, p + 1, p] = 0
        _rot_cols(T[j + 1], p, c, s)


def _trailing_product(T, lo, hi):
    """Scaled trailing block of ``T[t-2] @ ... @ T[0]`` on rows/cols ``m..hi``."""
    t = T.shape[0]
    m = max(lo, hi - 2)
    R = np.eye(hi - m + 1, dtype=complex)
    scale = 0.0
    for j in range(t - 1):
        R = T[j, m:hi + 1, m:hi + 1] @ R
        mx = np.abs(R).max()
        if mx == 0:
            return m, R, -np.inf
        R /= mx
        scale += math.log(mx)
    return m, R, scale


def _eig2(P):
    """Eigenvalues of a 2x2 block, larger modulus first."""
    a, b, c, d = P[0, 0], P[0, 1], P[1, 0], P[1, 1]
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    mid = 0.5 * (a + d)
    l1 = mid + disc if abs(mid + disc) >= abs(mid - disc) else mid - disc
    det = a * d - b * c
    l2 = det / l1 if l1 != 0 else 0j
    return l1, l2


def _shift(P):
    """Wilkinson shift, or the small eigenvalue when the pair is strongly graded.

    In a graded product the dominant eigenvalue migrates to the top of the
    window on its own; shifting by it would cancel the whole first column.
    """
    l1, l2 = _eig2(P)
    if abs(l2) < GRADED * abs(l1):
        return l2
    return l1 if abs(l1 - P[1, 1]) <= abs(l2 - P[1, 1]) else l2


def _qr_step(T, lo, hi, exceptional):
    t = T.shape[0]
    H = T[t - 1]
    m, R, scale = _trailing_product(T, lo, hi)
    off = hi - 1 - m
    P = H[hi - 1:hi + 1, m:hi + 1] @ R[:, off:]
    if hi - lo == 1 and not exceptional:
        # two-by-two window: rotate the dominant eigenvector to the top
        l1, _ = _eig2(P)
        v1 = (P[0, 1], l1 - P[0, 0])
        v2 = (l1 - P[1, 1], P[1, 0])
        f, g = v1 if abs(v1[0]) + abs(v1[1]) >= abs(v2[0]) + abs(v2[1]) else v2
        if f == 0 and g == 0:
            H[hi, lo] = 0
            return
        c, s = _givens(f, g)
        _chase(T, lo, c, s)
        return
    if exceptional:
        sigma = P[1, 1] + 0.75 * abs(P[1, 0]) * np.exp(1j * exceptional)
    else:
        sigma = _shift(P)
    # first column of the product restricted to the window, up to a scale
    lr = 0.0
    ph = 1.0 + 0j
    for j in range(t - 1):
        d = T[j, lo, lo]
        ad = abs(d)
        if ad == 0:
            lr = -np.inf
            break
        lr += math.log(ad)
        ph *= d / ad
    top = max(lr, scale)
    if not np.isfinite(top):
        x0, x1 = ph * H[lo, lo], ph * H[lo + 1, lo]
    else:
        w1 = math.exp(lr - top) if np.isfinite(lr) else 0.0
        w2 = math.exp(scale - top) if np.isfinite(scale) else 0.0
        x0 = w1 * ph * H[lo, lo] - w2 * sigma
        x1 = w1 * ph * H[lo + 1, lo]
    c, s = _givens(x0, x1)
    _chase(T, lo, c, s)
    for k in range(lo, hi - 1):
        c, s = _givens(H[k + 1, k], H[k + 2, k])
        _chase(T, k + 1, c, s)
        H[k + 2, k] = 0


def _hessenberg_triangular(T):
    """Make ``T[0..t-2]`` upper triangular and ``T[t-1]`` upper Hessenberg."""
    t, n, _ = T.shape
    for j in range(t - 1):
        q, r = np.linalg.qr(T[j])
        T[j] = np.triu(r)
        T[j + 1] = T[j + 1] @ q
    H = T[t - 1]
    for k in range(n - 2):
        for i in range(n - 1, k + 1, -1):
            c, s = _givens(H[i - 1, k], H[i, k])
            _chase(T, i - 1, c, s)
            H[i, k] = 0


def periodic_schur(A):
    """Periodic Schur form of a chain; returns ``(log_moduli, angles, T)``.

    ``T[j]`` are upper triangular with ``A[j] = Q_j T[j] Q_{j-1}^H`` and
    ``Q_t = Q_0``; the eigenvalues of the product are the products of the
    diagonals.  Moduli and angles are in Schur order (not sorted).
    """
    T = np.array(A, dtype=complex, copy=True)
    t, n, _ = T.shape
    _hessenberg_triangular(T)
    H = T[t - 1]
    hi = n - 1
    it = 0
    total = 0
    while hi > 0:
        lo = 0
        for l in range(hi, 0, -1):
            ref = abs(H[l, l]) + abs(H[l - 1, l - 1])
            if ref == 0:
                ref = abs(H[l - 1, l]) + abs(H[l, l - 1])
            if abs(H[l, l - 1]) <= EPS * ref:
                H[l, l - 1] = 0
                lo = l
                break
        if lo == hi:
            hi -= 1
            it = 0
            continue
        it += 1
        total += 1
        if it > MAX_QR_ITER:
            raise KernelError("periodic QR did not converge")
        exceptional = 1.0 + it if it % 10 == 0 else 0.0
        _qr_step(T, lo, hi, exceptional)
    d = np.diagonal(T, axis1=1, axis2=2)
    ad = np.abs(d)
    with np.errstate(divide="ignore"):
        logmod = np.log(ad).sum(0)
    angles = np.mod(np.angle(d).sum(0), 2 * np.pi)
    return logmod, angles, T
