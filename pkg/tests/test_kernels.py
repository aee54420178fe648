import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ginibre_lyapunov import kernels
from ginibre_lyapunov.kernels import (KernelError, log_eigenvalue_moduli, log_singular_values,
                                      log_singular_values_batch, max_exponent_2x2, qr_positive,
                                      schur_chain_2x2)
from ginibre_lyapunov.rng import derive_stream, sample_ginibre_chain

BACKENDS = ["python", "cython"]


def chain(seed, N, t, beta=2):
    return sample_ginibre_chain(derive_stream(seed, 0), beta, N, t)


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")


# -- oracle agreement ---------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("N,t", [(1, 1), (2, 1), (3, 7), (4, 40), (3, 100)])
def test_log_sv_vs_bigfloat(backend, N, t):
    F = chain(100 * N + t, N, t)
    got = log_singular_values(F, backend=backend).values
    assert oracles.rel_log_err(got, oracles.log_sv(F)) <= 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("N,t", [(2, 1), (3, 9), (4, 50), (4, 100)])
def test_log_ev_vs_bigfloat(backend, N, t):
    F = chain(7 * N + t, N, t)
    spec = log_eigenvalue_moduli(F, backend=backend)
    ref_mod, ref_ang = oracles.log_ev(F)
    assert oracles.rel_log_err(spec.values, ref_mod) <= 1e-12
    d = np.angle(np.exp(1j * (spec.angles - ref_ang)))
    assert np.abs(d).max() < 1e-9


def test_real_chain_complex_pair():
    F = chain(3, 3, 5, beta=1)
    spec = log_eigenvalue_moduli(F)
    z = np.exp(spec.values + 1j * spec.angles)
    # conjugate-closed spectrum
    assert np.abs(z[:, None] - z.conj()[None, :]).min(axis=1).max() < 1e-8 * np.abs(z).max()


# -- invariants ---------------------------------------------------------------

@given(st.integers(1, 5), st.integers(1, 60), st.integers(0, 10 ** 6))
def test_log_det_identity(N, t, seed):
    F = chain(seed, N, t)
    logdet = sum(np.linalg.slogdet(X)[1] for X in F)
    sv = log_singular_values(F).values
    ev = log_eigenvalue_moduli(F).values
    assert sv.sum() / 2 == pytest.approx(logdet, abs=1e-9 * max(1.0, abs(logdet)))
    assert ev.sum() == pytest.approx(logdet, abs=1e-9 * max(1.0, abs(logdet)))


@given(st.integers(1, 5), st.integers(1, 60), st.integers(0, 10 ** 6))
def test_sorted_and_weyl_majorisation(N, t, seed):
    F = chain(seed, N, t)
    sv = log_singular_values(F).values / 2
    ev = log_eigenvalue_moduli(F).values
    assert np.all(np.diff(sv) >= 0) and np.all(np.diff(ev) >= 0)
    # partial sums of the largest moduli never exceed those of singular values
    gap = np.cumsum(sv[::-1]) - np.cumsum(ev[::-1])
    assert np.all(gap >= -1e-9 * max(1.0, np.abs(sv).max()))


@given(st.floats(0.1, 10.0), st.integers(0, 10 ** 6))
def test_scaling_covariance(c, seed):
    F = chain(seed, 3, 20)
    base = log_singular_values(F).values
    scaled = log_singular_values(c * F).values
    assert np.allclose(scaled, base + 2 * 20 * math.log(c), atol=1e-9)


def test_unitary_invariance():
    F = chain(2, 3, 10)
    q, _ = np.linalg.qr(chain(5, 3, 1)[0])
    G = F.copy()
    G[0] = G[0] @ q
    G[-1] = q.conj().T @ G[-1]
    a = log_singular_values(F).values
    b = log_singular_values(G).values
    assert np.allclose(a, b, atol=1e-10)


def test_t1_matches_numpy():
    X = chain(1, 5, 1)[0]
    s = np.linalg.svd(X, compute_uv=False)
    assert np.allclose(log_singular_values(X).values, np.sort(2 * np.log(s)), atol=1e-12)
    ev = np.linalg.eigvals(X)
    assert np.allclose(log_eigenvalue_moduli(X).values, np.sort(np.log(np.abs(ev))), atol=1e-12)


def test_wide_dynamic_range():
    # spans thousands of nats; log-domain identity still exact
    F = chain(4, 5, 3000)
    sv = log_singular_values(F).values
    assert np.isfinite(sv).all() and sv[-1] - sv[0] > 1000
    logdet = sum(np.linalg.slogdet(X)[1] for X in F)
    assert sv.sum() / 2 == pytest.approx(logdet, rel=1e-10)


def test_diagonal_chain():
    d = np.array([[1e-200, 3.0], [1e150, 0.5]])
    F = np.array([np.diag(r) for r in d])
    expect = np.sort(np.log(np.abs(d).prod(0)))
    assert np.allclose(log_eigenvalue_moduli(F).values, expect, atol=1e-10)
    assert np.allclose(log_singular_values(F).values, 2 * expect, atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
def test_singular_product(backend):
    F = np.array([np.eye(2), np.zeros((2, 2))])
    sv = log_singular_values(F, backend=backend)
    assert sv.singular and np.all(np.isneginf(sv.values))
    ev = log_eigenvalue_moduli(F, backend=backend)
    assert np.all(np.isneginf(ev.values))
    rank1 = np.array([[1.0, 0.0], [0.0, 0.0]])
    sv = log_singular_values([rank1, np.eye(2)], backend=backend).values
    assert np.isneginf(sv[0]) and sv[1] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_backends_agree_on_batches(backend):
    A = np.stack([chain(s, 4, 30) for s in range(5)])
    ref = log_singular_values_batch(A, backend="python")
    got = log_singular_values_batch(A, backend=backend)
    assert np.allclose(got, ref, rtol=0, atol=1e-10)
    assert np.allclose(got[2], log_singular_values(A[2]).values, atol=1e-10)


def test_input_validation():
    with pytest.raises(ValueError):
        log_singular_values(np.ones((2, 2, 3)))
    with pytest.raises(ValueError):
        log_singular_values(np.full((1, 2, 2), np.nan))
    with pytest.raises(ValueError):
        log_singular_values_batch(np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        log_singular_values(np.eye(2), backend="fortran")


# -- QR -----------------------------------------------------------------------

@given(st.integers(1, 6), st.integers(0, 10 ** 6))
def test_qr_positive(N, seed):
    A = chain(seed, N, 1)[0]
    q, r = qr_positive(A)
    assert np.allclose(q @ r, A, atol=1e-12)
    assert np.allclose(q.conj().T @ q, np.eye(N), atol=1e-12)
    assert np.all(np.diagonal(r).real > 0) and np.allclose(np.diagonal(r).imag, 0)
    assert np.allclose(np.tril(r, -1), 0)


def test_qr_positive_rank_deficient():
    with pytest.raises(KernelError):
        qr_positive(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        qr_positive(np.ones((2, 3)))


# -- 2x2 Schur chain ----------------------------------------------------------

@given(st.integers(1, 40), st.integers(0, 10 ** 6))
def test_schur_2x2_reconstructs_product(t, seed):
    F = chain(seed, 2, t)
    sd = schur_chain_2x2(F)
    P = np.eye(2, dtype=complex)
    for X in F:
        P = X @ P
    z = np.exp(np.array([sd.log_z1, sd.log_z2]) + 1j * np.array([sd.phase_z1, sd.phase_z2]))
    ev = np.linalg.eigvals(P)
    scale = np.abs(ev).max()
    assert np.abs(ev[:, None] - z[None, :]).min(axis=1).max() <= 1e-8 * scale
    # unitarily invariant norm: |z1|^2 + |z2|^2 + |D|^2 = ||P||_F^2
    fro = np.log(np.sum(np.abs(P) ** 2))
    schur = np.logaddexp.reduce([2 * sd.log_z1, 2 * sd.log_z2, 2 * sd.log_abs_delta])
    assert schur == pytest.approx(fro, abs=1e-9)


@given(st.integers(1, 300), st.integers(0, 10 ** 6))
def test_max_exponent_2x2_vs_svd(t, seed):
    F = chain(seed, 2, t)
    sd = schur_chain_2x2(F)
    mu_max = max_exponent_2x2(sd, t)
    sv = log_singular_values(F).values
    assert mu_max == pytest.approx(sv[-1] / (2 * t), abs=1e-11)
    assert mu_max >= max(sd.log_z1, sd.log_z2) / t


def test_max_exponent_2x2_degenerate_cases():
    from ginibre_lyapunov.kernels import SchurData2x2

    sd = SchurData2x2(1.0, -2.0, 0.0, 0.0, -math.inf)
    assert max_exponent_2x2(sd, 1) == pytest.approx(1.0)
    # z1 = z2 = 0, |Delta| = e: singular values are e and 0
    sd = SchurData2x2(-math.inf, -math.inf, 0.0, 0.0, 1.0)
    assert max_exponent_2x2(sd, 1) == pytest.approx(1.0)
    # very large Delta relative to the diagonal
    sd = SchurData2x2(0.0, 0.0, 0.0, 0.0, 500.0)
    assert max_exponent_2x2(sd, 10) == pytest.approx(500.0 / 10, rel=1e-12)
    with pytest.raises(ValueError):
        max_exponent_2x2(sd, 0)
    with pytest.raises(ValueError):
        schur_chain_2x2(chain(1, 3, 2))


@pytest.mark.parametrize("backend", BACKENDS)
def test_eigen_regression_negative_discriminant(backend):
    # this chain drives the 2x2 window through a square root of a nearly
    # negative real discriminant
    from ginibre_lyapunov.rng import EnsembleSpec

    F = EnsembleSpec("ginibre-beta2", 3, 200, 1000, 1, "ev-lyapunov").factors(556)
    ev = log_eigenvalue_moduli(F, backend=backend).values
    logdet = sum(np.linalg.slogdet(X)[1] for X in F)
    assert ev.sum() == pytest.approx(logdet, rel=1e-12)


@pytest.mark.parametrize("N,t", [(2, 500), (3, 200), (5, 100)])
def test_eigen_no_failures_over_many_chains(N, t):
    for i in range(300):
        F = sample_ginibre_chain(derive_stream(99, i), 2, N, t)
        log_eigenvalue_moduli(F, backend="cython")
