import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ginibre_lyapunov.rng import (EnsembleSpec, derive_stream, haar_unitary, sample_gamma,
                                  sample_ginibre, sample_ginibre_chain, sample_isotropic_custom)


def test_stream_reproducible():
    a = derive_stream(7, 3).standard_normal(5)
    b = derive_stream(7, 3).standard_normal(5)
    assert np.array_equal(a, b)


def test_streams_differ():
    draws = [derive_stream(7, i).standard_normal(4) for i in range(3)]
    draws.append(derive_stream(8, 0).standard_normal(4))
    for i in range(4):
        for j in range(i):
            assert not np.array_equal(draws[i], draws[j])


def test_stream_accepts_signed_seed():
    a = derive_stream(-1, -2).integers(0, 2 ** 62, 3)
    b = derive_stream(2 ** 64 - 1, 2 ** 64 - 2).integers(0, 2 ** 62, 3)
    assert np.array_equal(a, b)


def test_streams_are_uncorrelated():
    x = np.array([derive_stream(1, i).standard_normal() for i in range(4000)])
    y = np.array([derive_stream(1, i).standard_normal(2)[1] for i in range(4000)])
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(4000)
    assert stats.kstest(x, "norm").pvalue > 1e-3


def test_ginibre_shapes_and_errors():
    rng = derive_stream(0, 0)
    assert sample_ginibre_chain(rng, 2, 3, 5).shape == (5, 3, 3)
    assert sample_ginibre_chain(rng, 4, 3, 2).shape == (2, 6, 6)
    assert sample_ginibre(rng, 1, 4).shape == (4, 4)
    with pytest.raises(ValueError, match="N must be ≥ 1"):
        sample_ginibre_chain(rng, 2, 0, 1)
    with pytest.raises(ValueError, match="t must be ≥ 1"):
        sample_ginibre_chain(rng, 2, 2, 0)
    with pytest.raises(ValueError):
        sample_ginibre_chain(rng, 3, 2, 1)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_entry_second_moment(beta):
    X = sample_ginibre_chain(derive_stream(11, 0), beta, 20, 200)
    m2 = np.mean(np.abs(X) ** 2)
    assert m2 == pytest.approx(1.0, abs=0.02)
    if beta == 1:
        assert np.all(X.imag == 0)
    else:
        # circular entries: E x^2 = 0
        assert abs(np.mean(X ** 2)) < 0.02


def test_beta4_quaternion_structure():
    X = sample_ginibre(derive_stream(3, 1), 4, 3)
    A, B = X[:3, :3], X[:3, 3:]
    assert np.array_equal(X[3:, :3], -B.conj())
    assert np.array_equal(X[3:, 3:], A.conj())
    # spectrum closed under conjugation
    ev = np.linalg.eigvals(X)
    assert np.abs(ev[:, None] - ev.conj()[None, :]).min(axis=1).max() < 1e-10


def test_beta2_squared_modulus_is_exponential():
    X = sample_ginibre_chain(derive_stream(5, 0), 2, 10, 100)
    assert stats.kstest(np.abs(X.ravel()) ** 2, "expon").pvalue > 1e-3


def test_sample_gamma():
    g = sample_gamma(derive_stream(2, 0), 3.0, size=20000)
    assert stats.kstest(g, "gamma", args=(3.0,)).pvalue > 1e-3
    with pytest.raises(ValueError):
        sample_gamma(derive_stream(2, 0), 0.0)


@given(st.integers(1, 6), st.integers(0, 2 ** 32))
def test_haar_unitary_is_unitary(N, seed):
    U = haar_unitary(derive_stream(seed, 0), N)
    assert np.allclose(U.conj().T @ U, np.eye(N), atol=1e-12)


def test_haar_phase_distribution():
    # the trace of a Haar 2x2 unitary has E|tr U|^2 = 1
    tr = np.array([np.trace(haar_unitary(derive_stream(9, i), 2)) for i in range(4000)])
    assert np.mean(np.abs(tr) ** 2) == pytest.approx(1.0, abs=0.1)
    assert abs(np.mean(tr)) < 0.1


def test_isotropic_custom():
    s = np.array([0.5, 2.0, 3.0])
    X = sample_isotropic_custom(derive_stream(1, 0), 3, lambda r: s)
    assert np.allclose(np.sort(np.linalg.svd(X, compute_uv=False)), s, rtol=1e-12)
    with pytest.raises(ValueError):
        sample_isotropic_custom(derive_stream(1, 0), 3, lambda r: [1.0, 2.0])
    with pytest.raises(ValueError):
        sample_isotropic_custom(derive_stream(1, 0), 2, lambda r: [1.0, 0.0])


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown family"):
        EnsembleSpec(family="wishart")
    with pytest.raises(ValueError, match="unknown observable"):
        EnsembleSpec(observable="trace")
    with pytest.raises(ValueError, match="N must be ≥ 1"):
        EnsembleSpec(N=0)
    with pytest.raises(ValueError, match="samples must be ≥ 1"):
        EnsembleSpec(samples=0)
    with pytest.raises(ValueError):
        EnsembleSpec(family="isotropic-custom")


def test_spec_factors_reproducible_and_ordered():
    spec = EnsembleSpec("ginibre-beta2", N=2, t=3, samples=4, master_seed=42)
    F = spec.factors(1)
    assert F.shape == (3, 2, 2)
    assert np.array_equal(F, spec.factors(1))
    assert not np.array_equal(F, spec.factors(2))
    assert np.array_equal(F, sample_ginibre_chain(derive_stream(42, 1), 2, 2, 3))


def test_spec_properties_and_digest():
    spec = EnsembleSpec("ginibre-beta4", N=2, t=3)
    assert spec.beta == 4 and spec.matrix_size == 4
    assert spec.digest() == EnsembleSpec("ginibre-beta4", N=2, t=3).digest()
    assert spec.digest() != EnsembleSpec("ginibre-beta4", N=2, t=4).digest()
    assert "sv_sampler" not in spec.as_dict()
