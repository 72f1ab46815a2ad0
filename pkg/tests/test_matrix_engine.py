import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qnil.matrix_engine import (
    Operator,
    SpectrumSet,
    adjoint,
    as_operator,
    diag,
    eigenpairs,
    eigenvalues,
    is_strictly_triangular,
    operator_norm,
    singular_values,
    smallest_singular_value,
)


def _rand(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_operator_copies_and_freezes():
    src = np.eye(3)
    A = Operator(src)
    src[0, 0] = 5.0
    assert A.entries[0, 0] == 1.0
    assert A.entries.dtype == np.complex128
    with pytest.raises(ValueError):
        A.entries[0, 0] = 2.0


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros(4), np.zeros((0, 0)), np.array([[np.nan]])])
def test_operator_rejects_invalid_entries(bad):
    with pytest.raises(ValueError):
        Operator(bad)


def test_arithmetic_matches_numpy(rng):
    a, b = _rand(rng, 4), _rand(rng, 4)
    A, B = Operator(a), Operator(b)
    np.testing.assert_allclose((A + B).entries, a + b)
    np.testing.assert_allclose((A - B).entries, a - b)
    np.testing.assert_allclose((A @ B).entries, a @ b)
    np.testing.assert_allclose((2j * A).entries, 2j * a)
    assert A == Operator(a) and A != B


def test_norm_is_cached_and_matches_two_norm(rng):
    a = _rand(rng, 6)
    A = Operator(a)
    assert A.norm_cache is None
    assert operator_norm(A) == pytest.approx(np.linalg.norm(a, 2), rel=1e-14)
    assert A.norm_cache == operator_norm(A)


def test_adjoint_carries_norm(rng):
    A = Operator(_rand(rng, 5))
    nrm = A.norm
    Ah = adjoint(A)
    assert Ah.norm_cache == nrm
    np.testing.assert_array_equal(Ah.entries, A.entries.conj().T)


def test_singular_value_helpers(rng):
    a = _rand(rng, 5)
    s = np.linalg.svd(a, compute_uv=False)
    np.testing.assert_allclose(singular_values(a), s)
    assert smallest_singular_value(a) == pytest.approx(s[-1])


def test_strict_triangularity():
    assert is_strictly_triangular(np.triu(np.ones((4, 4)), 1))
    assert is_strictly_triangular(np.tril(np.ones((4, 4)), -1))
    assert not is_strictly_triangular(np.triu(np.ones((4, 4))))
    assert is_strictly_triangular(np.zeros((3, 3)))


def test_structured_path_returns_exact_zeros(rng):
    M = np.triu(_rand(rng, 12), 1)
    spec = eigenvalues(M)
    assert np.all(spec.points == 0)
    assert spec.scale == pytest.approx(np.linalg.norm(M, 2))


def test_eigenvalues_match_dense_solver(rng):
    a = _rand(rng, 8)
    ours = np.sort_complex(eigenvalues(a).points)
    ref = np.sort_complex(np.linalg.eigvals(a))
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_eigenpairs_are_unit_and_satisfy_definition(rng):
    a = _rand(rng, 6)
    w, V = eigenpairs(a)
    np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0)
    np.testing.assert_allclose(a @ V, V * w, atol=1e-12)


def test_spectrum_clusters_and_distance():
    spec = SpectrumSet(np.array([0.0, 1e-10, 1.0]), 3, scale=1.0)
    assert len(spec.clusters()) == 2
    np.testing.assert_allclose(np.sort(spec.distinct().real), [5e-11, 1.0])
    np.testing.assert_allclose(spec.distance_to([0.5, 2.0 + 0j]), [0.5, 1.0])
    assert spec.spectral_radius == 1.0


def test_spectrum_size_must_match_dimension():
    with pytest.raises(ValueError):
        SpectrumSet(np.zeros(2), 3)


def test_diag_and_as_operator():
    D = diag([1, 2j])
    assert as_operator(D) is D
    np.testing.assert_array_equal(D.entries, np.diag([1, 2j]))


_small = arrays(np.float64, (4, 4), elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(_small, _small)
def test_norm_properties(re, im):
    a = re + 1j * im
    nrm = operator_norm(a)
    # norm dominates every entry and every column norm, and is unitarily invariant
    assert nrm + 1e-12 >= np.abs(a).max()
    assert nrm + 1e-12 >= np.linalg.norm(a, axis=0).max()
    Q = np.linalg.qr(np.arange(16).reshape(4, 4) + np.eye(4) * 7.0)[0]
    assert operator_norm(Q @ a) == pytest.approx(nrm, rel=1e-12, abs=1e-12)
