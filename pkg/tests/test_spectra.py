import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnil.matrix_engine import SpectrumSet, diag
from qnil.spectra import (
    dilate_and_test,
    mst_bottleneck,
    resolvent_norm,
    resolvent_norms,
    smallest_singular_values_at,
    spectrum,
)


def test_resolvent_norm_of_normal_matrix_is_inverse_distance():
    d = np.array([0, 1, 2j])
    A = diag(d)
    for z in (0.5, 3 + 1j, -1j):
        assert resolvent_norm(A, z) == pytest.approx(1 / np.min(np.abs(d - z)), rel=1e-13)
    assert resolvent_norm(A, 1.0) == np.inf


def test_jordan_resolvent_closed_form():
    # ||(z - J)^-1|| for the 2x2 Jordan block at 0
    J = np.array([[0, 1], [0, 0]])
    z = 0.3 + 0.1j
    R = np.array([[1 / z, 1 / z**2], [0, 1 / z]])
    assert resolvent_norm(J, z) == pytest.approx(np.linalg.norm(R, 2), rel=1e-12)


def test_batched_sigma_keeps_shape_and_matches_direct(rng):
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    zs = rng.standard_normal((3, 7)) + 1j * rng.standard_normal((3, 7))
    sig = smallest_singular_values_at(A, zs)
    assert sig.shape == zs.shape
    direct = np.array([np.linalg.svd(z * np.eye(5) - A, compute_uv=False)[-1] for z in zs.ravel()])
    np.testing.assert_allclose(sig.ravel(), direct, rtol=1e-12)
    np.testing.assert_array_equal(smallest_singular_values_at(A, zs, threads=3), sig)
    np.testing.assert_allclose(resolvent_norms(A, zs), 1 / sig)


def test_dilation_uses_open_balls():
    spec = SpectrumSet(np.array([0, 1, 3]), 3)
    assert dilate_and_test(spec, 0.6).n_components == 2
    # balls of radius 1/2 about 0 and 1 only touch, so they stay disjoint
    assert dilate_and_test(spec, 0.5).n_components == 3
    assert dilate_and_test(spec, 1.01).connected
    comps = dilate_and_test(spec, 0.6).components()
    assert sorted(len(c) for c in comps) == [1, 2]
    with pytest.raises(ValueError):
        dilate_and_test(spec, -1)


def test_dilation_merges_numerical_clusters():
    spec = SpectrumSet(np.array([0, 1e-12, 5]), 3, scale=5.0)
    assert dilate_and_test(spec, 0.0).n_components == 2


def _components_bruteforce(points, r):
    parent = list(range(len(points)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(points)), 2):
        if abs(points[i] - points[j]) < 2 * r:
            parent[find(i)] = find(j)
    return len({find(i) for i in range(len(points))})


_pts = st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), min_size=1, max_size=9)


@settings(max_examples=80, deadline=None)
@given(_pts, st.floats(0.01, 3))
def test_dilation_matches_union_find(points, r):
    pts = np.array(points, dtype=np.complex128)
    spec = SpectrumSet(pts, pts.size, scale=1.0, cluster_rtol=0.0)
    assert dilate_and_test(spec, r).n_components == _components_bruteforce(pts, r)


@settings(max_examples=60, deadline=None)
@given(_pts)
def test_mst_bottleneck_is_connectivity_threshold(points):
    pts = np.unique(np.round(np.array(points, dtype=np.complex128), 6))
    spec = SpectrumSet(pts, pts.size, scale=1.0, cluster_rtol=0.0)
    b = mst_bottleneck(spec)
    if pts.size < 2:
        assert b == 0.0
        return
    # smallest pairwise distance at which the threshold graph becomes connected
    for d in sorted({abs(p - q) for p, q in itertools.combinations(pts, 2)}):
        if _components_bruteforce(pts, d / 2 + 1e-12) == 1:
            assert b == pytest.approx(d, rel=1e-12)
            break


def test_spectrum_of_jordan_is_zero():
    assert spectrum(np.diag([1.0, 1.0], 1)).spectral_radius == 0.0
