import numpy as np
import pytest

from qnil.curves import (
    CurveHitError,
    SeparatingCurve,
    SeparationError,
    delta_bound,
    delta_convergence,
    distance_to_curve,
    max_resolvent_on_curve,
    points_inside,
    random_perturbation,
    rectangle,
    semicontinuity_trial,
    separating_curve,
)
from qnil.matrix_engine import SpectrumSet, diag
from qnil.spectra import spectrum


def test_polygon_orientation_and_length():
    cw = SeparatingCurve(np.array([0, 1j, 1 + 1j, 1]))
    x, y = cw.vertices.real, cw.vertices.imag
    assert np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
    assert rectangle(0, 2, 0, 1).length == pytest.approx(6.0)
    with pytest.raises(ValueError):
        SeparatingCurve(np.array([0, 1]))
    with pytest.raises(ValueError):
        SeparatingCurve(np.array([0, 1, 2]))


def test_sampling_starts_at_vertices():
    r = rectangle(0, 1, 0, 1)
    s = r.sample(4)
    assert s.size == 16
    np.testing.assert_allclose(s[::4], r.vertices)
    with pytest.raises(ValueError):
        r.sample(0)


def test_inside_and_distance_for_rectangle():
    r = rectangle(-1, 1, -2, 2)
    z = np.array([0, 0.9 + 1.9j, 1.5, -3j, 2 + 3j])
    np.testing.assert_array_equal(points_inside(r, z), [True, True, False, False, False])
    # distances to the axis-aligned box by hand
    np.testing.assert_allclose(distance_to_curve(r, z), [1.0, 0.1, 0.5, 1.0, np.hypot(1, 1)], atol=1e-15)


def test_separating_curve_encloses_selected_component():
    spec = SpectrumSet(np.array([0, 0.1, 2 + 1j]), 3)
    # 0 and 0.1 join into one component once the balls have radius 0.1
    far = separating_curve(spec, radius=0.1)
    assert far.contains([2 + 1j])[0] and not far.contains([0, 0.1]).any()
    near = separating_curve(spec, "nearest", radius=0.1)
    assert near.contains([0, 0.1]).all() and not near.contains([2 + 1j])[0]
    by_index = separating_curve(spec, 0, radius=0.1)
    assert by_index.contains([0])[0] != by_index.contains([2 + 1j])[0]
    with pytest.raises(SeparationError):
        separating_curve(spec, 5)


def test_no_separating_curve_when_connected():
    with pytest.raises(SeparationError):
        separating_curve(SpectrumSet(np.array([0, 1]), 2), radius=0.6)
    with pytest.raises(SeparationError):
        separating_curve(SpectrumSet(np.zeros(3), 3))


def test_delta_of_normal_matrix_is_distance_to_spectrum():
    # for normal A, 1/||R(xi)|| = dist(xi, spectrum); the nearest point of the box is an edge midpoint
    A = diag([0, 3])
    curve = rectangle(2, 5, -2, 2)
    assert delta_bound(A, curve, samples_per_edge=64) == pytest.approx(1.0, rel=1e-12)
    nrm, xi = max_resolvent_on_curve(A, curve, 64)
    assert nrm == pytest.approx(1.0, rel=1e-12) and xi == pytest.approx(2 + 0j)
    conv = delta_convergence(A, curve, 8, 64)
    assert conv.converged and conv.rel_change < 1e-12


def test_curve_through_eigenvalue_is_rejected():
    with pytest.raises(CurveHitError):
        delta_bound(diag([0, 3]), rectangle(3, 4, -1, 1), samples_per_edge=4)


def test_semicontinuity_trial_outcomes():
    A = diag([0, 3])
    curve = rectangle(2, 4, -1, 1)
    d = delta_bound(A, curve)
    assert semicontinuity_trial(A, curve, 0.9 * d * np.eye(2)).outcome == "separated"
    moved = semicontinuity_trial(A, curve, diag([0, -3]))
    assert moved.outcome == "merged" and moved.n_inside == 0
    hit = semicontinuity_trial(A, curve, diag([0, -1]))
    assert hit.outcome == "curve_hit" and hit.min_distance < 1e-8
    with pytest.raises(ValueError):
        semicontinuity_trial(A, curve, np.eye(3))


def test_small_perturbations_keep_separation(rng):
    A = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 2]], dtype=complex)
    curve = separating_curve(spectrum(A))
    d = delta_bound(A, curve, 256)
    for _ in range(50):
        B = random_perturbation(3, 0.99 * d, rng)
        assert semicontinuity_trial(A, curve, B).outcome == "separated"


def test_random_perturbation_norm(rng):
    B = random_perturbation(6, 0.25, rng)
    assert np.linalg.norm(B, 2) == pytest.approx(0.25, rel=1e-12)
    assert np.iscomplexobj(B)
