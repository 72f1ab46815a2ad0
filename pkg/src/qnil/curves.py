"""Separating curves, the semicontinuity radius and perturbation trials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matrix_engine import SpectrumSet, as_operator, eigenvalues, operator_norm
from .spectra import dilate_and_test, smallest_singular_values_at

__all__ = [
    "SeparationError",
    "CurveHitError",
    "SeparatingCurve",
    "separating_curve",
    "rectangle",
    "points_inside",
    "distance_to_curve",
    "delta_bound",
    "DeltaConvergence",
    "delta_convergence",
    "TrialResult",
    "semicontinuity_trial",
    "random_perturbation",
    "max_resolvent_on_curve",
]


class SeparationError(ValueError):
    """No separating curve exists (or the rectangle construction cannot isolate the component)."""


class CurveHitError(ValueError):
    """A sampled point of the curve lies on the spectrum."""


@dataclass(frozen=True, eq=False)
class SeparatingCurve:
    """Closed polygon, counterclockwise; the last vertex connects back to the first."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.complex128).ravel()
        if v.size < 3:
            raise ValueError("a closed polygon needs at least 3 vertices")
        x, y = v.real, v.imag
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area2 < 0:
            v = v[::-1]
        elif area2 == 0:
            raise ValueError("degenerate polygon")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1)

    @property
    def length(self) -> float:
        a, b = self.edges
        return float(np.sum(np.abs(b - a)))

    def sample(self, samples_per_edge: int) -> np.ndarray:
        """``samples_per_edge`` equispaced points per edge, starting at each vertex."""
        if samples_per_edge < 1:
            raise ValueError("samples_per_edge must be >= 1")
        a, b = self.edges
        s = np.arange(samples_per_edge) / samples_per_edge
        return (a[:, None] + (b - a)[:, None] * s[None, :]).ravel()

    def contains(self, z) -> np.ndarray:
        return points_inside(self, z)

    def distance(self, z) -> np.ndarray:
        return distance_to_curve(self, z)


def rectangle(re_min: float, re_max: float, im_min: float, im_max: float) -> SeparatingCurve:
    return SeparatingCurve(np.array([
        complex(re_min, im_min), complex(re_max, im_min), complex(re_max, im_max), complex(re_min, im_max),
    ]))


def points_inside(curve: SeparatingCurve, z) -> np.ndarray:
    """Even-odd ray casting; points exactly on an edge may go either way."""
    z = np.asarray(z, dtype=np.complex128)
    x, y = z.real[..., None], z.imag[..., None]
    a, b = curve.edges
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    crosses = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_int = ax + (y - ay) * (bx - ax) / (by - ay)
    hits = crosses & (x < x_int)
    return (np.sum(hits, axis=-1) % 2) == 1


def distance_to_curve(curve: SeparatingCurve, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    a, b = curve.edges
    d = b - a
    w = z[..., None] - a
    s = np.clip((w.real * d.real + w.imag * d.imag) / np.abs(d) ** 2, 0.0, 1.0)
    return np.min(np.abs(w - s * d), axis=-1)


def _select(components: list[np.ndarray], selector) -> int:
    if selector is None or selector == "farthest":
        return int(np.argmax([np.min(np.abs(c)) for c in components]))
    if selector == "nearest":
        return int(np.argmin([np.min(np.abs(c)) for c in components]))
    if callable(selector):
        return int(selector(components))
    idx = int(selector)
    if not 0 <= idx < len(components):
        raise SeparationError(f"component index {idx} out of range ({len(components)} components)")
    return idx


def separating_curve(
    spec: SpectrumSet,
    component_selector: str | int | Callable | None = "farthest",
    radius: float = 0.0,
) -> SeparatingCurve:
    """Axis-aligned rectangle around one component of ``spec + B(0, radius)``.

    The selected component's eigenvalues are enclosed with a margin of half
    the distance to the nearest eigenvalue of any other component.  The
    default selector takes the component farthest from the origin.
    """
    dil = dilate_and_test(spec, radius)
    if dil.n_components < 2:
        raise SeparationError(f"spectrum is connected at radius {radius}; no separating curve exists")
    comps = dil.components()
    k = _select(comps, component_selector)
    inside = comps[k]
    outside = np.concatenate([c for j, c in enumerate(comps) if j != k])
    gap = float(np.min(np.abs(inside[:, None] - outside[None, :])))
    margin = 0.5 * gap
    curve = rectangle(
        inside.real.min() - margin, inside.real.max() + margin,
        inside.imag.min() - margin, inside.imag.max() + margin,
    )
    if np.any(points_inside(curve, outside)) or np.any(distance_to_curve(curve, outside) <= 0.0):
        raise SeparationError("bounding rectangle of the selected component captures other eigenvalues")
    return curve


def _curve_sigmas(A, curve: SeparatingCurve, samples_per_edge: int, threads=None):
    xi = curve.sample(samples_per_edge)
    sig = smallest_singular_values_at(A, xi, threads)
    floor = 1e-13 * max(operator_norm(A), 1.0)
    hit = np.nonzero(sig <= floor)[0]
    if hit.size:
        raise CurveHitError(f"curve passes through the spectrum near {xi[hit[0]]}")
    return xi, sig


def delta_bound(A, curve: SeparatingCurve, samples_per_edge: int = 64, threads: int | None = None) -> float:
    """``min over sampled xi of 1/||R_A(xi)||``, the semicontinuity radius."""
    A = as_operator(A)
    _, sig = _curve_sigmas(A, curve, samples_per_edge, threads)
    return float(sig.min())


def max_resolvent_on_curve(A, curve: SeparatingCurve, samples_per_edge: int = 64, threads=None):
    """``(max ||R_A(xi)||, argmax xi)`` over the sampled curve."""
    xi, sig = _curve_sigmas(as_operator(A), curve, samples_per_edge, threads)
    i = int(np.argmin(sig))
    return 1.0 / float(sig[i]), complex(xi[i])


@dataclass(frozen=True)
class DeltaConvergence:
    coarse: float
    fine: float
    coarse_samples: int
    fine_samples: int
    rel_change: float
    converged: bool


def delta_convergence(A, curve: SeparatingCurve, coarse: int = 64, fine: int = 1024, rtol: float = 0.05):
    d0 = delta_bound(A, curve, coarse)
    d1 = delta_bound(A, curve, fine)
    rel = abs(d0 - d1) / d1
    return DeltaConvergence(d0, d1, coarse, fine, rel, rel <= rtol)


@dataclass(frozen=True)
class TrialResult:
    outcome: str  # "separated" | "merged" | "curve_hit"
    n_inside: int
    n_outside: int
    min_distance: float


def semicontinuity_trial(A, curve: SeparatingCurve, B, tol: float = 1e-8) -> TrialResult:
    """Check whether ``curve`` still separates the spectrum of ``A + B``."""
    A, B = as_operator(A), as_operator(B)
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    pts = eigenvalues(A + B).points
    dist = distance_to_curve(curve, pts)
    inside = points_inside(curve, pts)
    n_in = int(inside.sum())
    n_out = pts.size - n_in
    dmin = float(dist.min())
    if dmin < tol:
        outcome = "curve_hit"
    elif n_in and n_out:
        outcome = "separated"
    else:
        outcome = "merged"
    return TrialResult(outcome, n_in, n_out, dmin)


def random_perturbation(n: int, norm: float, rng: np.random.Generator):
    """Complex Gaussian ``n x n`` matrix rescaled to operator norm ``norm``."""
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G * (norm / np.linalg.norm(G, 2))
