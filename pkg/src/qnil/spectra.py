"""Spectra, resolvent norms and exact connectivity of dilated spectra.

At finite dimension the spectrum is the set of eigenvalues: the continuous,
residual, Fredholm and Weyl spectra are empty and the approximate point
spectrum coincides with the point spectrum, so none of them is computed
separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .matrix_engine import SpectrumSet, _chain_labels, as_operator, eigenvalues

__all__ = [
    "spectrum",
    "resolvent_norm",
    "smallest_singular_values_at",
    "resolvent_norms",
    "Dilation",
    "dilate_and_test",
    "mst_bottleneck",
]

# bytes budget for one batched SVD call
_BATCH_BYTES = 32 * 2**20


def spectrum(A) -> SpectrumSet:
    return eigenvalues(A)


def resolvent_norm(A, z: complex) -> float:
    """``||(zI - A)^-1|| = 1/sigma_min(zI - A)``; ``inf`` on the spectrum."""
    s = smallest_singular_values_at(A, np.array([z]))[0]
    return np.inf if s == 0.0 else 1.0 / s


def smallest_singular_values_at(A, zs, threads: int | None = None) -> np.ndarray:
    """``sigma_min(zI - A)`` for every ``z`` in ``zs`` (any shape), batched."""
    A = as_operator(A)
    zs = np.asarray(zs, dtype=np.complex128)
    flat = zs.ravel()
    n = A.dim
    chunk = max(1, _BATCH_BYTES // (16 * n * n))
    eye = np.eye(n, dtype=np.complex128)
    M = A.entries

    def work(sl):
        block = flat[sl][:, None, None] * eye - M
        return np.linalg.svd(block, compute_uv=False)[:, -1]

    slices = [slice(i, i + chunk) for i in range(0, flat.size, chunk)]
    parts = ordered_map(work, slices, threads)
    out = np.concatenate(parts) if parts else np.zeros(0)
    return out.reshape(zs.shape)


def resolvent_norms(A, zs, threads: int | None = None) -> np.ndarray:
    s = smallest_singular_values_at(A, zs, threads)
    with np.errstate(divide="ignore"):
        return np.where(s == 0.0, np.inf, 1.0 / s)


@dataclass(frozen=True)
class Dilation:
    """Connectivity of the union of open balls of radius ``radius`` about a spectrum."""

    radius: float
    connected: bool
    n_components: int
    labels: np.ndarray
    points: np.ndarray

    def component(self, k: int) -> np.ndarray:
        return self.points[self.labels == k]

    def components(self) -> list[np.ndarray]:
        return [self.component(k) for k in range(self.n_components)]


def dilate_and_test(spec: SpectrumSet, r: float) -> Dilation:
    """Decide connectivity of ``spec + B(0, r)`` exactly via the ball graph.

    Two open balls meet iff their centres are closer than ``2r``; eigenvalues
    within the spectrum's clustering tolerance are always linked.
    """
    if r < 0:
        raise ValueError(f"dilation radius must be nonnegative, got {r}")
    if len(spec) == 0:
        raise ValueError("empty spectrum")
    tol = spec.cluster_tol
    labels = _chain_labels(spec.points, lambda d: (d < 2.0 * r) | (d <= tol))
    k = int(labels.max()) + 1
    return Dilation(float(r), k == 1, k, labels, spec.points)


def mst_bottleneck(spec: SpectrumSet) -> float:
    """Largest edge of a Euclidean minimum spanning tree over the distinct eigenvalues.

    Any closed curve separating the spectrum crosses a segment between two
    eigenvalues at most this long, so some point of the curve lies within
    half of it from the spectrum.
    """
    from scipy.sparse.csgraph import minimum_spanning_tree

    pts = spec.distinct()
    if pts.size < 2:
        return 0.0
    dist = np.abs(pts[:, None] - pts[None, :])
    tree = minimum_spanning_tree(dist).toarray()
    return float(tree.max())
