"""Dense complex matrix substrate.

Every operator in the package is a finite square complex matrix wrapped in
:class:`Operator`.  The wrapper is immutable apart from a write-once cache of
the operator (spectral) norm, so instances can be shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "EigenvalueError",
    "Operator",
    "SpectrumSet",
    "as_operator",
    "operator_norm",
    "smallest_singular_value",
    "singular_values",
    "eigenvalues",
    "eigenpairs",
    "adjoint",
    "diag",
    "is_strictly_triangular",
    "CLUSTER_RTOL",
]

# eigenvalues closer than CLUSTER_RTOL * ||A|| are one numerical point
CLUSTER_RTOL = 1e-8
BACKWARD_RTOL = 1e-10


class EigenvalueError(RuntimeError):
    """Raised when the dense eigensolver fails or returns an inaccurate result."""


class Operator:
    """A square complex matrix with a cached operator norm.

    ``entries`` is copied, converted to ``complex128`` and frozen.
    """

    __slots__ = ("_entries", "_norm")

    def __init__(self, entries, norm: float | None = None):
        arr = np.array(entries, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("operator must have positive dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("operator entries must be finite")
        arr.setflags(write=False)
        self._entries = arr
        self._norm = None if norm is None else float(norm)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def norm_cache(self) -> float | None:
        return self._norm

    @property
    def norm(self) -> float:
        return operator_norm(self)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    def __add__(self, other):
        return Operator(self._entries + _entries_of(other))

    def __sub__(self, other):
        return Operator(self._entries - _entries_of(other))

    def __mul__(self, scalar):
        return Operator(self._entries * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return Operator(self._entries @ _entries_of(other))

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return np.array_equal(self._entries, other._entries)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Operator(dim={self.dim}, norm_cache={self._norm!r})"


def _entries_of(obj) -> np.ndarray:
    if isinstance(obj, Operator):
        return obj.entries
    return np.asarray(obj, dtype=np.complex128)


def as_operator(obj) -> Operator:
    """Return ``obj`` unchanged if it is an Operator, otherwise wrap it."""
    if isinstance(obj, Operator):
        return obj
    return Operator(obj)


def singular_values(A) -> np.ndarray:
    A = as_operator(A)
    return np.linalg.svd(A.entries, compute_uv=False)


def operator_norm(A) -> float:
    """Largest singular value of ``A``; stored on the operator after first use."""
    A = as_operator(A)
    if A._norm is None:
        # idempotent: concurrent writers store the same value
        A._norm = float(singular_values(A)[0])
    return A._norm


def smallest_singular_value(A) -> float:
    return float(singular_values(A)[-1])


def is_strictly_triangular(M: np.ndarray) -> bool:
    """True when ``M`` is strictly upper or strictly lower triangular (exact zeros)."""
    return not np.any(np.tril(M)) or not np.any(np.triu(M))


@dataclass(frozen=True, eq=False)
class SpectrumSet:
    """Eigenvalues of an operator, with multiplicity.

    ``scale`` is the operator norm of the source; it sets the tolerance used to
    merge numerically coincident eigenvalues.
    """

    points: np.ndarray
    source_dim: int
    scale: float = 1.0
    cluster_rtol: float = CLUSTER_RTOL
    _clusters: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128).ravel()
        if pts.size != self.source_dim:
            raise ValueError(f"expected {self.source_dim} eigenvalues, got {pts.size}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    def __iter__(self):
        return iter(self.points)

    @property
    def cluster_tol(self) -> float:
        return self.cluster_rtol * self.scale

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.points))) if self.points.size else 0.0

    def clusters(self) -> list[np.ndarray]:
        """Groups of eigenvalues chained together at distance <= cluster_tol."""
        if self._clusters is None:
            labels = _chain_labels(self.points, lambda d: d <= self.cluster_tol)
            groups = [self.points[labels == k] for k in range(labels.max() + 1)] if len(labels) else []
            object.__setattr__(self, "_clusters", groups)
        return self._clusters

    def distinct(self) -> np.ndarray:
        """One representative (the mean) per numerical cluster."""
        return np.array([c.mean() for c in self.clusters()], dtype=np.complex128)

    def distance_to(self, z) -> np.ndarray:
        """Distance from each point of ``z`` to the nearest eigenvalue."""
        z = np.asarray(z, dtype=np.complex128)
        return np.min(np.abs(z[..., None] - self.points), axis=-1)


def _chain_labels(points: np.ndarray, linked) -> np.ndarray:
    """Connected-component labels of the graph with edges ``linked(|p_i - p_j|)``."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n = points.size
    if n == 0:
        return np.zeros(0, dtype=int)
    dist = np.abs(points[:, None] - points[None, :])
    adj = linked(dist)
    np.fill_diagonal(adj, False)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    return labels


def eigenvalues(A, *, structured: bool = True, check: bool = True) -> SpectrumSet:
    """All eigenvalues of ``A`` with multiplicity.

    Strictly triangular inputs take an exact fast path (every eigenvalue is 0)
    unless ``structured`` is False.  With ``check`` the backward error of each
    eigenpair is verified against ``1e-10 * ||A||``.
    """
    A = as_operator(A)
    M = A.entries
    scale = operator_norm(A)
    if structured and is_strictly_triangular(M):
        return SpectrumSet(np.zeros(A.dim, dtype=np.complex128), A.dim, scale)
    try:
        if check:
            w, V = np.linalg.eig(M)
        else:
            w = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigenvalue iteration did not converge (dim={A.dim}): {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenvalueError("eigensolver returned non-finite eigenvalues")
    if check:
        resid = np.linalg.norm(M @ V - V * w, axis=0) / np.linalg.norm(V, axis=0)
        worst = float(resid.max())
        if worst > BACKWARD_RTOL * max(scale, np.finfo(float).tiny):
            raise EigenvalueError(
                f"eigenpair backward error {worst:.3e} exceeds {BACKWARD_RTOL:g}*||A|| = {BACKWARD_RTOL * scale:.3e}"
            )
    return SpectrumSet(w, A.dim, scale)


def eigenpairs(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit-norm eigenvectors (columns) of ``A``."""
    A = as_operator(A)
    try:
        w, V = np.linalg.eig(A.entries)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(str(exc)) from exc
    return w, V / np.linalg.norm(V, axis=0)


def adjoint(A) -> Operator:
    """Conjugate transpose.  The norm cache carries over since ||A*|| = ||A||."""
    A = as_operator(A)
    return Operator(A.entries.conj().T, norm=A.norm_cache)


def diag(values: Iterable[complex]) -> Operator:
    return Operator(np.diag(np.asarray(list(values), dtype=np.complex128)))
