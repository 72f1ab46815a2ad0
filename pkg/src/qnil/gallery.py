"""Finite-dimensional models of quasinilpotent operators.

All constructors return strictly triangular matrices, so every model is
nilpotent exactly, not merely up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .matrix_engine import Operator, as_operator, eigenvalues, operator_norm

__all__ = [
    "KINDS",
    "GallerySpec",
    "build",
    "normalize_to",
    "spectral_radius",
    "quasinilpotency_tol",
    "is_quasinilpotent",
    "volterra",
    "jordan",
    "weighted_shift",
    "random_strict_triangular",
]

KINDS = ("volterra", "jordan", "weighted_shift", "random_strict_triangular")
QTOL = 1e-8


@dataclass(frozen=True)
class GallerySpec:
    kind: str
    dim: int
    weights: tuple | None = None
    seed: int | None = None
    density: float = 1.0
    kernel_dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gallery kind {self.kind!r}; expected one of {KINDS}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")
        if self.kind == "weighted_shift":
            if self.weights is None or len(self.weights) != self.dim - 1:
                got = None if self.weights is None else len(self.weights)
                raise ValueError(f"weighted_shift needs {self.dim - 1} weights, got {got}")
            object.__setattr__(self, "weights", tuple(complex(w) for w in self.weights))
        elif self.weights is not None:
            raise ValueError("weights are only accepted for kind='weighted_shift'")
        if self.kind == "random_strict_triangular" and self.seed is None:
            raise ValueError("random_strict_triangular requires a seed")
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must lie in (0, 1], got {self.density}")
        if not 1 <= self.kernel_dim < self.dim:
            raise ValueError(f"kernel_dim must lie in [1, dim), got {self.kernel_dim}")
        if self.kernel_dim != 1 and self.kind not in ("jordan", "random_strict_triangular"):
            raise ValueError(f"kernel_dim is only adjustable for jordan and random_strict_triangular")

    @classmethod
    def from_dict(cls, d: dict) -> "GallerySpec":
        d = dict(d)
        if d.get("weights") is not None:
            d["weights"] = tuple(_parse_complex(w) for w in d["weights"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.weights is not None:
            d["weights"] = [[w.real, w.imag] for w in self.weights]
        return d


def _parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(float(re), float(im))
    return complex(v)


def volterra(n: int) -> Operator:
    """Left-endpoint quadrature of the integration operator on [0, 1]."""
    return Operator(np.tril(np.full((n, n), 1.0 / n), k=-1))


def jordan(n: int, kernel_dim: int = 1) -> Operator:
    """Ones on the superdiagonal, split into ``kernel_dim`` nilpotent blocks."""
    M = np.diag(np.ones(n - 1), k=1).astype(np.complex128)
    # block boundaries: break the chain at kernel_dim - 1 places
    sizes = [n // kernel_dim + (1 if i < n % kernel_dim else 0) for i in range(kernel_dim)]
    for cut in np.cumsum(sizes)[:-1]:
        M[cut - 1, cut] = 0.0
    return Operator(M)


def weighted_shift(weights: Sequence[complex]) -> Operator:
    w = np.asarray(weights, dtype=np.complex128)
    return Operator(np.diag(w, k=1))


def random_strict_triangular(n: int, seed: int, density: float = 1.0, kernel_dim: int = 1) -> Operator:
    """Strictly upper triangular with i.i.d. standard complex normal entries.

    Entries are kept with probability ``density``; the first ``kernel_dim``
    columns are zeroed so the kernel contains those basis vectors.
    """
    rng = np.random.default_rng(seed)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    mask = rng.random((n, n)) < density
    M = np.triu(Z * mask, k=1)
    M[:, :kernel_dim] = 0.0
    return Operator(M)


def build(spec: GallerySpec) -> Operator:
    if spec.kind == "volterra":
        return volterra(spec.dim)
    if spec.kind == "jordan":
        return jordan(spec.dim, spec.kernel_dim)
    if spec.kind == "weighted_shift":
        return weighted_shift(spec.weights)
    return random_strict_triangular(spec.dim, spec.seed, spec.density, spec.kernel_dim)


def normalize_to(A, a: float) -> tuple[Operator, float]:
    """Scale ``A`` to operator norm ``a``; returns ``(m*A, m)`` with ``m = a/||A||``."""
    A = as_operator(A)
    if a <= 0:
        raise ValueError(f"target norm must be positive, got {a}")
    nrm = operator_norm(A)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero operator")
    m = a / nrm
    if m == 1.0:
        return A, 1.0
    return Operator(A.entries * m), m


def spectral_radius(A) -> float:
    return eigenvalues(A).spectral_radius


def quasinilpotency_tol(A, qtol: float = QTOL) -> float:
    """Finite-dimensional quasinilpotency threshold, ``qtol * ||A||``."""
    return qtol * operator_norm(A)


def is_quasinilpotent(A, qtol: float = QTOL) -> bool:
    return spectral_radius(A) <= quasinilpotency_tol(A, qtol)
