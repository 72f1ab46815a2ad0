"""Finite-dimensional laboratory for pseudospectra and rank-one perturbations of nilpotent operators."""

__version__ = "0.1.0"

from .gallery import GallerySpec, build, jordan, normalize_to, random_strict_triangular, volterra, weighted_shift
from .matrix_engine import Operator, SpectrumSet, adjoint, eigenvalues, operator_norm
from .pseudospectra import PseudospectrumGrid, connected_components, pseudospectrum_grid, pseudospectrum_inclusion
from .rank_one import (
    PoleInterferenceWarning,
    RankOnePerturbation,
    SharedEigenvalueWarning,
    g_function,
    kernel_range_perturbation,
    make_rank_one,
    perturbed_eigenvalues_via_g,
    trichotomy_classify,
)
from .spectra import dilate_and_test, resolvent_norm, spectrum

__all__ = [
    "__version__",
    "GallerySpec",
    "build",
    "jordan",
    "normalize_to",
    "random_strict_triangular",
    "volterra",
    "weighted_shift",
    "Operator",
    "SpectrumSet",
    "adjoint",
    "eigenvalues",
    "operator_norm",
    "PseudospectrumGrid",
    "connected_components",
    "pseudospectrum_grid",
    "pseudospectrum_inclusion",
    "PoleInterferenceWarning",
    "RankOnePerturbation",
    "SharedEigenvalueWarning",
    "g_function",
    "kernel_range_perturbation",
    "make_rank_one",
    "perturbed_eigenvalues_via_g",
    "trichotomy_classify",
    "dilate_and_test",
    "resolvent_norm",
    "spectrum",
]
