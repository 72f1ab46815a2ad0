"""Zero counting on an annulus and the explicit bound on the number of zeros.

For ``f`` analytic on the closed disc of radius ``rho`` with ``|f| <= M`` there,
and a point ``a`` with ``2 phi < |a| < 3 phi``, the number of zeros in
``4 phi < |z| <= rho/3`` is at most

    ln(M / |f(a)|) / ln(2 / (1 + |a| / (4 phi))).

Counts are computed as the difference of the winding numbers of ``f`` around
the two circles ``|z| = rho/3`` and ``|z| = 4 phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._parallel import ordered_map

__all__ = [
    "Prop51ConstraintError",
    "BoundaryZeroError",
    "AnnulusConfig",
    "bound_prop51",
    "WindingResult",
    "winding_number",
    "count_zeros_annulus",
    "Prop51Result",
    "verify_prop51",
    "sample_max_modulus",
    "certify_M",
    "heuristic_M",
    "annulus_gap",
    "certify_M_polynomial",
    "PolynomialInstance",
    "random_polynomial_instance",
    "ResolventInstance",
    "resolvent_instance",
]

PRESCREEN_RTOL = 1e-9
PRESCREEN_SAMPLES = 1024
M_SAMPLES = 4096

_HYPOTHESES = {
    "i": "0 < 4 phi < rho/3 and 2 phi < |a| < 3 phi",
    "ii": "f(a) != 0",
    "iii": "f analytic on the closed disc of radius rho",
    "iv": "|f| <= M on the closed disc of radius rho",
}


class Prop51ConstraintError(ValueError):
    """A hypothesis of the zero-count bound fails; ``constraint`` is one of i, ii, iii, iv."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        msg = f"constraint ({constraint}) fails: {_HYPOTHESES[constraint]}"
        super().__init__(msg + (f" [{detail}]" if detail else ""))


class BoundaryZeroError(RuntimeError):
    """The function (nearly) vanishes on a counting circle, or the winding integral did not settle."""


@dataclass(frozen=True)
class AnnulusConfig:
    rho: float
    phi: float
    a_point: complex
    center: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "a_point", complex(self.a_point))
        object.__setattr__(self, "center", complex(self.center))
        if not (0 < 4 * self.phi < self.rho / 3):
            raise Prop51ConstraintError("i", f"4 phi = {4 * self.phi}, rho/3 = {self.rho / 3}")
        if not (2 * self.phi < self.a_abs < 3 * self.phi):
            raise Prop51ConstraintError("i", f"|a| = {self.a_abs}, phi = {self.phi}")

    @property
    def a_abs(self) -> float:
        return abs(self.a_point - self.center)

    @property
    def inner(self) -> float:
        return 4 * self.phi

    @property
    def outer(self) -> float:
        return self.rho / 3


def bound_prop51(M: float, fa_abs: float, cfg: AnnulusConfig) -> float:
    if not fa_abs > 0:
        raise Prop51ConstraintError("ii", f"|f(a)| = {fa_abs}")
    if not M >= fa_abs:
        raise Prop51ConstraintError("iv", f"M = {M} < |f(a)| = {fa_abs}")
    # 1 < 1 + |a|/(4 phi) < 2 under (i), so the denominator is positive
    return math.log(M / fa_abs) / math.log(2.0 / (1.0 + cfg.a_abs / (4 * cfg.phi)))


def _evaluate(func: Callable, z: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Call ``func`` on an array; scalar-only callables are mapped point by point."""

    def block(zb):
        try:
            out = np.asarray(func(zb), dtype=np.complex128)
            if out.shape == zb.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([complex(func(complex(w))) for w in zb], dtype=np.complex128)

    parts = ordered_map(block, np.array_split(z, max(1, min(z.size // 256, 64))), threads)
    return np.concatenate(parts)


def _circle(center: complex, radius: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    w = np.exp(2j * np.pi * np.arange(n) / n)
    return center + radius * w, w


@dataclass(frozen=True)
class WindingResult:
    value: float
    count: int
    samples: int


def winding_number(
    func: Callable,
    center: complex,
    radius: float,
    dfunc: Callable | None = None,
    n0: int = 128,
    max_samples: int = 2**16,
    threads: int | None = None,
) -> WindingResult:
    """``(1/2 pi i) * integral of f'/f`` over ``|z - center| = radius``.

    Trapezoid rule with the sample count doubled until two successive values
    are within 0.25 of the same integer.  Without ``dfunc`` the derivative is
    obtained by spectral differentiation of the (periodic) circle samples.
    """
    prev = None
    n = n0
    while n <= max_samples:
        z, w = _circle(center, radius, n)
        f = _evaluate(func, z, threads)
        if dfunc is not None:
            df_dtheta = 1j * (z - center) * _evaluate(dfunc, z, threads)
        else:
            k = np.fft.fftfreq(n, 1.0 / n)
            if n % 2 == 0:
                k[n // 2] = 0.0
            df_dtheta = np.fft.ifft(1j * k * np.fft.fft(f))
        if np.any(f == 0) or not np.all(np.isfinite(f)):
            raise BoundaryZeroError(f"f vanishes or is not finite on |z - {center}| = {radius}")
        # dz = i (z - c) dtheta, so f'(z) dz = df/dtheta dtheta
        val = complex(np.mean(df_dtheta / f) / 1j)
        cur = round(val.real)
        ok = abs(val - cur) <= 0.25
        if ok and prev is not None and prev == cur:
            return WindingResult(val.real, int(cur), n)
        prev = cur if ok else None
        n *= 2
    raise BoundaryZeroError(
        f"winding integral on |z - {center}| = {radius} did not stabilize within {max_samples} samples; "
        "boundary zero suspected"
    )


def _prescreen(func, cfg: AnnulusConfig, threads) -> None:
    vals = [
        np.abs(_evaluate(func, _circle(cfg.center, r, PRESCREEN_SAMPLES)[0], threads))
        for r in (cfg.inner, cfg.outer)
    ]
    top = max(float(v.max()) for v in vals)
    for r, v in zip((cfg.inner, cfg.outer), vals):
        if float(v.min()) < PRESCREEN_RTOL * top:
            raise BoundaryZeroError(f"|f| nearly vanishes on the circle of radius {r}")


def count_zeros_annulus(
    func: Callable,
    cfg: AnnulusConfig,
    dfunc: Callable | None = None,
    max_samples: int = 2**16,
    threads: int | None = None,
) -> int:
    """Number of zeros (with multiplicity) in ``4 phi < |z - center| <= rho/3``."""
    _prescreen(func, cfg, threads)
    outer = winding_number(func, cfg.center, cfg.outer, dfunc, max_samples=max_samples, threads=threads)
    inner = winding_number(func, cfg.center, cfg.inner, dfunc, max_samples=max_samples, threads=threads)
    n = outer.count - inner.count
    if n < 0:
        raise BoundaryZeroError(f"negative zero count {n}: f is not analytic on the annulus")
    return n


def sample_max_modulus(func: Callable, cfg: AnnulusConfig, samples: int = M_SAMPLES, threads=None) -> float:
    """max |f| over ``samples`` points of the circle of radius rho (maximum modulus principle)."""
    z, _ = _circle(cfg.center, cfg.rho, samples)
    return float(np.max(np.abs(_evaluate(func, z, threads))))


def certify_M(func: Callable, cfg: AnnulusConfig, tail_bound: float | None = None, samples: int = M_SAMPLES) -> float:
    """The larger of the sampled boundary maximum and an analytic bound, when one is known."""
    m = sample_max_modulus(func, cfg, samples)
    return m if tail_bound is None else max(m, float(tail_bound))


@dataclass(frozen=True)
class Prop51Result:
    status: str  # "holds" | "violated"
    n_actual: int
    n_bound: float
    M: float
    fa_abs: float
    sampled_max: float

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def verify_prop51(
    func: Callable,
    cfg: AnnulusConfig,
    M: float,
    dfunc: Callable | None = None,
    samples: int = M_SAMPLES,
    threads: int | None = None,
) -> Prop51Result:
    """Count zeros on the annulus and compare with the bound.

    ``M`` is checked against ``samples`` points of ``|z| = rho``; a sampled value
    above ``M`` raises for hypothesis (iv).
    """
    sampled = sample_max_modulus(func, cfg, samples, threads)
    if not np.isfinite(sampled):
        raise Prop51ConstraintError("iii", "f is not finite on the circle of radius rho")
    if sampled > M:
        raise Prop51ConstraintError("iv", f"sampled max |f| = {sampled} > M = {M}")
    fa = abs(complex(_evaluate(func, np.array([cfg.a_point]))[0]))
    if fa <= 1e-13 * max(M, np.finfo(float).tiny):
        raise Prop51ConstraintError("ii", f"|f(a)| = {fa}")
    n_actual = count_zeros_annulus(func, cfg, dfunc, threads=threads)
    n_bound = bound_prop51(M, fa, cfg)
    status = "holds" if n_actual <= n_bound else "violated"
    return Prop51Result(status, n_actual, n_bound, float(M), fa, sampled)


def heuristic_M(e_norm: float, f_norm: float, phi: float, T_norm: float) -> float:
    """``||e|| ||f|| / (3 phi / 2 - ||T||) + 1``."""
    den = 1.5 * phi - T_norm
    if not den > 0:
        raise ValueError(f"3/2 phi = {1.5 * phi} must exceed ||T|| = {T_norm}")
    return e_norm * f_norm / den + 1.0


def annulus_gap(N: int, rho: float, phi: float) -> float:
    """``(rho/3 - 4 phi) / N``: some two consecutive zero radii are at least this far apart."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    # (rho - 12 phi) / 3 avoids the cancellation in rho/3 - 4 phi
    width3 = rho - 12 * phi
    if not (phi > 0 and width3 > 0):
        raise Prop51ConstraintError("i", f"rho/3 - 4 phi = {width3 / 3}")
    return width3 / (3 * N)


def certify_M_polynomial(coeffs, rho: float, samples: int = M_SAMPLES) -> float:
    """Rigorous max of ``|p|`` on ``|z| <= rho`` from circle samples (coefficients lowest first).

    Bernstein's inequality ``max |dp/dtheta| <= d max |p|`` bounds the variation
    between samples spaced ``2 pi / N`` apart, so ``max |p| <= sampled / (1 - pi d / N)``.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=np.complex128), "b")
    d = c.size - 1
    if samples <= np.pi * d:
        raise ValueError(f"{samples} samples are too few for degree {d}")
    z = rho * np.exp(2j * np.pi * np.arange(samples) / samples)
    sampled = float(np.max(np.abs(np.polynomial.polynomial.polyval(z, c))))
    return sampled / (1.0 - np.pi * d / samples)


@dataclass(frozen=True, eq=False)
class PolynomialInstance:
    coeffs: np.ndarray  # lowest degree first
    zeros: np.ndarray
    cfg: AnnulusConfig
    M: float

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def derivative(self, z):
        return np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self.coeffs))


def _random_point(rng, lo: float, hi: float, avoid=()) -> complex:
    while True:
        r = rng.uniform(lo, hi)
        if all(abs(r - c) > 1e-3 * c for c in avoid):
            return r * np.exp(2j * np.pi * rng.random())


def random_polynomial_instance(rng: np.random.Generator, degree: int = 10, phi: float = 1.0) -> PolynomialInstance:
    """Monic polynomial with zeros planted inside, across and beyond the annulus.

    ``rho`` is drawn from ``(13.2, 36) phi`` and ``|a|`` from ``(2, 3) phi``;
    zeros keep a relative distance of 1e-3 from both counting circles.
    """
    rho = 12 * phi * rng.uniform(1.1, 3.0)
    a = _random_point(rng, 2 * phi, 3 * phi)
    cfg = AnnulusConfig(rho, phi, a)
    avoid = (cfg.inner, cfg.outer)
    k_in = int(rng.integers(0, degree + 1))
    zeros = [_random_point(rng, cfg.inner, cfg.outer, avoid) for _ in range(k_in)]
    zeros += [_random_point(rng, 0.0, 1.5 * rho, avoid) for _ in range(degree - k_in)]
    zeros = np.array(zeros, dtype=np.complex128)
    coeffs = np.polynomial.polynomial.polyfromroots(zeros) if degree else np.ones(1, dtype=np.complex128)
    return PolynomialInstance(coeffs, zeros, cfg, certify_M_polynomial(coeffs, rho))


@dataclass(frozen=True, eq=False)
class ResolventInstance:
    """``h(z) = g(z + lam) - 1/alpha`` with ``lam`` an eigenvalue of ``T + alpha F``."""

    T: np.ndarray
    e: np.ndarray
    f: np.ndarray
    lam: complex
    alpha: complex
    cfg: AnnulusConfig
    M: float

    def __call__(self, z):
        from .rank_one import g_values

        return g_values(self.T, self.e, self.f, np.asarray(z) + self.lam) - 1.0 / self.alpha


def resolvent_instance(T, rng: np.random.Generator, R_factor: float = 1.5, rho_factor: float = 1.5) -> ResolventInstance:
    """Parameters of the large-eigenvalue heuristic for a random nilpotent rank-one ``F``.

    ``R = R_factor ||T||``, ``phi = 4R``, ``rho = 12 phi rho_factor``; ``lam`` is drawn
    in the first quadrant with ``rho + 3/2 phi < |lam| < rho + (3/2 + 1/1000) phi``
    and ``alpha = 1/g(lam)`` makes it an eigenvalue.  ``M`` is the heuristic bound.
    """
    from .matrix_engine import as_operator, operator_norm
    from .rank_one import g_function, random_nilpotent_pair

    T = as_operator(T)
    nT = operator_norm(T)
    R = R_factor * max(nT, 1e-300)
    phi = 4 * R
    rho = 12 * phi * rho_factor
    e, f = random_nilpotent_pair(T.dim, rng)
    r = rng.uniform(rho + 1.5 * phi, rho + 1.501 * phi)
    lam = r * np.exp(0.5j * np.pi * rng.uniform(0.05, 0.95))
    alpha = 1.0 / g_function(T, e, f, lam)
    if abs(alpha) < 1:
        raise ValueError(f"|alpha| = {abs(alpha)} < 1; the heuristic M does not apply")
    a = rng.uniform(2.05, 2.95) * phi * np.exp(0.5j * np.pi * rng.uniform(0.05, 0.95))
    M = heuristic_M(float(np.linalg.norm(e)), float(np.linalg.norm(f)), phi, nT)
    return ResolventInstance(T.entries, e, f, complex(lam), complex(alpha), AnnulusConfig(rho, phi, a), M)
