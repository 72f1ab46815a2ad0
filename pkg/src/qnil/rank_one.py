"""Rank-one perturbations ``T + alpha F`` with ``F x = <x, e> f``.

Inner products are linear in the first slot, ``<x, e> = e^H x``, so the
matrix of ``F`` is ``f e^H``.  For ``z`` off the spectrum of ``T`` the
scalar function ``g(z) = <(zI - T)^-1 f, e>`` detects the nonzero
eigenvalues of the perturbation: ``lambda`` is one iff ``g(lambda) = 1/alpha``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.linalg import lu_factor, lu_solve

from .gallery import QTOL
from .matrix_engine import Operator, as_operator, eigenvalues, operator_norm

__all__ = [
    "PoleInterferenceWarning",
    "SharedEigenvalueWarning",
    "RankOnePerturbation",
    "make_rank_one",
    "kernel_range_perturbation",
    "random_nilpotent_pair",
    "g_function",
    "g_derivative",
    "g_values",
    "perturbed_eigenvalues_via_g",
    "SampleOutcome",
    "Trichotomy",
    "trichotomy_classify",
    "perturbation_tol",
    "alpha_lower_bound",
]


class PoleInterferenceWarning(RuntimeWarning):
    pass


class SharedEigenvalueWarning(RuntimeWarning):
    """An eigenvalue of ``T`` is also one of ``T + alpha F``; nearby solutions are ambiguous."""


def _vec(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).ravel()
    if not np.any(v):
        raise ValueError(f"{name} must be a nonzero vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def make_rank_one(e, f) -> Operator:
    """Matrix of ``x -> <x, e> f``."""
    e, f = _vec(e, "e"), _vec(f, "f")
    if e.size != f.size:
        raise ValueError(f"e and f differ in dimension ({e.size} vs {f.size})")
    return Operator(np.outer(f, e.conj()), norm=float(np.linalg.norm(e) * np.linalg.norm(f)))


@dataclass(frozen=True, eq=False)
class RankOnePerturbation:
    e: np.ndarray
    f: np.ndarray
    alpha: complex = 1.0

    def __post_init__(self):
        e, f = _vec(self.e, "e"), _vec(self.f, "f")
        if e.size != f.size:
            raise ValueError("e and f differ in dimension")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def operator(self) -> Operator:
        return make_rank_one(self.e, self.f)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.e) * np.linalg.norm(self.f))

    @property
    def pairing(self) -> complex:
        """``<f, e>``; ``F^2 = <f, e> F``."""
        return complex(np.vdot(self.e, self.f))

    def is_nilpotent(self, rtol: float = 1e-12) -> bool:
        return abs(self.pairing) <= rtol * self.norm

    def rescaled(self, b: float) -> "RankOnePerturbation":
        """Same direction, ``||F|| = b``."""
        return RankOnePerturbation(self.e, self.f * (b / self.norm), self.alpha)

    def apply(self, T) -> Operator:
        T = as_operator(T)
        return Operator(T.entries + self.alpha * np.outer(self.f, self.e.conj()))


def kernel_range_perturbation(S, qtol: float = QTOL) -> tuple[np.ndarray, np.ndarray]:
    """Unit ``e`` in ``ker S`` and unit ``f`` in ``ran S*``; then ``S* + alpha F`` is nilpotent.

    An exactly zero column of ``S`` is preferred as the kernel direction so
    that structural zeros survive into ``S* + alpha F``.
    """
    S = as_operator(S)
    M = S.entries
    nrm = operator_norm(S)
    rho = eigenvalues(S).spectral_radius
    if rho > qtol * nrm:
        raise ValueError(f"S is not nilpotent: spectral radius {rho:.3e} > {qtol:g}*||S||")
    U, sv, Vh = np.linalg.svd(M)
    zero_cols = np.nonzero(~np.any(M, axis=0))[0]
    if zero_cols.size:
        e = np.zeros(S.dim, dtype=np.complex128)
        e[zero_cols[0]] = 1.0
    elif sv[-1] <= 1e-12 * nrm:
        e = Vh[-1].conj()
    else:
        raise ValueError("S has trivial kernel")
    if nrm == 0.0:
        raise ValueError("S = 0 has trivial range")
    f = M.conj().T @ U[:, 0]
    f = f - np.vdot(e, f) * e
    f = f / np.linalg.norm(f)
    return e, f


def random_nilpotent_pair(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random unit ``e`` and ``f`` with ``<f, e> = 0`` (Gram-Schmidt), so ``F^2 = 0``."""
    e = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    e /= np.linalg.norm(e)
    f -= np.vdot(e, f) * e
    f /= np.linalg.norm(f)
    return e, f


def _check_off_spectrum(M: np.ndarray, z: complex, nrm: float) -> None:
    sig = np.linalg.svd(z * np.eye(M.shape[0]) - M, compute_uv=False)[-1]
    if sig <= 1e-13 * nrm or sig == 0.0:
        raise ValueError(f"z = {z} lies on (or numerically at) the spectrum of T")


def g_function(T, e, f, z: complex) -> complex:
    """``<(zI - T)^-1 f, e>`` via one linear solve."""
    T = as_operator(T)
    e, f = _vec(e, "e"), _vec(f, "f")
    _check_off_spectrum(T.entries, complex(z), operator_norm(T))
    u = np.linalg.solve(complex(z) * np.eye(T.dim) - T.entries, f)
    return complex(np.vdot(e, u))


def g_derivative(T, e, f, z: complex) -> complex:
    """``g'(z) = -<(zI - T)^-2 f, e>``."""
    T = as_operator(T)
    e, f = _vec(e, "e"), _vec(f, "f")
    _check_off_spectrum(T.entries, complex(z), operator_norm(T))
    lu = lu_factor(complex(z) * np.eye(T.dim) - T.entries)
    w = lu_solve(lu, lu_solve(lu, f))
    return complex(-np.vdot(e, w))


def g_values(T, e, f, zs) -> np.ndarray:
    """``g`` at every point of ``zs`` (any shape) by batched solves; NaN where singular."""
    T = as_operator(T)
    return _g_batch(T.entries, _vec(e, "e"), _vec(f, "f"), np.asarray(zs, dtype=np.complex128))


def _g_batch(M, e, f, zs):
    n = M.shape[0]
    out = np.full(zs.shape, np.nan + 0j)
    flat = zs.ravel()
    res = np.empty(flat.size, dtype=np.complex128)
    chunk = max(1, 2**21 // (n * n))
    for i in range(0, flat.size, chunk):
        blk = flat[i : i + chunk][:, None, None] * np.eye(n) - M
        try:
            u = np.linalg.solve(blk, np.broadcast_to(f, (blk.shape[0], n))[..., None])[..., 0]
            res[i : i + chunk] = u @ e.conj()
        except np.linalg.LinAlgError:
            for k, z in enumerate(flat[i : i + chunk]):
                try:
                    res[i + k] = np.vdot(e, np.linalg.solve(z * np.eye(n) - M, f))
                except np.linalg.LinAlgError:
                    res[i + k] = np.nan
    out[...] = res.reshape(zs.shape)
    return out


def _seed_residual(M, e, f, alpha, Z):
    """``|1/g - alpha|``; analytic near the poles of g, with the same roots as ``g - 1/alpha``."""
    g = _g_batch(M, e, f, Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(1.0 / g - alpha)
    r[~np.isfinite(r)] = np.inf
    return r


def _local_minima(Z, resid, wrap_cols=False):
    """Grid local minima of ``resid`` as (points, values); flat plateaus are skipped."""
    mode = ("nearest", "wrap") if wrap_cols else "nearest"
    lo = ndimage.minimum_filter(resid, size=3, mode=mode)
    hi = ndimage.maximum_filter(resid, size=3, mode=mode)
    mins = (resid == lo) & (resid < hi) & np.isfinite(resid)
    return Z[mins], resid[mins]


def _grid_seeds(M, e, f, alpha, poles, region, h, dim):
    """Local minima of ``|1/g - alpha|`` on a Cartesian grid and on polar rings
    about each pole, best first, followed by far-out starts for deflated Newton."""
    re0, re1, im0, im1 = region
    span = max(re1 - re0, im1 - im0)
    nx = int(np.ceil((re1 - re0) / h)) + 1
    ny = int(np.ceil((im1 - im0) / h)) + 1
    Z = np.linspace(re0, re1, nx)[None, :] + 1j * np.linspace(im0, im1, ny)[:, None]
    found = [_local_minima(Z, _seed_residual(M, e, f, alpha, Z))]
    # roots crowd around a pole of order m on a circle of radius ~|alpha c|^(1/m);
    # polar rings resolve them at every scale
    n_ang = max(32, 8 * dim)
    radii = span * 2.0 ** (-np.arange(0, 96) / 4.0)
    ang = 2 * np.pi * np.arange(n_ang) / n_ang
    scale = max(np.linalg.norm(M, 2), 1.0)
    for p in _distinct(poles, 1e-8 * scale):
        if not (re0 - span <= p.real <= re1 + span and im0 - span <= p.imag <= im1 + span):
            continue
        P = p + radii[:, None] * np.exp(1j * ang)[None, :]
        found.append(_local_minima(P, _seed_residual(M, e, f, alpha, P), wrap_cols=True))
    seeds = np.concatenate([s for s, _ in found])
    seeds = seeds[np.argsort(np.concatenate([r for _, r in found]), kind="stable")][: 20 * dim]
    centre = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
    n_out = 4 * dim
    outer = centre + span * np.exp(2j * np.pi * (np.arange(n_out) + 0.5) / n_out)
    return np.concatenate([seeds, outer])


def _interpolant_roots(M, e, f, alpha, radius):
    """Roots of ``det(zI - T) (1 - alpha g(z))``, a polynomial of degree ``dim``,
    interpolated from samples on the circle ``|z| = radius``; used only as seeds."""
    n = M.shape[0]
    N = 2 * n + 2
    z = radius * np.exp(2j * np.pi * np.arange(N) / N)
    vals = np.empty(N, dtype=np.complex128)
    for k, zk in enumerate(z):
        A = zk * np.eye(n) - M
        try:
            vals[k] = np.linalg.det(A) * (1.0 - alpha * np.vdot(e, np.linalg.solve(A, f)))
        except np.linalg.LinAlgError:
            return np.zeros(0, dtype=np.complex128)
    c = np.fft.fft(vals) / N / radius ** np.arange(N)
    c = c[: n + 1]
    if not np.all(np.isfinite(c)) or c[n] == 0:
        return np.zeros(0, dtype=np.complex128)
    r = np.roots(c[::-1])
    return r[np.isfinite(r)]


def _distinct(points, tol):
    out = []
    for p in points:
        if not any(abs(p - q) <= tol for q in out):
            out.append(p)
    return out


def _g_eval(M, eye, e, f, z):
    """``g``, ``g'`` and a first-order bound on the rounding error of ``g``."""
    A = z * eye - M
    lu = lu_factor(A, check_finite=False)
    u = lu_solve(lu, f, check_finite=False)
    w = lu_solve(lu, u, check_finite=False)
    v = lu_solve(lu, e, trans=2, check_finite=False)
    err = np.finfo(float).eps * np.linalg.norm(A, 1) * np.linalg.norm(u) * np.linalg.norm(v)
    return complex(np.vdot(e, u)), complex(-np.vdot(e, w)), float(err)


def _newton(M, e, f, target, z0, roots, max_step=np.inf, max_iter=100):
    """Damped Newton on ``g - target`` with the known ``roots`` deflated away.

    Returns ``(z, residual, error_bound)`` after polishing on the undeflated
    function, or None when the iteration stalls.
    """
    eye = np.eye(M.shape[0])
    prior = np.asarray(roots, dtype=np.complex128)

    def state(z):
        try:
            g, dg, err = _g_eval(M, eye, e, f, z)
        except (np.linalg.LinAlgError, ValueError):
            return None
        if not (np.isfinite(g) and np.isfinite(dg)):
            return None
        defl = float(np.prod(np.abs(z - prior))) if prior.size else 1.0
        return g, dg, err, abs(g - target) / defl if defl > 0 else np.inf

    z = complex(z0)
    st = state(z)
    if st is None:
        return None
    converged = False
    for _ in range(max_iter):
        g, dg, err, phi = st
        if g == target:
            converged = True
            break
        # Maehly: phi'/phi = g'/(g - t) - sum 1/(z - r_i)
        logd = dg / (g - target) - (np.sum(1.0 / (z - prior)) if prior.size else 0.0)
        if logd == 0 or not np.isfinite(logd):
            return None
        step = 1.0 / logd
        if abs(step) > max_step:
            step *= max_step / abs(step)
        zn = z - step
        stn = state(zn)
        if stn is None:
            zn = z - 0.5 * step
            stn = state(zn)
            if stn is None:
                return None
        z, st = zn, stn
        if abs(step) <= 1e-14 * max(abs(z), 1.0):
            converged = True
            break
    if not converged:
        g, dg, err, _ = st
        if abs(g - target) > 4 * err:
            return None
    # polish on g itself
    for _ in range(4):
        g, dg, err, _ = st
        if dg == 0 or g == target:
            break
        zn = z - (g - target) / dg
        stn = state(zn)
        if stn is None or abs(stn[0] - target) >= abs(g - target):
            break
        z, st = zn, stn
    g, _, err, _ = st
    return z, abs(g - target), err


def perturbed_eigenvalues_via_g(
    T,
    e,
    f,
    alpha: complex,
    search_region,
    h: float | None = None,
    merge_tol: float = 1e-8,
    pole_clearance: float | None = None,
) -> np.ndarray:
    """Solutions of ``g(lambda) = 1/alpha`` in a rectangle, sorted.

    Seeds come from the roots of ``det(zI - T)(1 - alpha g(z))`` interpolated
    on a few circles, then (if fewer than ``dim`` roots were found) from the
    local minima of ``|1/g - alpha|`` on a grid and on polar rings about the
    poles.  Each seed is refined by Newton with the roots already found
    deflated away.  A returned root satisfies ``|g - 1/alpha| <= 1e-10 |1/alpha|``
    or, next to a high-order pole where ``g`` is ill-conditioned, lies within
    a small multiple of the rounding error bound for ``g``.

    When ``T + alpha F`` keeps an eigenvalue of ``T`` (this needs ``f`` to miss part
    of a Krylov space of ``T``, or ``e`` to be blind to it) a
    :class:`SharedEigenvalueWarning` is issued: rounding turns
    that multiple eigenvalue into a ring of near-solutions around the pole.
    """
    T = as_operator(T)
    e, f = _vec(e, "e"), _vec(f, "f")
    alpha = complex(alpha)
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    re0, re1, im0, im1 = (float(v) for v in search_region)
    if not (re1 > re0 and im1 > im0):
        raise ValueError(f"degenerate search region {search_region}")
    M = T.entries
    dim = T.dim
    target = 1.0 / alpha
    span = max(re1 - re0, im1 - im0)
    if h is None:
        h = span / max(64, 8 * T.dim)
    if pole_clearance is None:
        pole_clearance = 2 * h
    poles = eigenvalues(T).points
    interfering = poles[
        (np.abs(poles) > 1e-8 * max(operator_norm(T), 1.0))
        & (poles.real >= re0 - pole_clearance) & (poles.real <= re1 + pole_clearance)
        & (poles.imag >= im0 - pole_clearance) & (poles.imag <= im1 + pole_clearance)
    ]
    if interfering.size:
        warnings.warn(
            f"{interfering.size} nonzero eigenvalue(s) of T lie in or near the search region; "
            "roots adjacent to poles may be missed",
            PoleInterferenceWarning,
            stacklevel=2,
        )
    # a pole that is also an eigenvalue of T + alpha F is surrounded by points where
    # the computed g is indistinguishable from 1/alpha (the multiple eigenvalue,
    # smeared by rounding); the generic case has sigma_min above 1e-10 * scale
    scale = operator_norm(T) + abs(alpha) * np.linalg.norm(e) * np.linalg.norm(f)
    A = M + alpha * np.outer(f, e.conj())
    local = eigenvalues(T).distinct()
    local = local[(local.real >= re0 - pole_clearance) & (local.real <= re1 + pole_clearance)
                  & (local.imag >= im0 - pole_clearance) & (local.imag <= im1 + pole_clearance)]
    shared = [p for p in local
              if np.linalg.svd(p * np.eye(dim) - A, compute_uv=False)[-1] <= 1e-13 * scale]
    if shared:
        warnings.warn(
            f"T + alpha F shares the eigenvalue(s) {', '.join(f'{complex(p):.3g}' for p in shared)} with T; "
            "solutions near them cannot be told apart from rounding artifacts",
            SharedEigenvalueWarning,
            stacklevel=2,
        )
    accept = 1e-10 * abs(target)
    pole_floor = 1e-13 * max(operator_norm(T), 1.0)
    roots: list[complex] = []

    def polish(seeds):
        # g = 1/alpha has at most dim solutions (degree of det(zI - T - alpha F))
        for z0 in seeds:
            if len(roots) == dim:
                return
            out = _newton(M, e, f, target, z0, roots, max_step=0.25 * span)
            if out is None:
                continue
            z, r, err = out
            # next to a high-order pole g cannot be evaluated to 1e-10 relative accuracy;
            # allow the computed rounding bound there
            if r > max(accept, 8 * err):
                continue
            if not (re0 <= z.real <= re1 and im0 <= z.imag <= im1):
                continue
            if np.min(np.abs(poles - z)) <= pole_floor:
                continue
            if any(abs(z - w) <= merge_tol * max(1.0, abs(w)) for w in roots):
                continue
            roots.append(z)

    # roots of the interpolated characteristic polynomial; one circle loses
    # small roots to cancellation, so several scales are used
    rho = max(span, operator_norm(T) + abs(alpha) * np.linalg.norm(e) * np.linalg.norm(f))
    polish(np.concatenate([_interpolant_roots(M, e, f, alpha, rho * 4.0**-k) for k in range(6)]))
    if len(roots) < dim:
        polish(_grid_seeds(M, e, f, alpha, poles, (re0, re1, im0, im1), h, dim))
    arr = np.array(roots, dtype=np.complex128)
    return arr[np.lexsort((arr.imag, arr.real))] if arr.size else arr


def perturbation_tol(T, b: float, alpha: complex, qtol: float = QTOL) -> float:
    """Scale-aware quasinilpotency threshold for ``T + alpha F`` with ``||F|| = b``."""
    return qtol * max(1.0, operator_norm(T) + abs(alpha) * b)


@dataclass(frozen=True)
class SampleOutcome:
    alpha: complex
    spectral_radius: float
    tol: float
    n_nonzero: int
    quasinilpotent: bool
    borderline: bool


@dataclass(frozen=True)
class Trichotomy:
    """``case`` is ``"case_i"`` or ``"case_iii"``; ``K`` is set only for case (iii).

    The countably-infinite alternative cannot occur at finite dimension, so it
    is never reported.
    """

    case: str
    K: int | None
    samples: tuple[SampleOutcome, ...] = field(default=())

    @property
    def borderline(self) -> list[complex]:
        return [s.alpha for s in self.samples if s.borderline]


def trichotomy_classify(T, e, f, alpha_samples, qtol: float = QTOL) -> Trichotomy:
    T = as_operator(T)
    alphas = [complex(a) for a in alpha_samples]
    if not alphas:
        raise ValueError("alpha_samples must be nonempty")
    if any(a == 0 for a in alphas):
        raise ValueError("alpha samples must be nonzero")
    pert = RankOnePerturbation(e, f)
    b = pert.norm
    outcomes = []
    for a in alphas:
        pts = eigenvalues(Operator(T.entries + a * np.outer(pert.f, pert.e.conj()))).points
        tol = perturbation_tol(T, b, a, qtol)
        rho = float(np.max(np.abs(pts)))
        outcomes.append(SampleOutcome(
            alpha=a,
            spectral_radius=rho,
            tol=tol,
            n_nonzero=int(np.sum(np.abs(pts) > tol)),
            quasinilpotent=rho <= tol,
            borderline=tol / 10 <= rho <= 10 * tol,
        ))
    if all(o.quasinilpotent for o in outcomes):
        return Trichotomy("case_i", None, tuple(outcomes))
    K = 1 + max(max(o.n_nonzero for o in outcomes), 1)
    return Trichotomy("case_iii", K, tuple(outcomes))


def alpha_lower_bound(R: float, T, e, f) -> float:
    """``(R - ||T||) / (||e|| ||f||)``: the least ``|alpha|`` that can produce an eigenvalue beyond ``R``."""
    T = as_operator(T)
    nT = operator_norm(T)
    if R <= nT:
        raise ValueError(f"R = {R} must exceed ||T|| = {nT}")
    e, f = _vec(e, "e"), _vec(f, "f")
    return (R - nT) / (float(np.linalg.norm(e)) * float(np.linalg.norm(f)))
