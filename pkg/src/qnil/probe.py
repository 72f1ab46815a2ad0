"""Falsifiable experiments around the pseudospectral inclusion conjecture.

For a nilpotent model ``T`` scaled to ``||T~|| = a`` and rank-one nilpotent
``F`` with ``||F|| = b``, each parameter ``alpha`` is tested for

* quasinilpotency of ``T~* + alpha F``,
* the inclusion ``sigma_t(A) within sigma(A) + B(0, Phi(alpha))``, and
* disconnectedness of ``sigma(A) + B(0, Phi(alpha))``,

where ``A`` is ``T~ + alpha F`` ("stated" orientation) or ``T~* + alpha F``
("adjoint" orientation).  Both are always reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._parallel import ordered_map
from .curves import (
    CurveHitError,
    SeparationError,
    max_resolvent_on_curve,
    random_perturbation,
    semicontinuity_trial,
    separating_curve,
)
from .gallery import QTOL, normalize_to
from .matrix_engine import Operator, SpectrumSet, adjoint, as_operator, eigenvalues
from .pseudospectra import pseudospectrum_inclusion
from .rank_one import (
    RankOnePerturbation,
    kernel_range_perturbation,
    perturbation_tol,
    random_nilpotent_pair,
)
from .spectra import dilate_and_test, mst_bottleneck

__all__ = [
    "ProbeError",
    "PreconditionError",
    "PhiSpec",
    "FSample",
    "default_F_sampler",
    "CellCheck",
    "AlphaRecord",
    "FRecord",
    "ProbeReport",
    "probe_conjecture",
    "ChainResult",
    "chain_check",
    "PipelineReport",
    "theorem41_pipeline",
    "CertificateReport",
    "r_boundability_certificate",
    "ORIENTATIONS",
]

ORIENTATIONS = ("stated", "adjoint")


class ProbeError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def _cjson(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class PhiSpec:
    """Dilation radius as a function of alpha: a constant, or an exact-match table."""

    kind: str
    value: float | tuple[tuple[complex, float], ...]

    def __post_init__(self):
        if self.kind == "constant":
            v = float(self.value)
            if not v >= 0:
                raise ProbeError(f"Phi must be nonnegative, got {v}")
            object.__setattr__(self, "value", v)
        elif self.kind == "table":
            rows = tuple((complex(a), float(r)) for a, r in self.value)
            if any(not r >= 0 for _, r in rows):
                raise ProbeError("Phi table radii must be nonnegative")
            if len({a for a, _ in rows}) != len(rows):
                raise ProbeError("Phi table lists an alpha twice")
            object.__setattr__(self, "value", rows)
        else:
            raise ProbeError(f"unknown Phi kind {self.kind!r}; expected 'constant' or 'table'")

    @classmethod
    def constant(cls, r: float) -> "PhiSpec":
        return cls("constant", r)

    @classmethod
    def table(cls, rows) -> "PhiSpec":
        return cls("table", tuple(rows))

    def __call__(self, alpha: complex) -> float:
        if self.kind == "constant":
            return self.value
        alpha = complex(alpha)
        for a, r in self.value:
            if a == alpha:
                return r
        raise ProbeError(f"Phi table has no entry for alpha = {alpha}")

    def check_covers(self, alphas) -> None:
        for a in alphas:
            self(a)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "table", "value": [[_cjson(a), r] for a, r in self.value]}

    @classmethod
    def from_dict(cls, d) -> "PhiSpec":
        if d["kind"] == "table":
            return cls.table((complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a), r)
                             for a, r in d["value"])
        return cls(d["kind"], d["value"])


@dataclass(frozen=True, eq=False)
class FSample:
    """``F x = <x, e> f``, labelled for reports."""

    name: str
    e: np.ndarray
    f: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.f, self.e.conj())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.e) * np.linalg.norm(self.f))


def default_F_sampler(seed: int, n_random: int = 32, include_kernel_range: bool = True) -> Callable:
    """Random Gram-Schmidt pairs plus the kernel/range construction on ``T~``, all with ``||F|| = b``."""

    def sampler(T_tilde: Operator, b: float) -> list[FSample]:
        rng = np.random.default_rng(seed)
        out = []
        for k in range(n_random):
            e, f = random_nilpotent_pair(T_tilde.dim, rng)
            p = RankOnePerturbation(e, f).rescaled(b)
            out.append(FSample(f"random_{k}", p.e, p.f))
        if include_kernel_range:
            e, f = kernel_range_perturbation(T_tilde)
            p = RankOnePerturbation(e, f).rescaled(b)
            out.append(FSample("kernel_range", p.e, p.f))
        return out

    return sampler


def _validate_samples(samples: Sequence[FSample], n: int, b: float) -> None:
    for s in samples:
        if s.e.size != n or s.f.size != n:
            raise ProbeError(f"F sample {s.name} has the wrong dimension")
        nrm = s.norm
        if abs(nrm - b) > 1e-12 * b:
            raise ProbeError(f"F sample {s.name} has norm {nrm}, expected {b}")
        if abs(np.vdot(s.e, s.f)) > 1e-12 * nrm:
            raise ProbeError(f"F sample {s.name} is not nilpotent (<f, e> != 0)")


def _snapped_spectrum(A: Operator, tol: float) -> SpectrumSet:
    """Eigenvalues with those of modulus ``<= tol`` replaced by 0."""
    spec = eigenvalues(A)
    pts = np.where(np.abs(spec.points) <= tol, 0.0, spec.points)
    return SpectrumSet(pts, spec.source_dim, spec.scale, spec.cluster_rtol)


@dataclass(frozen=True)
class CellCheck:
    inclusion_holds: bool
    dilated_disconnected: bool
    n_components: int
    inclusion_witness: complex | None = None

    @property
    def passes(self) -> bool:
        return self.inclusion_holds and self.dilated_disconnected

    def failed_checks(self) -> list[str]:
        out = []
        if not self.inclusion_holds:
            out.append("inclusion")
        if not self.dilated_disconnected:
            out.append("disconnected")
        return out

    def to_dict(self) -> dict:
        return {
            "inclusion_holds": self.inclusion_holds,
            "dilated_disconnected": self.dilated_disconnected,
            "n_components": self.n_components,
            "inclusion_witness": None if self.inclusion_witness is None else _cjson(self.inclusion_witness),
        }


@dataclass(frozen=True)
class AlphaRecord:
    alpha: complex
    phi: float
    not_quasinilpotent: bool
    spectral_radius: float
    tol: float
    borderline: bool
    checks: dict  # orientation -> CellCheck

    def to_dict(self) -> dict:
        return {
            "alpha": _cjson(self.alpha),
            "phi": self.phi,
            "not_quasinilpotent": self.not_quasinilpotent,
            "spectral_radius": self.spectral_radius,
            "tol": self.tol,
            "borderline": self.borderline,
            "checks": {o: self.checks[o].to_dict() for o in ORIENTATIONS},
        }


@dataclass(frozen=True)
class FRecord:
    name: str
    per_alpha: tuple[AlphaRecord, ...]
    S_set: dict  # orientation -> tuple of alphas

    @property
    def n_not_quasinilpotent(self) -> int:
        return sum(r.not_quasinilpotent for r in self.per_alpha)

    @property
    def constrains(self) -> bool:
        return self.n_not_quasinilpotent >= 2

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_not_quasinilpotent": self.n_not_quasinilpotent,
            "S_set": {o: [_cjson(a) for a in self.S_set[o]] for o in ORIENTATIONS},
            "per_alpha": [r.to_dict() for r in self.per_alpha],
        }


def _verdict(records: Sequence[FRecord], orientation: str) -> tuple[str, list[dict]]:
    relevant = [r for r in records if r.constrains]
    if not relevant:
        return "vacuous", []
    counter = []
    for r in relevant:
        if len(r.S_set[orientation]) >= 2:
            continue
        for a in r.per_alpha:
            if a.not_quasinilpotent and not a.checks[orientation].passes:
                counter.append({
                    "F": r.name,
                    "alpha": _cjson(a.alpha),
                    "failed": a.checks[orientation].failed_checks(),
                })
    return ("violated", counter) if counter else ("supported", [])


@dataclass(frozen=True)
class ProbeReport:
    a: float
    b: float
    t: float
    m: float
    phi: PhiSpec
    alpha_grid: tuple[complex, ...]
    per_F: tuple[FRecord, ...]
    verdicts: dict = field(default_factory=dict)  # orientation -> verdict
    counterexamples: dict = field(default_factory=dict)  # orientation -> list

    @property
    def verdict(self) -> str:
        """Verdict for the statement as written: inclusion and disconnectedness on ``T~ + alpha F``."""
        return self.verdicts["stated"]

    def to_dict(self) -> dict:
        return {
            "kind": "probe",
            "params": {"a": self.a, "b": self.b, "t": self.t, "m": self.m},
            "phi": self.phi.to_dict(),
            "alpha_grid": [_cjson(a) for a in self.alpha_grid],
            "F_samples": [r.name for r in self.per_F],
            "per_F": [r.to_dict() for r in self.per_F],
            "verdict": self.verdict,
            "verdicts": dict(self.verdicts),
            "counterexamples": {o: list(v) for o, v in self.counterexamples.items()},
        }


def _cell_check(A: Operator, tol: float, t: float, phi: float, h: float) -> CellCheck:
    spec = _snapped_spectrum(A, tol)
    inc = pseudospectrum_inclusion(A, spec, t, phi, h)
    dil = dilate_and_test(spec, phi)
    return CellCheck(inc.holds, not dil.connected, dil.n_components, inc.witness)


def _prepare(T, a: float, b: float, t: float, phi: PhiSpec, F_sampler, alpha_grid):
    if not (a > 0 and b > 0 and t > 0):
        raise ProbeError("a, b and t must be positive")
    alphas = tuple(complex(x) for x in alpha_grid)
    if not alphas:
        raise ProbeError("alpha_grid is empty")
    if any(x == 0 for x in alphas):
        raise ProbeError("alpha_grid must not contain 0")
    phi.check_covers(alphas)
    Tt, m = normalize_to(as_operator(T), a)
    samples = list(F_sampler(Tt, b))
    _validate_samples(samples, Tt.dim, b)
    return Tt, m, alphas, samples


def probe_conjecture(
    T,
    a: float,
    b: float,
    t: float,
    phi: PhiSpec,
    F_sampler: Callable,
    alpha_grid: Sequence[complex],
    h: float | None = None,
    qtol: float = QTOL,
    threads: int | None = None,
) -> ProbeReport:
    """Test a given ``(a, b, t, Phi)`` against every sampled ``F`` and every ``alpha``.

    ``h`` is the lattice step of the inclusion test (default ``t/4``).
    """
    Tt, m, alphas, samples = _prepare(T, a, b, t, phi, F_sampler, alpha_grid)
    h = t / 4 if h is None else float(h)
    Tstar = adjoint(Tt)
    cells = [(s, al) for s in samples for al in alphas]

    def work(cell):
        s, al = cell
        F = al * s.matrix
        tol = perturbation_tol(Tt, b, al, qtol)
        A_adj = Operator(Tstar.entries + F)
        A_st = Operator(Tt.entries + F)
        rho = eigenvalues(A_adj).spectral_radius
        r = phi(al)
        checks = {"stated": _cell_check(A_st, tol, t, r, h), "adjoint": _cell_check(A_adj, tol, t, r, h)}
        return AlphaRecord(al, r, rho > tol, rho, tol, tol / 10 <= rho <= 10 * tol, checks)

    results = ordered_map(work, cells, threads)
    records = []
    for i, s in enumerate(samples):
        per = tuple(results[i * len(alphas) : (i + 1) * len(alphas)])
        S = {o: tuple(x.alpha for x in per if x.not_quasinilpotent and x.checks[o].passes) for o in ORIENTATIONS}
        records.append(FRecord(s.name, per, S))
    verdicts, counter = {}, {}
    for o in ORIENTATIONS:
        verdicts[o], counter[o] = _verdict(records, o)
    return ProbeReport(a, b, t, m, phi, alphas, tuple(records), verdicts, counter)


@dataclass(frozen=True)
class ChainResult:
    """Outcome of the separation argument for one operator.

    ``delta = 1 / max ||R(xi)||`` over the sampled curve; the chain holds when
    ``2/t < delta``.  Trials are run only when it holds.
    """

    alpha: complex | None
    F: str | None
    status: str  # "ok" | "no_curve" | "curve_hit"
    curve: tuple[complex, ...] = ()
    max_resolvent: float | None = None
    argmax: complex | None = None
    delta: float | None = None
    curve_clearance: float | None = None
    clears_dilation: bool | None = None
    resolvent_le_1_over_t: bool | None = None
    chain_holds: bool | None = None
    trial_outcomes: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def all_separated(self) -> bool:
        return set(self.trial_outcomes) <= {"separated"}

    def to_dict(self) -> dict:
        d = {
            "F": self.F,
            "alpha": None if self.alpha is None else _cjson(self.alpha),
            "status": self.status,
            "curve": [_cjson(z) for z in self.curve],
            "max_resolvent": self.max_resolvent,
            "argmax": None if self.argmax is None else _cjson(self.argmax),
            "delta": self.delta,
            "curve_clearance": self.curve_clearance,
            "clears_dilation": self.clears_dilation,
            "resolvent_le_1_over_t": self.resolvent_le_1_over_t,
            "chain_holds": self.chain_holds,
            "trial_outcomes": dict(sorted(self.trial_outcomes.items())),
        }
        if self.detail:
            d["detail"] = self.detail
        return d


def chain_check(
    A,
    spec: SpectrumSet,
    phi: float,
    t: float,
    rng: np.random.Generator,
    n_trials: int = 20,
    samples_per_edge: int = 64,
    alpha: complex | None = None,
    F: str | None = None,
) -> ChainResult:
    """Curve around the component of ``spec + B(0, phi)`` farthest from 0, then the chain ``2/t < delta``."""
    A = as_operator(A)
    try:
        curve = separating_curve(spec, "farthest", radius=phi)
    except SeparationError as exc:
        return ChainResult(alpha, F, "no_curve", detail=str(exc))
    try:
        maxR, arg = max_resolvent_on_curve(A, curve, samples_per_edge)
    except CurveHitError as exc:
        return ChainResult(alpha, F, "curve_hit", tuple(curve.vertices), detail=str(exc))
    delta = 1.0 / maxR
    clearance = float(spec.distance_to(curve.sample(samples_per_edge)).min())
    eps = 2.0 / t
    holds = eps < delta
    outcomes: dict[str, int] = {}
    if holds:
        for _ in range(n_trials):
            B = random_perturbation(A.dim, eps, rng)
            res = semicontinuity_trial(A, curve, B)
            outcomes[res.outcome] = outcomes.get(res.outcome, 0) + 1
    return ChainResult(
        alpha, F, "ok", tuple(curve.vertices), maxR, arg, delta, clearance,
        clearance > phi, maxR <= 1.0 / t, holds, outcomes,
    )


@dataclass(frozen=True)
class PipelineReport:
    a: float
    b: float
    t: float
    m: float
    cases: tuple[ChainResult, ...]

    @property
    def failures(self) -> list[ChainResult]:
        return [c for c in self.cases if not c.chain_holds]

    def to_dict(self) -> dict:
        return {
            "kind": "pipeline",
            "params": {"a": self.a, "b": self.b, "t": self.t, "m": self.m, "epsilon": 2.0 / self.t},
            "n_cases": len(self.cases),
            "n_chain_holds": sum(bool(c.chain_holds) for c in self.cases),
            "cases": [c.to_dict() for c in self.cases],
        }


def theorem41_pipeline(
    T,
    t: float,
    phi: PhiSpec,
    F_sampler: Callable,
    alpha_grid: Sequence[complex],
    a: float = 1.0,
    b: float = 1.0,
    seed: int = 0,
    n_trials: int = 20,
    samples_per_edge: int = 64,
    qtol: float = QTOL,
    threads: int | None = None,
) -> PipelineReport:
    """Run the separation argument on every ``(F, alpha)`` whose dilated adjoint-side spectrum is disconnected."""
    Tt, m, alphas, samples = _prepare(T, a, b, t, phi, F_sampler, alpha_grid)
    Tstar = adjoint(Tt)
    cells = [(k, s, al) for k, (s, al) in enumerate((s, al) for s in samples for al in alphas)]

    def work(cell):
        k, s, al = cell
        A = Operator(Tstar.entries + al * s.matrix)
        spec = _snapped_spectrum(A, perturbation_tol(Tt, b, al, qtol))
        r = phi(al)
        if dilate_and_test(spec, r).connected:
            return None
        rng = np.random.default_rng([seed, k])
        return chain_check(A, spec, r, t, rng, n_trials, samples_per_edge, al, s.name)

    cases = tuple(c for c in ordered_map(work, cells, threads) if c is not None)
    return PipelineReport(a, b, t, m, cases)


@dataclass(frozen=True)
class CertificateReport:
    status: str  # "certified" | "not_certified" | "no_witness" | "impossible"
    a: float
    b: float
    t: float
    m: float
    witnesses: tuple[dict, ...] = ()
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": "certificate",
            "status": self.status,
            "params": {"a": self.a, "b": self.b, "t": self.t, "m": self.m},
            "witnesses": list(self.witnesses),
            "detail": self.detail,
        }


def r_boundability_certificate(
    A,
    a: float,
    b: float,
    t: float,
    F_sampler: Callable,
    alpha_grid: Sequence[complex],
    phi: PhiSpec,
    h: float | None = None,
    connect_tol: float | None = None,
    samples_per_edge: int = 64,
    qtol: float = QTOL,
) -> CertificateReport:
    """Search for a resolvent-bound certificate on ``A~ + alpha F``.

    Witness ``F``: at least two alphas (the set D) with disconnected spectrum.
    For each witness, S collects the alphas of D passing the inclusion and
    the dilated disconnectedness; each needs a curve with ``max ||R|| <= 1/t``,
    re-verified on a 4x denser sampling.  If no curve can satisfy the bound
    (every separating curve comes within half the largest spanning-tree edge
    of the spectrum, so ``max ||R|| >= 2 / bottleneck``), the certificate is
    reported impossible.
    """
    A = as_operator(A)
    spec0 = eigenvalues(A)
    tol0 = spec0.cluster_tol if connect_tol is None else float(connect_tol)
    if not dilate_and_test(spec0, tol0 / 2).connected:
        raise PreconditionError(f"spectrum of A is not connected at tolerance {tol0:.3e}")
    At, m, alphas, samples = _prepare(A, a, b, t, phi, F_sampler, alpha_grid)
    h = t / 4 if h is None else float(h)

    witness_D = []
    possible_any = False
    for s in samples:
        D = []
        for al in alphas:
            B = Operator(At.entries + al * s.matrix)
            spec = _snapped_spectrum(B, perturbation_tol(At, b, al, qtol))
            if dilate_and_test(spec, 0.0).n_components >= 2:
                D.append((al, B, spec))
        if len(D) < 2:
            continue
        lower = {al: 2.0 / mst_bottleneck(spec) for al, _, spec in D}
        witness_D.append((s, D, lower))
        possible_any |= sum(lb <= 1.0 / t for lb in lower.values()) >= 2
    if not witness_D:
        return CertificateReport("no_witness", a, b, t, m, (), "no sampled F disconnects the spectrum for two alphas")
    if not possible_any:
        impossible = tuple(
            {"F": s.name, "D_size": len(D), "alphas": [{"alpha": _cjson(al), "resolvent_lower_bound": lb}
                                                       for al, lb in lower.items()]}
            for s, D, lower in witness_D
        )
        return CertificateReport(
            "impossible", a, b, t, m, impossible,
            "1/t lies below the least resolvent norm attainable on any separating curve",
        )

    witnesses = []
    for s, D, lower in witness_D:
        entries = []
        for al, B, spec in D:
            r = phi(al)
            chk = _cell_check(B, perturbation_tol(At, b, al, qtol), t, r, h)
            e = {"alpha": _cjson(al), "phi": r, "resolvent_lower_bound": lower[al], **chk.to_dict(), "in_S": False}
            if chk.passes:
                try:
                    curve = separating_curve(spec, "farthest", radius=r)
                    bound, _ = max_resolvent_on_curve(B, curve, samples_per_edge)
                    dense, _ = max_resolvent_on_curve(B, curve, 4 * samples_per_edge)
                    e.update(curve=[_cjson(z) for z in curve.vertices], bound=bound, bound_dense=dense,
                             verified=bool(bound <= 1.0 / t and dense <= 1.0 / t), in_S=True)
                except (SeparationError, CurveHitError) as exc:
                    e.update(detail=str(exc))
            entries.append(e)
        S = [e for e in entries if e["in_S"]]
        ok = len(S) >= 2 and all(e["verified"] for e in S)
        witnesses.append({"F": s.name, "D_size": len(D), "S_size": len(S), "certified": ok, "alphas": entries})

    status = "certified" if all(w["certified"] for w in witnesses) else "not_certified"
    return CertificateReport(status, a, b, t, m, tuple(witnesses))
