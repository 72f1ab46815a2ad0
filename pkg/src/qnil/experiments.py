"""Experiment runners: each maps a validated config to in-memory artifacts.

Artifacts are returned as ``{filename: text}`` so the caller controls where
and how they are written.  Every artifact is a pure function of the config
(timing lives only in the manifest).
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .config import ExperimentConfig, parse_complex
from .gallery import build, normalize_to
from .matrix_engine import adjoint, eigenvalues
from .probe import PhiSpec, default_F_sampler, probe_conjecture, r_boundability_certificate, theorem41_pipeline
from .pseudospectra import (
    DEFAULT_NODE_BUDGET,
    components_to_csv,
    connected_components,
    fmt_float,
    grid_to_csv,
    pseudospectrum_grid,
)
from .rank_one import RankOnePerturbation, kernel_range_perturbation, random_nilpotent_pair, trichotomy_classify
from .svg import contour_layers, emit_contour_svg
from .zero_count import random_polynomial_instance, resolvent_instance, verify_prop51

__all__ = ["run_experiment", "to_json", "RUNNERS"]


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def to_json(obj) -> str:
    """Deterministic JSON; floats use Python's shortest round-trip repr."""
    return json.dumps(_sanitize(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _alphas(params) -> list[complex]:
    return [parse_complex(a) for a in params["alpha_grid"]]


def _phi(params) -> PhiSpec:
    return PhiSpec.from_dict(params["phi"])


def _sampler(cfg: ExperimentConfig):
    p = cfg.params
    return default_F_sampler(cfg.seed, p.get("n_F", 32), p.get("include_kernel_range", True))


def run_pseudospec(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    A = build(cfg.gallery)
    eps = [float(e) for e in p["eps"]]
    grid = pseudospectrum_grid(
        A, p["region"], p["resolution"], refine=p.get("refine", False), levels=eps,
        max_nodes=p.get("max_nodes", DEFAULT_NODE_BUDGET), threads=threads,
    )
    labelings = [connected_components(grid, e) for e in eps]
    layers = contour_layers(grid, eps)
    out = {"grid.csv": grid_to_csv(grid), "components.csv": components_to_csv(grid, labelings)}
    if p.get("svg", True):
        out["contours.svg"] = emit_contour_svg(grid, eps, title=f"{cfg.gallery.kind}({cfg.gallery.dim})")
    report = {
        "kind": "pseudospec",
        "region": list(grid.region),
        "h": grid.h,
        "shape": list(grid.shape),
        "refined": grid.fine_log10 is not None,
        "spectrum": [complex(z) for z in eigenvalues(A).points],
        "components": [
            {"eps": lab.eps, "count": lab.count, "sizes": lab.sizes(), "refined": lab.refined,
             "contours": len(layer.curves), "clipped": layer.clipped}
            for lab, layer in zip(labelings, layers)
        ],
    }
    out["report.json"] = to_json(report)
    lines = [f"pseudospectrum of {cfg.gallery.kind}({cfg.gallery.dim}) on {grid.shape[1]} x {grid.shape[0]} nodes, h = {grid.h:g}"]
    for lab, layer in zip(labelings, layers):
        note = " (clipped)" if layer.clipped else ""
        lines.append(f"eps = {lab.eps:g}: {lab.count} component(s){note}")
    out["summary.txt"] = "\n".join(lines) + "\n"
    return out


def run_perturb_sweep(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    T = build(cfg.gallery)
    if "a" in p:
        T, _ = normalize_to(T, p["a"])
    kind = p.get("perturbation", "kernel_range")
    if kind == "kernel_range":
        e, f = kernel_range_perturbation(T)
    elif kind == "random":
        e, f = random_nilpotent_pair(T.dim, np.random.default_rng(cfg.seed))
    else:
        e = np.array([parse_complex(v) for v in p["e"]])
        f = np.array([parse_complex(v) for v in p["f"]])
    pert = RankOnePerturbation(e, f).rescaled(p.get("b", 1.0))
    op = adjoint(T) if p.get("adjoint", False) else T
    tri = trichotomy_classify(op, pert.e, pert.f, _alphas(p))
    rows = [
        [fmt_float(s.alpha.real), fmt_float(s.alpha.imag), s.n_nonzero, fmt_float(s.spectral_radius), tri.case]
        for s in tri.samples
    ]
    out = {"sweep.csv": _csv(["alpha_re", "alpha_im", "n_nonzero_eigs", "max_abs_eig", "case"], rows)}
    report = {
        "kind": "perturb_sweep",
        "operator": "T*" if p.get("adjoint", False) else "T",
        "perturbation": kind,
        "case": tri.case,
        "K": tri.K,
        "borderline": tri.borderline,
        "samples": [
            {"alpha": s.alpha, "n_nonzero": s.n_nonzero, "spectral_radius": s.spectral_radius,
             "tol": s.tol, "quasinilpotent": s.quasinilpotent, "borderline": s.borderline}
            for s in tri.samples
        ],
    }
    out["report.json"] = to_json(report)
    head = f"{tri.case}" + (f" with K = {tri.K}" if tri.K is not None else "")
    out["summary.txt"] = (
        f"rank-one sweep of {cfg.gallery.kind}({cfg.gallery.dim}) over {len(tri.samples)} alphas: {head}\n"
        f"borderline samples: {len(tri.borderline)}\n"
    )
    return out


def _probe_rows(rep, with_abt=False):
    rows = []
    for fr in rep.per_F:
        for ar in fr.per_alpha:
            st, ad = ar.checks["stated"], ar.checks["adjoint"]
            row = [fr.name, fmt_float(ar.alpha.real), fmt_float(ar.alpha.imag), int(ar.not_quasinilpotent),
                   int(ar.borderline), int(st.inclusion_holds), int(st.dilated_disconnected),
                   int(ad.inclusion_holds), int(ad.dilated_disconnected)]
            rows.append(([fmt_float(rep.a), fmt_float(rep.b), fmt_float(rep.t)] if with_abt else []) + row)
    return rows


_PROBE_COLS = ["F", "alpha_re", "alpha_im", "not_quasinilpotent", "borderline", "stated_inclusion",
               "stated_disconnected", "adjoint_inclusion", "adjoint_disconnected"]


def run_probe(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    T = build(cfg.gallery)
    triples = p.get("abt_grid") or [[p["a"], p["b"], p["t"]]]
    reports = [
        probe_conjecture(T, a, b, t, _phi(p), _sampler(cfg), _alphas(p), h=p.get("resolution"), threads=threads)
        for a, b, t in triples
    ]
    sweep = "abt_grid" in p
    if sweep:
        doc = {"kind": "probe_sweep", "runs": [r.to_dict() for r in reports]}
        rows = [row for r in reports for row in _probe_rows(r, True)]
        cols = ["a", "b", "t"] + _PROBE_COLS
    else:
        doc = reports[0].to_dict()
        rows, cols = _probe_rows(reports[0]), _PROBE_COLS
    lines = []
    for r in reports:
        relevant = sum(fr.constrains for fr in r.per_F)
        lines.append(
            f"a = {r.a:g}, b = {r.b:g}, t = {r.t:g}: {len(r.per_F)} F samples, {relevant} with >= 2 "
            f"non-quasinilpotent alphas; verdict stated = {r.verdicts['stated']}, adjoint = {r.verdicts['adjoint']}"
        )
    return {"report.json": to_json(doc), "summary.csv": _csv(cols, rows), "summary.txt": "\n".join(lines) + "\n"}


def run_pipeline(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    rep = theorem41_pipeline(
        build(cfg.gallery), p["t"], _phi(p), _sampler(cfg), _alphas(p), a=p.get("a", 1.0), b=p.get("b", 1.0),
        seed=cfg.seed, n_trials=p.get("n_trials", 20), samples_per_edge=p.get("samples_per_edge", 64),
        threads=threads,
    )
    rows = [
        [c.F, fmt_float(c.alpha.real), fmt_float(c.alpha.imag), c.status,
         "" if c.delta is None else fmt_float(c.delta), "" if c.chain_holds is None else int(c.chain_holds),
         c.trial_outcomes.get("separated", 0), sum(c.trial_outcomes.values())]
        for c in rep.cases
    ]
    cols = ["F", "alpha_re", "alpha_im", "status", "delta", "chain_holds", "n_separated", "n_trials"]
    held = sum(bool(c.chain_holds) for c in rep.cases)
    summary = (
        f"epsilon = 2/t = {2 / rep.t:g}; {len(rep.cases)} disconnected (F, alpha) case(s); "
        f"chain 2/t < delta holds in {held}\n"
    )
    return {"report.json": to_json(rep.to_dict()), "cases.csv": _csv(cols, rows), "summary.txt": summary}


def run_certificate(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    rep = r_boundability_certificate(
        build(cfg.gallery), p["a"], p["b"], p["t"], _sampler(cfg), _alphas(p), _phi(p),
        h=p.get("resolution"), connect_tol=p.get("connect_tol"), samples_per_edge=p.get("samples_per_edge", 64),
    )
    summary = f"certificate status: {rep.status}; {len(rep.witnesses)} witness F(s)\n"
    if rep.detail:
        summary += rep.detail + "\n"
    return {"report.json": to_json(rep.to_dict()), "summary.txt": summary}


def run_zerocount(cfg: ExperimentConfig, threads=None) -> dict[str, str]:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    mode = p["mode"]
    if mode == "polynomial":
        make = lambda: random_polynomial_instance(rng, p.get("degree", 10), p.get("phi", 1.0))  # noqa: E731
    else:
        T = build(cfg.gallery)
        make = lambda: resolvent_instance(T, rng, p.get("R_factor", 1.5), p.get("rho_factor", 1.5))  # noqa: E731
    rows, records = [], []
    for k in range(p["n_instances"]):
        inst = make()
        res = verify_prop51(inst, inst.cfg, inst.M, threads=threads)
        c = inst.cfg
        rows.append([k, fmt_float(c.rho), fmt_float(c.phi), fmt_float(c.a_point.real), fmt_float(c.a_point.imag),
                     fmt_float(res.M), fmt_float(res.fa_abs), res.n_actual, fmt_float(res.n_bound), res.status])
        records.append({"rho": c.rho, "phi": c.phi, "a": c.a_point, "M": res.M, "fa_abs": res.fa_abs,
                        "n_actual": res.n_actual, "n_bound": res.n_bound, "status": res.status})
    n_holds = sum(r["status"] == "holds" for r in records)
    cols = ["instance", "rho", "phi", "a_re", "a_im", "M", "fa_abs", "n_actual", "n_bound", "status"]
    report = {"kind": "zerocount", "mode": mode, "n_instances": len(records), "n_holds": n_holds, "instances": records}
    summary = f"zero-count bound ({mode}): holds in {n_holds}/{len(records)} instances\n"
    return {"zerocount.csv": _csv(cols, rows), "report.json": to_json(report), "summary.txt": summary}


RUNNERS = {
    "pseudospec": run_pseudospec,
    "perturb_sweep": run_perturb_sweep,
    "probe": run_probe,
    "pipeline": run_pipeline,
    "certificate": run_certificate,
    "zerocount": run_zerocount,
}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> dict[str, str]:
    return RUNNERS[cfg.experiment](cfg, threads)
