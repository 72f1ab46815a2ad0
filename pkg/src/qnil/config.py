"""Experiment configuration: one JSON document per experiment, schema-checked."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .gallery import GallerySpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EXPERIMENTS",
    "RANDOMIZED",
    "load_config",
    "parse_config",
    "parse_complex",
    "load_schema",
]

EXPERIMENTS = ("pseudospec", "perturb_sweep", "probe", "pipeline", "zerocount", "certificate")
RANDOMIZED = ("probe", "pipeline", "certificate", "zerocount")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or line."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("qnil").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    gallery: GallerySpec
    params: dict
    seed: int | None = None
    output_dir: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def echo(self) -> dict:
        """The effective configuration, suitable for re-running."""
        d = {"experiment": self.experiment, "gallery": self.raw["gallery"], "params": self.raw["params"]}
        if self.seed is not None:
            d["seed"] = self.seed
        return d


def _key_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return "/".join(parts) if parts else "<root>"


def _schema_errors(doc: dict) -> list[str]:
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        # for oneOf failures the most relevant branch error is more useful
        e = jsonschema.exceptions.best_match(err.context) if err.context else err
        out.append(f"key '{_key_path(e)}': {e.message}")
    return out


def parse_config(doc: dict, seed_override: int | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    doc = dict(doc)
    if seed_override is not None:
        doc["seed"] = int(seed_override)
    errors = _schema_errors(doc)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    exp = doc["experiment"]
    params = doc["params"]
    try:
        gallery = GallerySpec.from_dict(doc["gallery"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key 'gallery': {exc}") from None
    seed = doc.get("seed")
    randomized = exp in RANDOMIZED or (exp == "perturb_sweep" and params.get("perturbation") == "random")
    if randomized and seed is None:
        raise ConfigError(f"key 'seed': required for the randomized experiment '{exp}'")
    _semantic_checks(exp, params, gallery)
    return ExperimentConfig(exp, gallery, params, seed, doc.get("output_dir"), doc)


def _semantic_checks(exp: str, params: dict, gallery: GallerySpec) -> None:
    if exp == "pseudospec":
        re0, re1, im0, im1 = params["region"]
        if not (re1 > re0 and im1 > im0):
            raise ConfigError("key 'params/region': expected [re_min, re_max, im_min, im_max] with max > min")
    if "alpha_grid" in params:
        if any(parse_complex(a) == 0 for a in params["alpha_grid"]):
            raise ConfigError("key 'params/alpha_grid': alpha values must be nonzero")
    if "phi" in params and params["phi"]["kind"] == "constant" and not isinstance(params["phi"]["value"], (int, float)):
        raise ConfigError("key 'params/phi/value': a constant Phi needs a number")
    if "phi" in params and params["phi"]["kind"] == "table":
        if not isinstance(params["phi"]["value"], list):
            raise ConfigError("key 'params/phi/value': a Phi table needs a list of [alpha, radius] pairs")
        have = {parse_complex(a) for a, _ in params["phi"]["value"]}
        missing = [a for a in params.get("alpha_grid", []) if parse_complex(a) not in have]
        if missing:
            raise ConfigError(f"key 'params/phi/value': no Phi entry for alpha {missing[0]}")
    if exp == "perturb_sweep":
        kind = params.get("perturbation", "kernel_range")
        if kind == "explicit":
            for k in ("e", "f"):
                if len(params.get(k, [])) != gallery.dim:
                    raise ConfigError(f"key 'params/{k}': explicit perturbation needs a vector of length {gallery.dim}")
        elif "e" in params or "f" in params:
            raise ConfigError("key 'params/e': vectors are only accepted with perturbation 'explicit'")
    if exp == "zerocount":
        mode = params["mode"]
        allowed = {"polynomial": {"degree", "phi"}, "resolvent": {"R_factor", "rho_factor"}}[mode]
        extra = set(params) - allowed - {"mode", "n_instances"}
        if extra:
            raise ConfigError(f"key 'params/{sorted(extra)[0]}': not used by zerocount mode '{mode}'")


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc, seed_override)
