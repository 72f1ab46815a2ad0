"""Command line entry point.

    qnil <experiment> --config FILE [--out DIR] [--threads N] [--seed S]
    qnil validate --config FILE
    qnil replay --manifest FILE [--out DIR] [--threads N]

Exit status: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import set_default_threads
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import run_experiment, to_json
from .matrix_engine import EigenvalueError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MANIFEST = "manifest.json"


class OutputError(OSError):
    pass


def atomic_write(path: Path, text: str) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _prepare_dir(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = tempfile.NamedTemporaryFile(dir=out, prefix=".qnil-write-test.", delete=True)
        probe.close()
    except OSError as exc:
        raise OutputError(f"output directory {out} is not writable: {exc.strerror or exc}") from None


def execute(cfg: ExperimentConfig, out: Path, threads: int | None = None) -> dict:
    """Run ``cfg``, write its artifacts and manifest into ``out``; returns the manifest."""
    _prepare_dir(out)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    files = run_experiment(cfg, threads)
    elapsed = time.perf_counter() - t0
    for name in sorted(files):
        atomic_write(out / name, files[name])
    manifest = {
        "tool": "qnil",
        "version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.echo(),
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
        "started_utc": started.isoformat(timespec="seconds"),
        "elapsed_seconds": round(elapsed, 6),
        "files": {name: {"sha256": _sha256(files[name]), "bytes": len(files[name].encode("utf-8"))}
                  for name in sorted(files)},
    }
    atomic_write(out / MANIFEST, to_json(manifest))
    return manifest


def _numeric_errors():
    from scipy.linalg import LinAlgError as ScipyLinAlgError

    from .curves import CurveHitError, SeparationError
    from .probe import PreconditionError, ProbeError
    from .pseudospectra import GridError
    from .zero_count import BoundaryZeroError, Prop51ConstraintError

    return (EigenvalueError, GridError, BoundaryZeroError, Prop51ConstraintError, SeparationError,
            CurveHitError, PreconditionError, ProbeError, np.linalg.LinAlgError, ScipyLinAlgError,
            FloatingPointError, ArithmeticError)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnil", description="Pseudospectra and rank-one perturbation experiments.")
    ap.add_argument("--version", action="version", version=f"qnil {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for exp in EXPERIMENTS:
        p = sub.add_parser(exp, help=f"run the {exp} experiment")
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides output_dir in the config)")
        p.add_argument("--threads", type=int, help="worker threads (default: $QNIL_THREADS or 1)")
        p.add_argument("--seed", type=int, help="override the configured seed")
    p = sub.add_parser("validate", help="check a configuration without running it")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p = sub.add_parser("replay", help="re-run the configuration echoed in a manifest and compare hashes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory (default: <manifest dir>/replay)")
    p.add_argument("--threads", type=int)
    return ap


def _err(msg: str) -> None:
    print(f"qnil: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = getattr(args, "threads", None)
    if threads is not None:
        if threads < 1:
            _err("--threads must be >= 1")
            return EXIT_CONFIG
        set_default_threads(threads)
    numeric = _numeric_errors()
    try:
        if args.command == "validate":
            cfg = load_config(args.config, args.seed)
            print(f"ok: {cfg.experiment} configuration is valid")
            return EXIT_OK
        if args.command == "replay":
            return _replay(args, threads)
        cfg = load_config(args.config, args.seed)
        if cfg.experiment != args.command:
            raise ConfigError(f"key 'experiment': config is for '{cfg.experiment}', not '{args.command}'")
        out = Path(args.out or cfg.output_dir or f"qnil-{cfg.experiment}")
        manifest = execute(cfg, out, threads)
        print((out / "summary.txt").read_text(), end="")
        print(f"wrote {len(manifest['files'])} file(s) and {MANIFEST} to {out}")
        return EXIT_OK
    except (ConfigError, OutputError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except numeric as exc:
        _err(f"numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    finally:
        if threads is not None:
            set_default_threads(None)


def _replay(args, threads) -> int:
    mpath = Path(args.manifest)
    try:
        manifest = json.loads(mpath.read_text())
        echoed = manifest["config"]
        expected = manifest["files"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read manifest {mpath}: {exc}") from None
    cfg = parse_config(echoed)
    out = Path(args.out) if args.out else mpath.parent / "replay"
    fresh = execute(cfg, out, threads)
    mismatched = sorted(
        name for name in set(expected) | set(fresh["files"])
        if expected.get(name, {}).get("sha256") != fresh["files"].get(name, {}).get("sha256")
    )
    if mismatched:
        _err("replay differs in: " + ", ".join(mismatched))
        return EXIT_NUMERIC
    print(f"replay reproduced {len(expected)} file(s) byte-identically in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
