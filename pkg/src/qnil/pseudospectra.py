"""Resolvent-norm grids over rectangles of the complex plane.

A grid stores ``log10 ||(zI - A)^-1||`` at the nodes ``re_min + j*h``,
``im_min + i*h``.  The sublevel set ``{||R(z)|| > 1/eps}`` is the grid
realization of the eps-pseudospectrum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .matrix_engine import SpectrumSet, as_operator, operator_norm
from .spectra import smallest_singular_values_at

__all__ = [
    "GridError",
    "PseudospectrumGrid",
    "ComponentLabeling",
    "InclusionResult",
    "pseudospectrum_grid",
    "connected_components",
    "level_contours",
    "pseudospectrum_inclusion",
    "grid_to_csv",
    "grid_from_csv",
    "components_to_csv",
    "fmt_float",
    "DEFAULT_NODE_BUDGET",
]

DEFAULT_NODE_BUDGET = 4_000_000


class GridError(ValueError):
    pass


def fmt_float(x: float) -> str:
    """17 significant digits, scientific notation; round-trips every float64."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.16e}"


def _axis_count(lo: float, hi: float, h: float) -> int:
    return int(math.floor((hi - lo) / h + 1e-9)) + 1


@dataclass(frozen=True, eq=False)
class PseudospectrumGrid:
    region: tuple[float, float, float, float]
    h: float
    log10_values: np.ndarray
    levels: tuple[float, ...] = ()
    fine_log10: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.log10_values.shape

    @property
    def re_axis(self) -> np.ndarray:
        return self.region[0] + self.h * np.arange(self.shape[1])

    @property
    def im_axis(self) -> np.ndarray:
        return self.region[2] + self.h * np.arange(self.shape[0])

    @property
    def nodes(self) -> np.ndarray:
        return self.re_axis[None, :] + 1j * self.im_axis[:, None]

    @property
    def values(self) -> np.ndarray:
        """Resolvent norms; ``inf`` at nodes on the spectrum."""
        return np.power(10.0, self.log10_values)

    def mask(self, eps: float) -> np.ndarray:
        return self.log10_values > -math.log10(eps)


def _log10_resolvent(sig: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -np.log10(sig)


def pseudospectrum_grid(
    A,
    region,
    h: float,
    refine: bool = False,
    levels=(),
    max_nodes: int = DEFAULT_NODE_BUDGET,
    threads: int | None = None,
) -> PseudospectrumGrid:
    """Sample the resolvent norm of ``A`` on a rectangular grid of step ``h``.

    With ``refine`` every cell whose corners straddle one of the eps values in
    ``levels`` is subdivided once (edge midpoints and centre are evaluated).
    """
    A = as_operator(A)
    re_min, re_max, im_min, im_max = (float(v) for v in region)
    if not (re_max > re_min and im_max > im_min):
        raise GridError(f"degenerate region {region}")
    if not h > 0:
        raise GridError(f"grid step must be positive, got {h}")
    levels = tuple(float(e) for e in levels)
    if any(e <= 0 for e in levels):
        raise GridError("eps levels must be positive")
    nx = _axis_count(re_min, re_max, h)
    ny = _axis_count(im_min, im_max, h)
    if nx * ny > max_nodes:
        raise GridError(f"grid of {nx}x{ny} nodes exceeds the node budget {max_nodes}")
    re = re_min + h * np.arange(nx)
    im = im_min + h * np.arange(ny)
    z = re[None, :] + 1j * im[:, None]
    base = _log10_resolvent(smallest_singular_values_at(A, z, threads))
    grid = PseudospectrumGrid((re_min, re_max, im_min, im_max), float(h), base, levels)
    if not (refine and levels):
        return grid

    fine = np.full((2 * ny - 1, 2 * nx - 1), np.nan)
    fine[::2, ::2] = base
    straddle = np.zeros((ny - 1, nx - 1), dtype=bool)
    for eps in levels:
        above = base > -math.log10(eps)
        corners = above[:-1, :-1].astype(int) + above[1:, :-1] + above[:-1, 1:] + above[1:, 1:]
        straddle |= (corners > 0) & (corners < 4)
    ci, cj = np.nonzero(straddle)
    if ci.size:
        offsets = [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)]
        rows = np.concatenate([2 * ci + di for di, _ in offsets])
        cols = np.concatenate([2 * cj + dj for _, dj in offsets])
        # midpoints shared by two straddling cells are evaluated once
        key = np.unique(rows * fine.shape[1] + cols)
        rows, cols = np.divmod(key, fine.shape[1])
        zf = (re_min + 0.5 * h * cols) + 1j * (im_min + 0.5 * h * rows)
        fine[rows, cols] = _log10_resolvent(smallest_singular_values_at(A, zf, threads))
    fine.setflags(write=False)
    return PseudospectrumGrid(grid.region, grid.h, base, levels, fine)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    eps: float
    count: int
    labels: np.ndarray
    step: float
    refined: bool

    def sizes(self) -> list[int]:
        return [int(np.sum(self.labels == k)) for k in range(1, self.count + 1)]


def _fine_mask(grid: PseudospectrumGrid, eps: float) -> np.ndarray:
    fine = np.array(grid.fine_log10)
    missing = np.isnan(fine)
    if missing.any():
        r, c = np.nonzero(missing)
        # nodes of unrefined cells take the side of the cell's lower-left corner
        fine[r, c] = fine[r - r % 2, c - c % 2]
    return fine > -math.log10(eps)


def connected_components(grid: PseudospectrumGrid, eps: float) -> ComponentLabeling:
    """4-connected components of the grid nodes with resolvent norm above ``1/eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    refined = grid.fine_log10 is not None and any(math.isclose(eps, e, rel_tol=1e-12) for e in grid.levels)
    if refined:
        mask = _fine_mask(grid, eps)
        step = grid.h / 2
    else:
        mask = grid.mask(eps)
        step = grid.h
    labels, count = ndimage.label(mask)
    return ComponentLabeling(float(eps), int(count), labels, step, refined)


def level_contours(grid: PseudospectrumGrid, eps: float) -> list[tuple[np.ndarray, bool]]:
    """Marching-squares level curves ``||R(z)|| = 1/eps`` as (complex vertices, closed) pairs.

    Open curves are those clipped by the region boundary.
    """
    from skimage import measure

    data = np.array(grid.log10_values)
    finite = np.isfinite(data)
    if not finite.all():
        cap = (data[finite].max() if finite.any() else 0.0) + 10.0
        data[~finite] = cap
    level = -math.log10(eps)
    if not (data.min() < level < data.max()):
        return []
    out = []
    for c in measure.find_contours(data, level):
        verts = (grid.region[0] + grid.h * c[:, 1]) + 1j * (grid.region[2] + grid.h * c[:, 0])
        closed = bool(np.allclose(c[0], c[-1]))
        out.append((verts, closed))
    return out


@dataclass(frozen=True)
class InclusionResult:
    holds: bool
    n_candidates: int
    n_evaluated: int
    witness: complex | None = None
    witness_resolvent_norm: float | None = None


def pseudospectrum_inclusion(
    A,
    spec: SpectrumSet,
    t: float,
    radius: float,
    h: float,
    threads: int | None = None,
    chunk: int = 4096,
    max_nodes: int = DEFAULT_NODE_BUDGET,
) -> InclusionResult:
    """Grid test of ``sigma_t(A) within spec + B(0, radius)``.

    Nodes of the origin-anchored lattice ``h*(Z + iZ)`` are checked; a node
    with ``||R(z)|| > 1/t`` at distance ``>= radius`` from the spectrum is a
    counterexample.  Nodes with ``|z| >= ||A|| + t`` are skipped because the
    Neumann series gives ``||R(z)|| <= 1/t`` there.  Candidates are examined
    nearest-first and the search stops at the first counterexample.
    """
    if t <= 0 or h <= 0 or radius < 0:
        raise ValueError("t and h must be positive and radius nonnegative")
    A = as_operator(A)
    R = operator_norm(A) + t
    K = int(math.floor(R / h))
    if (2 * K + 1) ** 2 > 4 * max_nodes / math.pi:
        raise GridError(f"inclusion lattice with step {h} has ~{math.pi * K * K:.3g} nodes, over the budget {max_nodes}")
    k = np.arange(-K, K + 1)
    z = (h * k[None, :] + 1j * h * k[:, None]).ravel()
    z = z[np.abs(z) < R]
    d = spec.distance_to(z)
    keep = d >= radius
    z, d = z[keep], d[keep]
    order = np.argsort(d, kind="stable")
    z = z[order]
    evaluated = 0
    for start in range(0, z.size, chunk):
        block = z[start : start + chunk]
        sig = smallest_singular_values_at(A, block, threads)
        evaluated += block.size
        bad = np.nonzero(sig < t)[0]
        if bad.size:
            i = bad[0]
            norm = np.inf if sig[i] == 0 else 1.0 / sig[i]
            return InclusionResult(False, int(z.size), evaluated, complex(block[i]), float(norm))
    return InclusionResult(True, int(z.size), evaluated)


def grid_to_csv(grid: PseudospectrumGrid) -> str:
    re0, re1, im0, im1 = grid.region
    buf = io.StringIO()
    buf.write(
        "# region=" + ",".join(fmt_float(v) for v in (re0, re1, im0, im1)) + f" h={fmt_float(grid.h)}\n"
    )
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "log10_resolvent_norm"])
    re, im = grid.re_axis, grid.im_axis
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            w.writerow([fmt_float(re[j]), fmt_float(im[i]), fmt_float(grid.log10_values[i, j])])
    return buf.getvalue()


def grid_from_csv(text: str) -> PseudospectrumGrid:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# region="):
        raise GridError("missing grid header line")
    head = lines[0][2:].split()
    meta = dict(item.split("=", 1) for item in head)
    region = tuple(float(v) for v in meta["region"].split(","))
    h = float(meta["h"])
    rows = list(csv.reader(lines[1:]))
    if rows[0] != ["re", "im", "log10_resolvent_norm"]:
        raise GridError(f"unexpected columns {rows[0]}")
    nx = _axis_count(region[0], region[1], h)
    ny = _axis_count(region[2], region[3], h)
    vals = np.array([float(r[2]) for r in rows[1:]])
    if vals.size != nx * ny:
        raise GridError(f"expected {nx * ny} rows, found {vals.size}")
    return PseudospectrumGrid(region, h, vals.reshape(ny, nx))


def components_to_csv(grid: PseudospectrumGrid, labelings) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "re", "im", "label"])
    for lab in labelings:
        ii, jj = np.nonzero(lab.labels)
        for i, j in zip(ii, jj):
            w.writerow([
                fmt_float(lab.eps),
                fmt_float(grid.region[0] + lab.step * j),
                fmt_float(grid.region[2] + lab.step * i),
                int(lab.labels[i, j]),
            ])
    return buf.getvalue()
