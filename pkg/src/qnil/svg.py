"""Level-set contours of a resolvent-norm grid as a standalone SVG document."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .pseudospectra import PseudospectrumGrid, level_contours

__all__ = ["ContourLayer", "contour_layers", "emit_contour_svg"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
PLOT = 480.0
MARGIN = 56.0
LEGEND_W = 190.0


@dataclass(frozen=True)
class ContourLayer:
    eps: float
    curves: tuple  # of (complex vertices, closed)

    @property
    def empty(self) -> bool:
        return not self.curves

    @property
    def clipped(self) -> bool:
        return any(not closed for _, closed in self.curves)

    @property
    def n_closed(self) -> int:
        return sum(closed for _, closed in self.curves)


def contour_layers(grid: PseudospectrumGrid, eps_list) -> list[ContourLayer]:
    return [ContourLayer(float(e), tuple(level_contours(grid, e))) for e in eps_list]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def emit_contour_svg(grid: PseudospectrumGrid, eps_list, title: str = "") -> str:
    """One polyline set per eps, with axes and a legend.

    Curves cut by the region boundary are flagged ``clipped`` in the legend;
    an eps without level set is listed as ``empty``.
    """
    re0, re1, im0, im1 = grid.region
    span = max(re1 - re0, im1 - im0)
    sx = PLOT * (re1 - re0) / span
    sy = PLOT * (im1 - im0) / span
    k = PLOT / span
    width = MARGIN * 2 + sx + LEGEND_W
    height = MARGIN * 2 + sy

    def px(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return MARGIN + (z.real - re0) * k, MARGIN + (im1 - z.imag) * k

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width:.3f}" height="{height:.3f}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{MARGIN:.3f}" y="{MARGIN / 2:.3f}" font-size="13">{escape(title)}</text>')
    out.append('<g id="axes" stroke="black" fill="none" stroke-width="1">')
    out.append(f'<rect x="{MARGIN:.3f}" y="{MARGIN:.3f}" width="{sx:.3f}" height="{sy:.3f}"/>')
    if re0 < 0 < re1:
        x = MARGIN - re0 * k
        out.append(f'<line x1="{x:.3f}" y1="{MARGIN:.3f}" x2="{x:.3f}" y2="{MARGIN + sy:.3f}" stroke="#bbbbbb" stroke-dasharray="3,3"/>')
    if im0 < 0 < im1:
        y = MARGIN + im1 * k
        out.append(f'<line x1="{MARGIN:.3f}" y1="{y:.3f}" x2="{MARGIN + sx:.3f}" y2="{y:.3f}" stroke="#bbbbbb" stroke-dasharray="3,3"/>')
    out.append("</g>")
    out.append('<g id="ticks" fill="black" stroke="none">')
    for v in _ticks(re0, re1):
        x = MARGIN + (v - re0) * k
        out.append(f'<line x1="{x:.3f}" y1="{MARGIN + sy:.3f}" x2="{x:.3f}" y2="{MARGIN + sy + 4:.3f}" stroke="black"/>')
        out.append(f'<text x="{x:.3f}" y="{MARGIN + sy + 16:.3f}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(im0, im1):
        y = MARGIN + (im1 - v) * k
        out.append(f'<line x1="{MARGIN - 4:.3f}" y1="{y:.3f}" x2="{MARGIN:.3f}" y2="{y:.3f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 6:.3f}" y="{y + 4:.3f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{MARGIN + sx / 2:.3f}" y="{height - 12:.3f}" text-anchor="middle">Re z</text>')
    out.append(f'<text x="14" y="{MARGIN + sy / 2:.3f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MARGIN + sy / 2:.3f})">Im z</text>')
    out.append("</g>")

    layers = contour_layers(grid, eps_list)
    for i, layer in enumerate(layers):
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<g class="level" data-eps="{layer.eps!r}" stroke="{color}" fill="none" stroke-width="1.2">')
        for verts, closed in layer.curves:
            x, y = px(verts)
            pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
            tag = "polygon" if closed else "polyline"
            flag = "closed" if closed else "clipped"
            out.append(f'<{tag} data-flag="{flag}" points="{pts}"/>')
        out.append("</g>")

    lx = MARGIN * 1.5 + sx
    out.append('<g id="legend">')
    out.append(f'<text x="{lx:.3f}" y="{MARGIN:.3f}" font-weight="bold">eps levels</text>')
    for i, layer in enumerate(layers):
        y = MARGIN + 18 * (i + 1)
        color = PALETTE[i % len(PALETTE)]
        note = " (empty)" if layer.empty else (" (clipped)" if layer.clipped else "")
        out.append(f'<line x1="{lx:.3f}" y1="{y - 4:.3f}" x2="{lx + 20:.3f}" y2="{y - 4:.3f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26:.3f}" y="{y:.3f}">eps = {layer.eps:.4g}{note}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
