"""Static SVG scatter of source, target and transferred clouds."""

from __future__ import annotations

import numpy as np

COLORS = {"source": "#1f77b4", "target": "#2ca02c", "transferred": "#ff7f0e", "arrow": "#d62728"}


def scatter_svg(source, target, transferred, arrows: int = 20, seed: int = 0,
                width: int = 600, height: int = 600, radius: float = 2.5) -> str:
    """Render three 2-D point clouds plus ``arrows`` source-to-transferred segments.

    Arrow rows are a seeded sample of row indices, so output is deterministic.
    """
    source, target, transferred = (np.asarray(a, dtype=float).reshape(-1, 2) for a in (source, target, transferred))
    if arrows and source.shape[0] != transferred.shape[0]:
        raise ValueError("arrows need source and transferred rows to correspond")
    pts = np.vstack([source, target, transferred])
    if pts.shape[0] == 0:
        lo, hi = np.zeros(2), np.ones(2)
    else:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    pad = 20.0

    def to_px(p):
        x = pad + (p[:, 0] - lo[0]) / span[0] * (width - 2 * pad)
        y = height - pad - (p[:, 1] - lo[1]) / span[1] * (height - 2 * pad)
        return np.column_stack([x, y])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for name, cloud in (("source", source), ("target", target), ("transferred", transferred)):
        out.append(f'<g class="{name}" fill="{COLORS[name]}" fill-opacity="0.6">')
        for x, y in to_px(cloud):
            out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius}"/>')
        out.append("</g>")
    k = min(arrows, source.shape[0])
    if k > 0:
        rows = np.sort(np.random.default_rng(seed).choice(source.shape[0], size=k, replace=False))
        a, b = to_px(source[rows]), to_px(transferred[rows])
        out.append(f'<g class="mappings" stroke="{COLORS["arrow"]}" stroke-width="1">')
        for (x1, y1), (x2, y2) in zip(a, b):
            out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
