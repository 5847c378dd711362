"""Minimal deterministic SVG emitter for degradation line plots.

Hand-rolled on purpose: the plots are a convenience output and must be
byte-identical across re-runs, which rules out plotting libraries that embed
session identifiers.
"""
from __future__ import annotations

W, H = 640, 400
MARGIN = 50
COLORS = {"latent": "#1f77b4", "spatial": "#d62728"}


def _polyline(points, color, dash=""):
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="2"{extra} points="{pts}"/>'


def degradation_svg(attack: str, curves_by_codec: dict, intervals: int) -> str:
    """Mean provenance (solid) and fidelity/100 (dashed) per codec by interval."""
    def sx(interval):
        return MARGIN + (interval - 1) * (W - 2 * MARGIN) / max(intervals - 1, 1)

    def sy(value):
        return H - MARGIN - value * (H - 2 * MARGIN)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{MARGIN}" y1="{H - MARGIN}" x2="{W - MARGIN}" y2="{H - MARGIN}" '
             'stroke="black"/>',
             f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{H - MARGIN}" stroke="black"/>',
             f'<text x="{W // 2}" y="24" text-anchor="middle" font-size="16">'
             f'{attack}: provenance (solid) / fidelity÷100 (dashed)</text>',
             f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-size="12">'
             'intensity interval</text>']
    for grid in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(grid)
        parts.append(f'<line x1="{MARGIN}" y1="{y:.1f}" x2="{W - MARGIN}" y2="{y:.1f}" '
                     'stroke="#dddddd"/>')
        parts.append(f'<text x="{MARGIN - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{grid:.2f}</text>')
    y_legend = 40
    for codec in sorted(curves_by_codec):
        color = COLORS.get(codec, "#333333")
        curve = curves_by_codec[codec]
        parts.append(_polyline([(sx(i), sy(p)) for i, p, _ in curve], color))
        parts.append(_polyline([(sx(i), sy(f / 100.0)) for i, _, f in curve], color, dash="5,4"))
        parts.append(f'<text x="{W - MARGIN}" y="{y_legend}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{codec}</text>')
        y_legend += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
