"""Dependency-free SVG rendering of a spectrogram."""
from __future__ import annotations

from xml.sax.saxutils import escape

from .spectrum import Spectrum

W, H = 720, 480
PAD_L, PAD_R, PAD_T, GAP = 70, 20, 20, 50
PANEL_H = (H - PAD_T - GAP - 40) // 2


def _axis(x0, y0, w, h, xmax, ymax, ylabel):
    out = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
        f'<text x="{x0 - 50}" y="{y0 + h / 2:.1f}" font-size="12" '
        f'transform="rotate(-90 {x0 - 50} {y0 + h / 2:.1f})" text-anchor="middle">'
        f"{escape(ylabel)}</text>",
        f'<text x="{x0 - 6}" y="{y0 + 4}" font-size="10" text-anchor="end">{ymax:.4g}</text>',
        f'<text x="{x0 - 6}" y="{y0 + h}" font-size="10" text-anchor="end">0</text>',
        f'<text x="{x0 + w}" y="{y0 + h + 14}" font-size="10" text-anchor="end">{xmax}</text>',
    ]
    return out


def spectrogram_svg(spec: Spectrum, title: str | None = None) -> str:
    """Two stacked panels: normalized description length and prominence stems."""
    pts = spec.points
    xmax = max(p.delta for p in pts)
    w = W - PAD_L - PAD_R

    def sx(d):
        return PAD_L + (d - 1) / max(xmax - 1, 1) * w

    top_y = PAD_T
    nmax = max(p.norm_bits for p in pts) or 1.0
    body = _axis(PAD_L, top_y, w, PANEL_H, xmax, nmax, "normalized DL (bits)")
    line = " ".join(
        f"{sx(p.delta):.2f},{top_y + PANEL_H * (1 - p.norm_bits / nmax):.2f}" for p in pts
    )
    body.append(f'<polyline points="{line}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')

    bot_y = top_y + PANEL_H + GAP
    pmax = max((pr for _, pr in spec.minima), default=0.0) or 1.0
    body += _axis(PAD_L, bot_y, w, PANEL_H, xmax, pmax, "prominence (bits)")
    for d, pr in spec.minima:
        x = sx(d)
        y = bot_y + PANEL_H * (1 - pr / pmax)
        body.append(f'<line x1="{x:.2f}" y1="{bot_y + PANEL_H}" x2="{x:.2f}" y2="{y:.2f}" '
                    'stroke="#d62728"/>')
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="#d62728"/>')
    body.append(f'<text x="{PAD_L + w / 2}" y="{H - 8}" font-size="12" text-anchor="middle">'
                "window size</text>")
    if title:
        body.insert(0, f'<title>{escape(title)}</title>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">\n' + "\n".join(body) + "\n</svg>\n"
    )
