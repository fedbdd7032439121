"""Minimal static SVG line charts for sweep outputs."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = {"rica": "#1b6ca8", "fastica": "#d1495b", "nlica": "#66a182"}
W, H, PAD = 480, 320, 48


def sweep_svg(rows, x_key, title="", y_key="mcc_mean") -> str:
    """One polyline per (chart, method) of ``y_key`` against ``x_key``."""
    series = {}
    for r in rows:
        y = r[y_key]
        if y is None or not math.isfinite(y):
            continue
        series.setdefault((r["chart"], r["method"]), []).append((float(r[x_key]), float(y)))
    xs = [p[0] for pts in series.values() for p in pts] or [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo, y_hi = 0.0, 1.0

    def sx(x):
        return PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2 * PAD)

    def sy(y):
        return H - PAD - (y - y_lo) / (y_hi - y_lo) * (H - 2 * PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(x_key)}</text>',
        f'<text x="14" y="{H / 2}" font-size="12" transform="rotate(-90 14 {H / 2})">'
        f"{escape(y_key)}</text>",
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(
            f'<text x="{PAD - 6}" y="{sy(tick) + 4:.1f}" text-anchor="end" font-size="10">{tick:g}</text>'
        )
    for tick in sorted(set(xs)):
        out.append(
            f'<text x="{sx(tick):.1f}" y="{H - PAD + 14}" text-anchor="middle" font-size="9">{tick:g}</text>'
        )
    for i, ((chart, method), pts) in enumerate(sorted(series.items())):
        pts = sorted(pts)
        color = _COLORS.get(method, "#555555")
        dash = "" if i % 2 == 0 else ' stroke-dasharray="5,3"'
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{path}"/>')
        out.append(
            f'<text x="{W - PAD + 4}" y="{PAD + 14 * i}" font-size="10" fill="{color}">'
            f"{escape(method)} ({escape(chart)})</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
