"""Tiny self-contained SVG emitters for the scenario reports.

No plotting dependency: the charts are simple scaled polylines and bars, so
output bytes are deterministic for identical inputs.
"""

from __future__ import annotations

import math

W, H = 640, 400
MARGIN = 60


def _scale(vals, lo_px, hi_px, flip=False):
    finite = [v for v in vals if not (math.isinf(v) or math.isnan(v))]
    vmin, vmax = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if vmax == vmin:
        vmax = vmin + 1.0

    def to_px(v):
        frac = (v - vmin) / (vmax - vmin)
        if flip:
            frac = 1.0 - frac
        return lo_px + frac * (hi_px - lo_px)

    return to_px, vmin, vmax


def _doc(body: list[str], title: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W/2:.0f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{MARGIN}" y1="{H-MARGIN}" x2="{W-MARGIN}" y2="{H-MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{H-MARGIN}" stroke="black"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _polyline(points, color):
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
    return f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>'


def sweep_svg(rows) -> str:
    finite = [r for r in rows if not (math.isinf(r.tc_ms) or math.isnan(r.tc_ms))]
    xs = [r.d_m for r in finite]
    sx, *_ = _scale(xs, MARGIN, W - MARGIN)
    sy, *_ = _scale([r.tc_ms for r in finite], H - MARGIN, MARGIN)
    sy2, *_ = _scale([r.rr_reader for r in finite], H - MARGIN, MARGIN)
    body = [
        _polyline([(sx(r.d_m), sy(r.tc_ms)) for r in finite], "#444444"),
        _polyline([(sx(r.d_m), sy2(r.rr_reader)) for r in finite], "#cc2222"),
        f'<text x="{W-MARGIN}" y="{H-20}" text-anchor="end" font-size="12">distance (m); grey: charge time, red: read rate</text>',
    ]
    return _doc(body, "distance sweep")


def correlation_svg(pairs) -> str:
    sx, *_ = _scale([p[1] for p in pairs], MARGIN, W - MARGIN)
    sy, *_ = _scale([p[2] for p in pairs], H - MARGIN, MARGIN)
    body = [
        f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="4" fill="#2255cc"/>'
        for _, a, b in pairs
    ]
    body.append(
        f'<text x="{W-MARGIN}" y="{H-20}" text-anchor="end" font-size="12">device charge time vs reader estimate (ms)</text>'
    )
    return _doc(body, "estimator correlation")


def benchmark_svg(summary, policies, distances) -> str:
    group_w = (W - 2 * MARGIN) / max(1, len(distances))
    bar_w = group_w / (len(policies) + 1)
    colors = {"cem": "#888888", "iem": "#cc8822", "readme": "#2255cc"}
    body = []
    for gi, d in enumerate(distances):
        for pi, p in enumerate(policies):
            rate = summary.success_rate.get((p, d), 0.0)
            x = MARGIN + gi * group_w + pi * bar_w
            h = rate * (H - 2 * MARGIN)
            y = H - MARGIN - h
            body.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w*0.9:.1f}" height="{h:.1f}" '
                f'fill="{colors.get(p, "#444444")}"/>'
            )
        body.append(
            f'<text x="{MARGIN + gi*group_w + group_w/2:.0f}" y="{H-MARGIN+18}" '
            f'text-anchor="middle" font-size="12">{d:g} m</text>'
        )
    body.append(
        f'<text x="{W-MARGIN}" y="{H-16}" text-anchor="end" font-size="12">success rate; grey: cem, orange: iem, blue: readme</text>'
    )
    return _doc(body, "policy benchmark")
