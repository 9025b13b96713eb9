"""Minimal deterministic SVG line plots and heat maps.

Output depends only on the data, so identical inputs give byte-identical
files (no timestamps, ids or hash salts).
"""

import math

import numpy as np

WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v):
    return f"{v:.2f}"


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 8)
        return [float(v) for v in range(a, b + 1, step) if lo <= v <= hi]
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / 6
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _label(v, log):
    if log:
        return f"1e{int(round(v))}"
    return f"{v:.4g}"


def line_plot(series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Render ``series`` (list of ``(label, x, y)``) to an SVG string."""
    pts = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        x, y = x[ok], y[ok]
        pts.append((label, np.log10(x) if logx else x, np.log10(y) if logy else y))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[2] for p in pts]) if pts else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1, logx):
        X = _fmt(sx(v))
        out.append(f'<line x1="{X}" y1="{MARGIN["top"] + ph}" x2="{X}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{_label(v, logx)}</text>')
    for v in _ticks(y0, y1, logy):
        Y = _fmt(sy(v))
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y}" x2="{MARGIN["left"]}" '
                   f'y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y}" text-anchor="end" '
                   f'dominant-baseline="middle">{_label(v, logy)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" '
               f'text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{_esc(ylabel)}</text>')
    for k, (label, x, y) in enumerate(pts):
        color = COLORS[k % len(COLORS)]
        coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                   f'points="{coords}"/>')
        if label:
            ly = MARGIN["top"] + 16 + 16 * k
            out.append(f'<text x="{MARGIN["left"] + pw - 8}" y="{ly}" text-anchor="end" '
                       f'fill="{color}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heat_map(values, title="", xlabel="longitude (deg)", ylabel="latitude (deg)",
             extent=(-180.0, 180.0, -90.0, 90.0)):
    """Render a 2-D array (rows top to bottom) as colored cells."""
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    span = hi - lo if hi > lo else 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"] - 60
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    cw, chh = pw / nx, ph / ny
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>',
    ]
    for i in range(ny):
        for j in range(nx):
            q = (v[i, j] - lo) / span
            out.append(
                f'<rect x="{_fmt(MARGIN["left"] + j * cw)}" y="{_fmt(MARGIN["top"] + i * chh)}" '
                f'width="{_fmt(cw + 0.05)}" height="{_fmt(chh + 0.05)}" fill="{_colormap(q)}"/>'
            )
    x0, x1, y0, y1 = extent
    out.append(f'<text x="{MARGIN["left"]}" y="{MARGIN["top"] + ph + 18}">{x0:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw}" y="{MARGIN["top"] + ph + 18}" '
               f'text-anchor="end">{x1:g}</text>')
    out.append(f'<text x="{MARGIN["left"] - 6}" y="{MARGIN["top"] + 10}" '
               f'text-anchor="end">{y1:g}</text>')
    out.append(f'<text x="{MARGIN["left"] - 6}" y="{MARGIN["top"] + ph}" '
               f'text-anchor="end">{y0:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" '
               f'text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{_esc(ylabel)}</text>')
    bx = MARGIN["left"] + pw + 20
    for k in range(50):
        q = 1 - k / 49
        out.append(f'<rect x="{bx}" y="{_fmt(MARGIN["top"] + k * ph / 50)}" width="16" '
                   f'height="{_fmt(ph / 50 + 0.05)}" fill="{_colormap(q)}"/>')
    out.append(f'<text x="{bx + 20}" y="{MARGIN["top"] + 10}">{hi:.3g}</text>')
    out.append(f'<text x="{bx + 20}" y="{MARGIN["top"] + ph}">{lo:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _colormap(q):
    # blue -> yellow -> red
    q = min(max(q, 0.0), 1.0)
    if q < 0.5:
        a = q / 0.5
        r, g, b = 40 + a * 215, 60 + a * 170, 200 - a * 160
    else:
        a = (q - 0.5) / 0.5
        r, g, b = 255, 230 - a * 200, 40 - a * 20
    return f"rgb({int(r)},{int(g)},{int(b)})"
