"""Minimal static SVG charts: a multi-series line plot and a stacked bar chart."""

from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
W, H = 480, 320
ML, MR, MT, MB = 56, 130, 30, 44


def _frame(title, xlabel, ylabel):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{(ML + W - MR) / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
        f'<text x="{(ML + W - MR) / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="14" y="{(MT + H - MB) / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {(MT + H - MB) / 2:.1f})">{escape(ylabel)}</text>',
    ]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, title="", xlabel="", ylabel="", y_range=None):
    """``series`` maps a legend name to ``(xs, ys)``; returns the SVG text."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y0, y1 = y_range if y_range else ((min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return ML + (x - x0) / (x1 - x0) * (W - ML - MR)

    def py(y):
        return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB)

    out = _frame(title, xlabel, ylabel)
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{H - MB + 14}" text-anchor="middle" font-size="10">{t:.2g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{ML - 4}" y="{py(t) + 3:.1f}" text-anchor="end" font-size="10">{t:.2f}</text>')
        out.append(f'<line x1="{ML}" y1="{py(t):.1f}" x2="{W - MR}" y2="{py(t):.1f}" stroke="#ddd"/>')
    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>')
        ly = MT + 14 * k + 6
        out.append(f'<line x1="{W - MR + 10}" y1="{ly}" x2="{W - MR + 28}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 32}" y="{ly + 4}" font-size="11">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def stacked_bar_chart(groups, categories, title="", ylabel="fraction"):
    """``groups`` maps a bar label to ``{category: value}``; bars stack ``categories`` in order."""
    names = list(groups)
    totals = [sum(groups[g].get(c, 0) for c in categories) for g in names]
    top = max(totals + [1e-12])
    out = _frame(title, "", ylabel)
    n = max(len(names), 1)
    slot = (W - ML - MR) / n
    bw = slot * 0.6
    for i, g in enumerate(names):
        x = ML + slot * i + (slot - bw) / 2
        base = H - MB
        for k, c in enumerate(categories):
            v = groups[g].get(c, 0)
            h = v / top * (H - MT - MB)
            base -= h
            out.append(f'<rect x="{x:.1f}" y="{base:.1f}" width="{bw:.1f}" height="{h:.1f}" '
                       f'fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{x + bw / 2:.1f}" y="{H - MB + 14}" text-anchor="middle" font-size="10">'
                   f'{escape(str(g))}</text>')
    for k, c in enumerate(categories):
        ly = MT + 14 * k + 6
        out.append(f'<rect x="{W - MR + 10}" y="{ly - 5}" width="12" height="10" fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{W - MR + 28}" y="{ly + 4}" font-size="11">{escape(c)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text):
    with open(path, "w") as f:
        f.write(text)
