"""Minimal SVG line plot of median accuracy per estimator."""
from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT, PAD, LEGEND = 760, 400, 60, 120


def write_svg(report, path, xlabel: str = "", ylabel: str = "median accuracy") -> None:
    agg = report.aggregates()
    series: dict = {}
    for (x, name), (med, _, _) in agg.items():
        series.setdefault(name, []).append((x, med))
    xs = sorted({x for x, _ in agg}) or [0.0]
    x0, x1 = xs[0], xs[-1] if xs[-1] > xs[0] else xs[0] + 1.0

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (WIDTH - 2 * PAD - LEGEND)

    def sy(y):
        return HEIGHT - PAD - y * (HEIGHT - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<line x1="{PAD}" y1="{sy(0)}" x2="{WIDTH - PAD - LEGEND}" y2="{sy(0)}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{sy(0)}" x2="{PAD}" y2="{sy(1)}" stroke="black"/>']
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{PAD - 8}" y="{sy(tick) + 4}" font-size="11" text-anchor="end">{tick:g}</text>')
    for x in xs:
        out.append(f'<text x="{sx(x):.1f}" y="{sy(0) + 16}" font-size="11" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>')
    for k, (name, pts) in enumerate(sorted(series.items())):
        color = PALETTE[k % len(PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        out.append(f'<text x="{WIDTH - PAD - LEGEND + 12}" y="{PAD + 14 * k}" font-size="11" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
