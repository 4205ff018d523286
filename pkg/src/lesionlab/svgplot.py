"""Minimal grouped-bar SVG writer.

Hand-rolled so output is byte-stable: fixed element order, fixed float
formatting, no timestamps or generated ids.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948")


def _n(v: float) -> str:
    return f"{v:.2f}"


def grouped_bars(title: str, groups, series, values, x0: float = 0, y0: float = 0,
                 width: float = 520, height: float = 260, ymax: float | None = None) -> str:
    """One panel; ``values[g][s]`` is the bar height for group ``g``, series ``s``."""
    left, bottom, top = 45.0, 40.0, 30.0
    plot_w = width - left - 10.0
    plot_h = height - bottom - top
    if ymax is None:
        ymax = max([1e-12] + [v for row in values for v in row])
    parts = [f'<g transform="translate({_n(x0)},{_n(y0)})">',
             f'<text x="{_n(width / 2)}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>']
    base = top + plot_h
    parts.append(f'<line x1="{_n(left)}" y1="{_n(base)}" x2="{_n(left + plot_w)}" y2="{_n(base)}" stroke="#000"/>')
    parts.append(f'<line x1="{_n(left)}" y1="{_n(top)}" x2="{_n(left)}" y2="{_n(base)}" stroke="#000"/>')
    for tick in range(5):
        v = ymax * tick / 4
        y = base - plot_h * tick / 4
        parts.append(f'<text x="{_n(left - 4)}" y="{_n(y + 4)}" text-anchor="end" font-size="10">{v:.2f}</text>')
    group_w = plot_w / max(1, len(groups))
    bar_w = group_w * 0.8 / max(1, len(series))
    for gi, g in enumerate(groups):
        gx = left + gi * group_w + group_w * 0.1
        for si, _ in enumerate(series):
            v = values[gi][si]
            h = plot_h * min(max(v, 0.0), ymax) / ymax
            parts.append(
                f'<rect x="{_n(gx + si * bar_w)}" y="{_n(base - h)}" width="{_n(bar_w * 0.95)}" '
                f'height="{_n(h)}" fill="{PALETTE[si % len(PALETTE)]}"><title>{escape(str(g))} '
                f'{escape(str(series[si]))}: {v:.4f}</title></rect>')
        parts.append(f'<text x="{_n(gx + group_w * 0.4)}" y="{_n(base + 14)}" text-anchor="middle" '
                     f'font-size="10">{escape(str(g))}</text>')
    for si, s in enumerate(series):
        lx = left + si * 110
        parts.append(f'<rect x="{_n(lx)}" y="{_n(height - 14)}" width="10" height="10" '
                     f'fill="{PALETTE[si % len(PALETTE)]}"/>')
        parts.append(f'<text x="{_n(lx + 14)}" y="{_n(height - 5)}" font-size="10">{escape(str(s))}</text>')
    parts.append("</g>")
    return "\n".join(parts)


def document(panels, width: float, height: float) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(width)}" height="{_n(height)}" '
            f'viewBox="0 0 {_n(width)} {_n(height)}" font-family="sans-serif">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>', *panels, "</svg>"]) + "\n"


_LABELS = {"svm": "SVM", "knn": "k-NN", "fused": "SVM+k-NN"}


def report_svg(report_json: dict) -> str:
    """Average macro F per fraction, then min/avg/max accuracy panels."""
    fractions = sorted(report_json["macro_f_by_fraction"], key=int)
    names = ("svm", "knn", "fused")
    series = [_LABELS[n] for n in names]
    agg = report_json["aggregates"]
    panels = [grouped_bars("Average macro F-measure by training percentage", [f"{f}%" for f in fractions],
                           series, [[report_json["macro_f_by_fraction"][f][n] for n in names] for f in fractions],
                           0, 0, ymax=1.0)]
    for i, stat in enumerate(("min", "avg", "max"), start=1):
        vals = [[agg[f][n]["all"]["accuracy"][stat] for n in names] for f in fractions]
        panels.append(grouped_bars(f"Accuracy ({stat}) by training percentage", [f"{f}%" for f in fractions],
                                   series, vals, 0, 260 * i, ymax=1.0))
    return document(panels, 520, 260 * 4)


def segmentation_svg(class_means: dict) -> str:
    """Per-class mean segmentation measures (``class_means[class][measure]``)."""
    classes = list(class_means)
    measures = ("MOL", "MUS", "MOS", "DSM", "ER")
    vals = [[class_means[c][m] for m in measures] for c in classes]
    ymax = max(1.0, max((v for row in vals for v in row), default=1.0))
    return document([grouped_bars("Segmentation measures by class", classes, measures, vals,
                                  0, 0, width=640, height=300, ymax=ymax)], 640, 300)
