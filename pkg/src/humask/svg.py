"""Minimal static SVG bar charts for histogram and sweep reports."""
from __future__ import annotations

from xml.sax.saxutils import escape


def bar_chart(labels, values, title: str = "", width: int = 640, height: int = 320) -> str:
    values = [float(v) for v in values]
    finite = [v for v in values if v == v]
    top = max(finite) if finite and max(finite) > 0 else 1.0
    margin = 40
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    bar_w = plot_w / max(len(values), 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
    ]
    for i, (label, v) in enumerate(zip(labels, values)):
        h = 0.0 if v != v else plot_h * v / top
        x = margin + i * bar_w
        y = height - margin - h
        parts.append(f'<rect x="{x + 1:.2f}" y="{y:.2f}" width="{max(bar_w - 2, 0.5):.2f}" '
                     f'height="{h:.2f}" fill="steelblue"><title>{escape(str(label))}: {v:g}</title></rect>')
        if len(values) <= 24:
            parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{height - margin + 14}" text-anchor="middle" '
                         f'font-size="9">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
