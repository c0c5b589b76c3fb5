"""A small deterministic SVG line-plot writer (axes, ticks and polylines only)."""
from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

_COLOURS = ("#1f4e99", "#c0392b", "#2e7d32", "#6a1b9a")


@dataclass
class Panel:
    title: str
    series: list = field(default_factory=list)  # (label, xs, ys)
    xlabel: str = "x"
    ylabel: str = "y"

    def add(self, label, xs, ys):
        self.series.append((label, list(map(float, xs)), list(map(float, ys))))
        return self


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") or "0"


def _bounds(values):
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def render(panels, width: int = 420, height: int = 320) -> str:
    """Render panels side by side and return the SVG document as text."""
    margin = 48
    total_w = width * len(panels)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{height}" '
        f'viewBox="0 0 {total_w} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{total_w}" height="{height}" fill="white"/>',
    ]
    for idx, panel in enumerate(panels):
        ox = idx * width
        xs = [v for _, sx, _ in panel.series for v in sx]
        ys = [v for _, _, sy in panel.series for v in sy]
        x0, x1 = _bounds(xs)
        y0, y1 = _bounds(ys)
        pw, ph = width - 2 * margin, height - 2 * margin

        def px(v):
            return ox + margin + (v - x0) / (x1 - x0) * pw

        def py(v):
            return height - margin - (v - y0) / (y1 - y0) * ph

        out.append(f'<rect x="{ox + margin}" y="{margin}" width="{pw}" height="{ph}" '
                   'fill="none" stroke="black" stroke-width="1"/>')
        for i in range(5):
            tx = x0 + (x1 - x0) * i / 4
            ty = y0 + (y1 - y0) * i / 4
            out.append(f'<text x="{px(tx):.2f}" y="{height - margin + 14}" text-anchor="middle">{_fmt(tx)}</text>')
            out.append(f'<text x="{ox + margin - 4}" y="{py(ty) + 4:.2f}" text-anchor="end">{_fmt(ty)}</text>')
        out.append(f'<text x="{ox + width / 2:.2f}" y="{margin - 12}" text-anchor="middle">{escape(panel.title)}</text>')
        out.append(f'<text x="{ox + width / 2:.2f}" y="{height - 8}" text-anchor="middle">{escape(panel.xlabel)}</text>')
        for k, (label, sx, sy) in enumerate(panel.series):
            colour = _COLOURS[k % len(_COLOURS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx, sy))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.2"/>')
            out.append(f'<text x="{ox + margin + 6}" y="{margin + 14 + 13 * k}" fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
