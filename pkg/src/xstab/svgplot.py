"""Self-contained SVG 1.1 line charts, no plotting dependencies.

Each chart draws one polyline per series with an optional shaded
quartile band, plus axes, tick labels, and a legend. Output bytes are a
pure function of the input: coordinates are formatted at fixed
precision and nothing depends on ambient state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
]

WIDTH, HEIGHT = 720, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 72, 160, 48, 56


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


@dataclass
class Series:
    """One polyline: y values over x, with an optional (q25, q75) band."""

    name: str
    x: list[float]
    y: list[float]
    band: tuple[list[float], list[float]] | None = None

    def all_y(self) -> list[float]:
        out = list(self.y)
        if self.band is not None:
            out.extend(self.band[0])
            out.extend(self.band[1])
        return out


@dataclass
class LineChart:
    title: str
    x_label: str
    y_label: str
    series: list[Series] = field(default_factory=list)

    def add(self, series: Series) -> None:
        self.series.append(series)

    def render(self) -> str:
        series = [s for s in self.series if len(s.x) > 0]
        if not series:
            raise ValueError("no non-empty series to plot")
        xs = [v for s in series for v in s.x]
        ys = [v for s in series for v in s.all_y()]
        x_min, x_max = min(xs), max(xs)
        y_min, y_max = min(ys), max(ys)
        if x_max == x_min:
            x_max = x_min + 1.0
        if y_max == y_min:
            y_max = y_min + 1.0
        pad = 0.06 * (y_max - y_min)
        y_min -= pad
        y_max += pad

        plot_l, plot_r = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        plot_t, plot_b = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

        def px(x: float) -> float:
            return plot_l + (x - x_min) / (x_max - x_min) * (plot_r - plot_l)

        def py(y: float) -> float:
            # Monotone decreasing: larger values sit higher on the canvas.
            return plot_b - (y - y_min) / (y_max - y_min) * (plot_b - plot_t)

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16" '
            f'font-family="sans-serif">{_escape(self.title)}</text>',
        ]
        # axes
        out.append(
            f'<line x1="{plot_l}" y1="{plot_b}" x2="{plot_r}" y2="{plot_b}" stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<line x1="{plot_l}" y1="{plot_t}" x2="{plot_l}" y2="{plot_b}" stroke="#333333" stroke-width="1"/>'
        )
        for i in range(5):
            fx = x_min + i * (x_max - x_min) / 4
            fy = y_min + i * (y_max - y_min) / 4
            out.append(
                f'<line x1="{px(fx):.2f}" y1="{plot_b}" x2="{px(fx):.2f}" y2="{plot_b + 4}" stroke="#333333"/>'
            )
            out.append(
                f'<text x="{px(fx):.2f}" y="{plot_b + 18}" text-anchor="middle" font-size="11" '
                f'font-family="sans-serif">{fx:.4g}</text>'
            )
            out.append(
                f'<line x1="{plot_l - 4}" y1="{py(fy):.2f}" x2="{plot_l}" y2="{py(fy):.2f}" stroke="#333333"/>'
            )
            out.append(
                f'<text x="{plot_l - 8}" y="{py(fy) + 4:.2f}" text-anchor="end" font-size="11" '
                f'font-family="sans-serif">{fy:.4g}</text>'
            )
        out.append(
            f'<text x="{(plot_l + plot_r) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{_escape(self.x_label)}</text>'
        )
        out.append(
            f'<text x="18" y="{(plot_t + plot_b) / 2:.1f}" text-anchor="middle" font-size="13" '
            f'font-family="sans-serif" transform="rotate(-90 18 {(plot_t + plot_b) / 2:.1f})">'
            f"{_escape(self.y_label)}</text>"
        )

        for idx, s in enumerate(series):
            color = PALETTE[idx % len(PALETTE)]
            if s.band is not None:
                lo, hi = s.band
                pts = [f"{px(x):.2f},{py(v):.2f}" for x, v in zip(s.x, hi)]
                pts += [f"{px(x):.2f},{py(v):.2f}" for x, v in zip(reversed(s.x), reversed(lo))]
                out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.15"/>')
            pts = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(s.x, s.y))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
            ly = plot_t + 16 * idx
            out.append(
                f'<line x1="{plot_r + 10}" y1="{ly + 4}" x2="{plot_r + 30}" y2="{ly + 4}" '
                f'stroke="{color}" stroke-width="1.8"/>'
            )
            out.append(
                f'<text x="{plot_r + 34}" y="{ly + 8}" font-size="11" font-family="sans-serif">'
                f"{_escape(s.name)}</text>"
            )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
