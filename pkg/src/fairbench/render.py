"""Static SVG rendering of gap-matrix heatmaps and stacked variance bars.

Pure string assembly, no raster dependencies, deterministic output.
"""

from __future__ import annotations

CELL = 72
MARGIN_LEFT = 130
MARGIN_TOP = 56
LEGEND_H = 26

_PALETTE = ("#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2")


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _cell_color(value: float, vmax: float) -> str:
    """White at zero, saturating red for positive and blue for negative."""
    if vmax <= 0:
        return "#ffffff"
    intensity = min(1.0, abs(value) / vmax)
    fade = round(255 * (1.0 - intensity))
    if value >= 0:
        return f"#ff{fade:02x}{fade:02x}"
    return f"#{fade:02x}{fade:02x}ff"


def render_gap_svg(gap: dict, title: str) -> str:
    """Heatmap of an antisymmetric gap matrix dict (levels + values)."""
    levels = gap["levels"]
    values = gap["values"]
    n = len(levels)
    vmax = max((abs(v) for row in values for v in row), default=0.0)
    width = MARGIN_LEFT + n * CELL + 20
    height = MARGIN_TOP + n * CELL + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{MARGIN_LEFT}" y="20" font-size="15" font-family="sans-serif">'
        f"{title} ({gap['metric']})</text>",
    ]
    for j, level in enumerate(levels):
        x = MARGIN_LEFT + j * CELL + CELL // 2
        parts.append(
            f'<text x="{x}" y="{MARGIN_TOP - 8}" font-size="11" text-anchor="middle" '
            f'font-family="sans-serif">{level}</text>'
        )
    for i, level in enumerate(levels):
        y = MARGIN_TOP + i * CELL + CELL // 2
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4}" font-size="11" text-anchor="end" '
            f'font-family="sans-serif">{level}</text>'
        )
        for j in range(n):
            value = values[i][j]
            x = MARGIN_LEFT + j * CELL
            yy = MARGIN_TOP + i * CELL
            parts.append(
                f'<rect class="cell" x="{x}" y="{yy}" width="{CELL}" height="{CELL}" '
                f'fill="{_cell_color(value, vmax)}" stroke="#333"/>'
            )
            parts.append(
                f'<text x="{x + CELL // 2}" y="{yy + CELL // 2 + 4}" font-size="11" '
                f'text-anchor="middle" font-family="sans-serif">{_fmt(value)}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def render_anova_svg(anova: dict) -> str:
    """Stacked per-term variance-share bars, one bar per regression side.

    Bar height is R^2; each segment is one term's share, so segments
    stack exactly to the bar total.
    """
    sides = sorted(anova)
    terms: list[str] = []
    for side in sides:
        for row in anova[side]["anova"]:
            if row["term"] not in terms:
                terms.append(row["term"])
    color = {term: _PALETTE[i % len(_PALETTE)] for i, term in enumerate(terms)}

    bar_w, gap_w, plot_h = 90, 60, 260
    r2_max = max((anova[side]["r_squared"] for side in sides), default=1.0)
    scale = plot_h / max(r2_max, 1e-12)
    width = 80 + len(sides) * (bar_w + gap_w) + 160
    height = MARGIN_TOP + plot_h + 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<text x="40" y="24" font-size="15" font-family="sans-serif">'
        "Variance shares by term (bar height = R&#178;)</text>",
    ]
    for b, side in enumerate(sides):
        x = 80 + b * (bar_w + gap_w)
        y = MARGIN_TOP + plot_h
        for row in anova[side]["anova"]:
            h = row["eta_sq"] * scale
            y -= h
            parts.append(
                f'<rect class="segment" x="{x}" y="{_fmt(y)}" width="{bar_w}" '
                f'height="{_fmt(h)}" fill="{color[row["term"]]}" stroke="#333"/>'
            )
        parts.append(
            f'<text x="{x + bar_w // 2}" y="{MARGIN_TOP + plot_h + 18}" font-size="12" '
            f'text-anchor="middle" font-family="sans-serif">{side}</text>'
        )
        parts.append(
            f'<text x="{x + bar_w // 2}" y="{_fmt(y - 6)}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">'
            f'R&#178;={_fmt(anova[side]["r_squared"])}</text>'
        )
    legend_x = 80 + len(sides) * (bar_w + gap_w) + 10
    for i, term in enumerate(terms):
        y = MARGIN_TOP + i * LEGEND_H
        parts.append(
            f'<rect x="{legend_x}" y="{y}" width="16" height="16" '
            f'fill="{color[term]}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{legend_x + 24}" y="{y + 13}" font-size="12" '
            f'font-family="sans-serif">{term}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
