"""Static SVG line charts, written without any plotting dependency.

Charts are plain text assembled from the data, so a rerun on identical
inputs yields byte-identical files.  One ``<polyline>`` per series.
"""

import math

from .io import atomic_write_text

__all__ = ["line_chart"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 34, 46


def _ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi] on a 1-2-5 raster."""
    if not (hi > lo):
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            step = m * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        out.append(first + k * step)
        k += 1
    return out, step


def _fmt_tick(v, step):
    digits = max(0, -math.floor(math.log10(step)) + (0 if step >= 1 else 1))
    txt = f"{v:.{digits}f}"
    return "0" if txt in ("-0", "-0.0", "-0.00") else txt


def line_chart(
    series,
    path=None,
    title="",
    x_label="",
    y_label="",
    width=640,
    height=400,
):
    """Render ``series`` (label, x, y) triples as an SVG string.

    When ``path`` is given the chart is also written there atomically.
    """
    xs = [float(v) for _, x, _ in series for v in x]
    ys = [float(v) for _, _, y in series for v in y]
    if not xs:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def px(v):
        return _MARGIN_L + plot_w * (v - x_lo) / (x_hi - x_lo or 1.0)

    def py(v):
        return _MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    x_ticks, x_step = _ticks(x_lo, x_hi)
    y_ticks, y_step = _ticks(y_lo, y_hi)
    for v in x_ticks:
        x = px(v)
        parts.append(
            f'<line x1="{x:.1f}" y1="{_MARGIN_T + plot_h}" x2="{x:.1f}" '
            f'y2="{_MARGIN_T + plot_h + 4}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{_MARGIN_T + plot_h + 17}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt_tick(v, x_step)}</text>'
        )
    for v in y_ticks:
        y = py(v)
        parts.append(
            f'<line x1="{_MARGIN_L - 4}" y1="{y:.1f}" x2="{_MARGIN_L}" '
            f'y2="{y:.1f}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 7}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt_tick(v, y_step)}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{height - 10}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="12">'
            f"{x_label}</text>"
        )
    if y_label:
        y_mid = _MARGIN_T + plot_h / 2
        parts.append(
            f'<text x="16" y="{y_mid:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {y_mid:.1f})">{y_label}</text>'
        )
    for k, (label, x_arr, y_arr) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(
            f"{px(float(a)):.2f},{py(float(b)):.2f}" for a, b in zip(x_arr, y_arr)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{pts}"/>'
        )
        if label:
            yk = _MARGIN_T + 16 + 16 * k
            parts.append(
                f'<line x1="{_MARGIN_L + plot_w - 110}" y1="{yk - 4}" '
                f'x2="{_MARGIN_L + plot_w - 86}" y2="{yk - 4}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            parts.append(
                f'<text x="{_MARGIN_L + plot_w - 80}" y="{yk}" '
                f'font-family="sans-serif" font-size="11">{label}</text>'
            )
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        atomic_write_text(path, text)
    return text
