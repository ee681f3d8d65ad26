"""Self-contained SVG heatmaps of scan CSV files."""

from __future__ import annotations

import csv
import io

import numpy as np

from .scan import CSV_COLUMNS

# viridis sampled at 9 evenly spaced stops
_STOPS = np.array([
    (68, 1, 84), (71, 44, 122), (59, 81, 139), (44, 113, 142), (33, 144, 141),
    (39, 173, 129), (92, 200, 99), (170, 220, 50), (253, 231, 37),
], dtype=float)


def colormap(u):
    """Map ``u`` in [0, 1] to an ``#rrggbb`` string."""
    u = min(max(float(u), 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(u), len(_STOPS) - 2)
    rgb = _STOPS[i] + (u - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def read_scan_csv(text):
    """Parse a scan CSV into ``(xs, ys, columns)`` with ``columns[name]`` shaped ``(ny, nx)``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"not a scan CSV: expected header {','.join(CSV_COLUMNS)}")
    rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise ValueError("scan CSV has no records")
    data = np.array(rows)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if xs.size * ys.size != data.shape[0]:
        raise ValueError("scan CSV records do not form a full grid")
    ix = np.searchsorted(xs, data[:, 0])
    iy = np.searchsorted(ys, data[:, 1])
    columns = {}
    for c, name in enumerate(CSV_COLUMNS[2:], start=2):
        grid = np.full((ys.size, xs.size), np.nan)
        grid[iy, ix] = data[:, c]
        columns[name] = grid
    return xs, ys, columns


def render_svg(xs, ys, values, spectrum=(), title="", width=640, height=480, log=True):
    """Heatmap of ``values`` (``(ny, nx)``) with optional real-axis spectrum markers."""
    pad_l, pad_r, pad_t, pad_b = 60, 90, 30, 45
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    nx, ny = xs.size, ys.size
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.log10(np.abs(values)) if log else np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    x0, x1, y0, y1 = xs[0], xs[-1], ys[0], ys[-1]
    dx = (x1 - x0) / max(nx - 1, 1)
    dy = (y1 - y0) / max(ny - 1, 1)
    ext_x0, ext_x1 = x0 - dx / 2, x1 + dx / 2
    ext_y0, ext_y1 = y0 - dy / 2, y1 + dy / 2

    def px(x):
        return pad_l + (x - ext_x0) / (ext_x1 - ext_x0) * pw

    def py(y):
        return pad_t + (ext_y1 - y) / (ext_y1 - ext_y0) * ph

    cw, ch = pw / nx, ph / ny
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for iy in range(ny):
        for ix in range(nx):
            val = v[iy, ix]
            fill = "#d0d0d0" if not np.isfinite(val) else colormap((val - lo) / (hi - lo))
            out.append(
                f'<rect x="{px(xs[ix]) - cw / 2:.3f}" y="{py(ys[iy]) - ch / 2:.3f}" '
                f'width="{cw + 0.05:.3f}" height="{ch + 0.05:.3f}" fill="{fill}"/>'
            )
    out.append(f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    marker_y = py(0.0) if ext_y0 <= 0.0 <= ext_y1 else pad_t + ph
    for lam in spectrum:
        if ext_x0 <= lam <= ext_x1:
            x = px(lam)
            out.append(
                f'<path d="M{x:.2f},{marker_y - 6:.2f} L{x - 4:.2f},{marker_y + 2:.2f} '
                f'L{x + 4:.2f},{marker_y + 2:.2f} Z" fill="red" stroke="white" stroke-width="0.5"/>'
            )
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{pad_t + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{pad_l - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{pad_l + pw / 2}" y="{height - 8}" text-anchor="middle">Re z</text>')
    out.append(f'<text x="14" y="{pad_t + ph / 2}" transform="rotate(-90 14 {pad_t + ph / 2})" '
               f'text-anchor="middle">Im z</text>')
    if title:
        out.append(f'<text x="{pad_l}" y="{pad_t - 10}">{_escape(title)}</text>')
    # colour bar
    bx, steps = pad_l + pw + 20, 64
    for i in range(steps):
        y = pad_t + ph - (i + 1) * ph / steps
        out.append(f'<rect x="{bx}" y="{y:.3f}" width="16" height="{ph / steps + 0.05:.3f}" '
                   f'fill="{colormap((i + 0.5) / steps)}"/>')
    label = "log10 " if log else ""
    out.append(f'<text x="{bx + 20}" y="{pad_t + 8}">{hi:.3g}</text>')
    out.append(f'<text x="{bx + 20}" y="{pad_t + ph}">{lo:.3g}</text>')
    out.append(f'<text x="{bx}" y="{pad_t - 10}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_scan_csv(text, quantity="abs_f", spectrum=(), log=True):
    xs, ys, columns = read_scan_csv(text)
    if quantity not in columns or quantity == "skipped":
        raise ValueError(f"unknown quantity {quantity!r}; choose from {sorted(set(columns) - {'skipped'})}")
    return render_svg(xs, ys, columns[quantity], spectrum=spectrum, title=quantity, log=log)
