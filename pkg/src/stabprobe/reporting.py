"""CSV writers and a small native SVG emitter for experiment results.

Plots are derived from the same in-memory arrays as the CSVs and never feed
back into them. Output bytes depend only on the data.
"""

import csv
import math

import numpy as np

__all__ = [
    "fmt",
    "write_sweep_csv",
    "write_tradeoff_csv",
    "write_frontier_csv",
    "write_band_csv",
    "write_records_csv",
    "write_report",
    "svg_sweep",
    "svg_heatmap",
]


def fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def _param(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_sweep_csv(path, result):
    (values,) = result.axes.values()
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["param", "probe_mean", "probe_std", "api_mean", "api_std", "trials", "T"])
        for i, v in enumerate(values):
            am = None if result.api_mean is None else result.api_mean[i]
            sd = None if result.api_std is None else result.api_std[i]
            w.writerow([_param(v), fmt(result.probe_mean[i]), fmt(result.probe_std[i]),
                        fmt(am), fmt(sd), result.trials, result.T])


def write_tradeoff_csv(path, result):
    (pname, ps), (cname, cs) = result.axes.items()
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow([pname, cname, "probe_mean", "probe_std"])
        for i, p in enumerate(ps):
            for j, c in enumerate(cs):
                w.writerow([_param(p), _param(c), fmt(result.probe_mean[i, j]),
                            fmt(result.probe_std[i, j])])


def write_frontier_csv(path, result):
    ps = result.axes["p"]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["p", "frontier"])
        for p, f in zip(ps, result.frontier):
            w.writerow([_param(p), "" if f is None else _param(f)])


def write_band_csv(path, result):
    (_, ps), (cname, cs) = result.axes.items()
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["p", cname, "in_band"])
        for i, p in enumerate(ps):
            for j, c in enumerate(cs):
                w.writerow([_param(p), _param(c), int(bool(result.band[i, j]))])


def write_records_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["param", "trial", "probe", "api", "ms"])
        for r in result.records:
            w.writerow([";".join(_param(c) for c in r.coords), r.trial, fmt(r.probe),
                        fmt(r.api), format(r.ms, ".3f")])


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write(report.to_text())


# --- SVG ---------------------------------------------------------------------

_VIRIDIS = [
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
]


def _color(t):
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_VIRIDIS, _VIRIDIS[1:]):
        if t <= t1:
            u = (t - t0) / (t1 - t0)
            return "#%02x%02x%02x" % tuple(int(round(a + u * (b - a))) for a, b in zip(c0, c1))
    return "#%02x%02x%02x" % _VIRIDIS[-1][1]


def _num(x):
    return format(x, ".2f")


def _label(v):
    return format(float(v), "g")


def _header(width, height):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + k * (hi - lo) / (count - 1) for k in range(count)], lo, hi


def svg_sweep(result, title=""):
    """Line plot of the probe mean with +-std bars; API on a secondary axis."""
    (xname, xs), = result.axes.items()
    W, H, left, right, top, bottom = 640, 400, 70, 70, 40, 50
    pw, ph = W - left - right, H - top - bottom
    m = np.asarray(result.probe_mean, dtype=float)
    s = np.asarray(result.probe_std, dtype=float)
    ticks, lo, hi = _ticks(0.0, float(np.max(m + s)) * 1.1 or 1.0)
    nx = len(xs)

    def px(i):
        return left + (pw * (i + 0.5) / nx)

    def py(v, lo=lo, hi=hi):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = _header(W, H)
    out.append(f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in ticks:
        out.append(f'<text x="{left - 6}" y="{_num(py(t) + 4)}" text-anchor="end">{t:.3g}</text>')
        out.append(f'<line x1="{left}" y1="{_num(py(t))}" x2="{left + pw}" y2="{_num(py(t))}" stroke="#ddd"/>')
    for i, x in enumerate(xs):
        out.append(f'<text x="{_num(px(i))}" y="{top + ph + 18}" text-anchor="middle">{_label(x)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 8}" text-anchor="middle">{xname}</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" transform="rotate(-90 16 {top + ph / 2})" '
               f'text-anchor="middle">probe mean</text>')
    pts = " ".join(f"{_num(px(i))},{_num(py(v))}" for i, v in enumerate(m))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    for i, (v, e) in enumerate(zip(m, s)):
        x = _num(px(i))
        out.append(f'<line x1="{x}" y1="{_num(py(v - e))}" x2="{x}" y2="{_num(py(v + e))}" stroke="#1f77b4"/>')
        out.append(f'<circle cx="{x}" cy="{_num(py(v))}" r="3" fill="#1f77b4"/>')
    if result.api_mean is not None:
        am = np.asarray(result.api_mean, dtype=float)
        sd = np.asarray(result.api_std, dtype=float)
        aticks, alo, ahi = _ticks(0.0, float(np.nanmax(am + sd)) * 1.1 or 1.0)
        for t in aticks:
            out.append(f'<text x="{left + pw + 6}" y="{_num(py(t, alo, ahi) + 4)}" fill="#d62728">{t:.3g}</text>')
        out.append(f'<text x="{W - 14}" y="{top + ph / 2}" transform="rotate(90 {W - 14} {top + ph / 2})" '
                   f'text-anchor="middle" fill="#d62728">API</text>')
        pts = " ".join(f"{_num(px(i))},{_num(py(v, alo, ahi))}" for i, v in enumerate(am))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-dasharray="6,3"/>')
        for i, (v, e) in enumerate(zip(am, sd)):
            x = _num(px(i))
            out.append(f'<line x1="{x}" y1="{_num(py(v - e, alo, ahi))}" x2="{x}" '
                       f'y2="{_num(py(v + e, alo, ahi))}" stroke="#d62728"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_heatmap(result, title=""):
    """Heatmap of log10 mean probe, ``p`` across and ``L``/``K`` up.

    Frontier values are drawn as black markers joined by a line, the
    iso-probe band (if any) as a hatched overlay, and ``p = 2`` as a dotted
    vertical line when it lies on the grid.
    """
    (_, ps), (cname, cs) = result.axes.items()
    W, H, left, right, top, bottom = 640, 420, 60, 110, 40, 50
    pw, ph = W - left - right, H - top - bottom
    npx, ncy = len(ps), len(cs)
    cw, ch = pw / npx, ph / ncy
    means = np.asarray(result.probe_mean, dtype=float)
    floor = 1e-12
    logs = np.log10(np.maximum(means, floor))
    lo, hi = float(np.min(logs)), float(np.max(logs))
    span = hi - lo if hi > lo else 1.0

    def cx(i):
        return left + cw * (i + 0.5)

    def cy(j):
        return top + ph - ch * (j + 0.5)

    out = _header(W, H)
    out.append('<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" '
               'patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="white" '
               'stroke-width="1.5"/></pattern></defs>')
    out.append(f'<text x="{(left + left + pw) / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    for i in range(npx):
        for j in range(ncy):
            x, y = left + cw * i, top + ph - ch * (j + 1)
            col = _color((logs[i, j] - lo) / span)
            out.append(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cw)}" height="{_num(ch)}" fill="{col}"/>')
            if result.band is not None and result.band[i, j]:
                out.append(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cw)}" height="{_num(ch)}" '
                           f'fill="url(#hatch)"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for i, p in enumerate(ps):
        out.append(f'<text x="{_num(cx(i))}" y="{top + ph + 18}" text-anchor="middle">{_label(p)}</text>')
        if float(p) == 2.0:
            out.append(f'<line x1="{_num(cx(i))}" y1="{top}" x2="{_num(cx(i))}" y2="{top + ph}" '
                       f'stroke="white" stroke-dasharray="2,3"/>')
    for j, c in enumerate(cs):
        out.append(f'<text x="{left - 8}" y="{_num(cy(j) + 4)}" text-anchor="end">{_label(c)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 8}" text-anchor="middle">p</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" transform="rotate(-90 16 {top + ph / 2})" '
               f'text-anchor="middle">{cname}</text>')
    if result.frontier is not None:
        pts = []
        for i, f in enumerate(result.frontier):
            if f is None:
                continue
            j = list(cs).index(f)
            pts.append((cx(i), cy(j)))
        if len(pts) > 1:
            line = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
            out.append(f'<polyline points="{line}" fill="none" stroke="black" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="5" fill="black"/>')
    # colour bar
    bx, steps = left + pw + 20, 20
    for k in range(steps):
        y = top + ph * (1 - (k + 1) / steps)
        out.append(f'<rect x="{bx}" y="{_num(y)}" width="16" height="{_num(ph / steps + 0.5)}" '
                   f'fill="{_color((k + 0.5) / steps)}"/>')
    out.append(f'<text x="{bx + 20}" y="{top + 10}">{hi:.2f}</text>')
    out.append(f'<text x="{bx + 20}" y="{top + ph}">{lo:.2f}</text>')
    out.append(f'<text x="{bx}" y="{top - 8}">log10 probe</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
