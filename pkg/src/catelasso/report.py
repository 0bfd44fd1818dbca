"""Report emission for benchmark runs: CSV, JSON, and box-plot SVG.

Output bytes are fully determined by the run result: floats are written
with shortest round-trip precision and the SVG is assembled from scratch
(no plotting library), so identical runs produce identical files. Wall
times are measured and kept in memory, but written as zero unless timings
are explicitly requested, to keep emitted files reproducible byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bench import RunResult
from .errors import ConfigError

CSV_HEADER = "replication,method,rmse,lambda,converged,wall_ms"


def _fmt(value: float) -> str:
    if np.isnan(value):
        return "nan"
    return repr(float(value))


def render_csv(result: RunResult, include_timings: bool = False) -> str:
    lines = [CSV_HEADER]
    for rec in result.records:
        wall = _fmt(rec.wall_ms) if include_timings else "0"
        lines.append(
            f"{rec.replication},{rec.method},{_fmt(rec.rmse)},{_fmt(rec.lambda_used)},"
            f"{'true' if rec.converged else 'false'},{wall}"
        )
    return "\n".join(lines) + "\n"


def render_json(result: RunResult, include_timings: bool = False) -> str:
    records = []
    for rec in result.records:
        records.append({
            "replication": rec.replication,
            "method": rec.method,
            "rmse": None if np.isnan(rec.rmse) else rec.rmse,
            "lambda": rec.lambda_used,
            "converged": rec.converged,
            "wall_ms": rec.wall_ms if include_timings else 0,
            "error": rec.error,
        })
    payload = {"records": records, "aggregates": result.aggregates}
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _method_order(result: RunResult) -> list[str]:
    seen = []
    for rec in result.records:
        if rec.method not in seen:
            seen.append(rec.method)
    return seen


def box_stats(values) -> dict:
    """Median, quartiles (type-7), Tukey whiskers, and outliers."""
    arr = np.sort(np.asarray([v for v in values if not np.isnan(v)], dtype=np.float64))
    if arr.size == 0:
        raise ValueError("no finite values to summarize")
    q1, med, q3 = (float(np.quantile(arr, q)) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    in_lo = arr[arr >= q1 - 1.5 * iqr]
    in_hi = arr[arr <= q3 + 1.5 * iqr]
    lo = float(in_lo[0]) if in_lo.size else q1
    hi = float(in_hi[-1]) if in_hi.size else q3
    outliers = arr[(arr < lo) | (arr > hi)]
    return {"q1": q1, "median": med, "q3": q3, "lo": lo, "hi": hi,
            "outliers": [float(v) for v in outliers]}


def render_svg_boxplot(result: RunResult, title: str = "") -> str:
    """One box (median, quartiles, 1.5 IQR whiskers) per method."""
    methods = _method_order(result)
    if not methods:
        raise ValueError("empty result")
    per_method = {m: [] for m in methods}
    for rec in result.records:
        per_method[rec.method].append(rec.rmse)
    stats = {m: box_stats(per_method[m]) for m in methods}

    width_per = 110
    margin_l, margin_r, margin_t, margin_b = 70, 20, 40, 50
    plot_h = 300
    width = margin_l + margin_r + width_per * len(methods)
    height = margin_t + plot_h + margin_b
    lo = min(min(s["lo"], *(s["outliers"] or [s["lo"]])) for s in stats.values())
    hi = max(max(s["hi"], *(s["outliers"] or [s["hi"]])) for s in stats.values())
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.06 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def y(v):
        return margin_t + plot_h * (hi - v) / (hi - lo)

    def fnum(v):
        return f"{v:.6g}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:12px}</style>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{title}</text>')
    # y axis with five ticks
    parts.append(
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>'
    )
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        yy = y(v)
        parts.append(f'<line x1="{margin_l - 4}" y1="{yy:.2f}" x2="{margin_l}" y2="{yy:.2f}" stroke="black"/>')
        parts.append(f'<text x="{margin_l - 8}" y="{yy + 4:.2f}" text-anchor="end">{fnum(v)}</text>')
    parts.append(
        f'<text x="14" y="{margin_t + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {margin_t + plot_h / 2:.1f})">RMSE</text>'
    )
    box_w = 46
    for i, method in enumerate(methods):
        s = stats[method]
        cx = margin_l + width_per * (i + 0.5)
        x0 = cx - box_w / 2
        parts.extend([
            f'<line x1="{cx:.2f}" y1="{y(s["lo"]):.2f}" x2="{cx:.2f}" y2="{y(s["q1"]):.2f}" stroke="black"/>',
            f'<line x1="{cx:.2f}" y1="{y(s["q3"]):.2f}" x2="{cx:.2f}" y2="{y(s["hi"]):.2f}" stroke="black"/>',
            f'<line x1="{cx - 14:.2f}" y1="{y(s["lo"]):.2f}" x2="{cx + 14:.2f}" y2="{y(s["lo"]):.2f}" stroke="black"/>',
            f'<line x1="{cx - 14:.2f}" y1="{y(s["hi"]):.2f}" x2="{cx + 14:.2f}" y2="{y(s["hi"]):.2f}" stroke="black"/>',
            f'<rect x="{x0:.2f}" y="{y(s["q3"]):.2f}" width="{box_w}" '
            f'height="{max(y(s["q1"]) - y(s["q3"]), 0.5):.2f}" fill="#9ecae1" stroke="black"/>',
            f'<line x1="{x0:.2f}" y1="{y(s["median"]):.2f}" x2="{x0 + box_w:.2f}" '
            f'y2="{y(s["median"]):.2f}" stroke="black" stroke-width="2"/>',
            f'<text x="{cx:.2f}" y="{margin_t + plot_h + 18}" text-anchor="middle">{method}</text>',
        ])
        for v in s["outliers"]:
            parts.append(f'<circle cx="{cx:.2f}" cy="{y(v):.2f}" r="2.5" fill="none" stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(result: RunResult, formats, out_dir, stem: str,
                include_timings: bool = False, title: str = "") -> list[Path]:
    """Write the requested formats and return the created paths."""
    if not result.records:
        raise ValueError("empty result")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            path.write_text(render_csv(result, include_timings))
        elif fmt == "json":
            path = out_dir / f"{stem}.json"
            path.write_text(render_json(result, include_timings))
        elif fmt in ("svg", "svg_boxplot"):
            path = out_dir / f"{stem}.svg"
            path.write_text(render_svg_boxplot(result, title=title or stem))
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
        written.append(path)
    return written
