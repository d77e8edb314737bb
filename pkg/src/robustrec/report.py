"""Writing reports (JSON + CSV) and percent-change bar charts (SVG).

JSON schema (``schema_version`` 1)::

    {
      "schema_version": 1,
      "seed": int,
      "config": {...echo of the run config...},
      "dataset_stats": {"n_users", "n_items", "n_interactions", "split_sizes",
                        "split_seed", "train_marginals", "train_activity_quantiles"},
      "perturbation": null | {"dimension": str, ...sizes/counts...},
      "entries": [{"model", "metric",
                   "baseline": null | {"name", "value", "k", "n"},
                   "perturbed": null | {...},
                   "percent_change": null | float,
                   "reason": null | str}],
      "wall_clock_seconds": float
    }

Keys are sorted and floats written with ``repr`` precision, so re-emitting a
report produces byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from xml.sax.saxutils import escape

from .harness import EvalReport

CSV_COLUMNS = ("model", "metric", "baseline", "perturbed", "pct_change", "baseline_n", "perturbed_n", "reason")
DEFAULT_FORMATS = ("json", "csv")


def _num(v):
    return "" if v is None else repr(float(v))


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_rows(report: EvalReport) -> list[list[str]]:
    rows = []
    for e in report.entries:
        rows.append([
            e.model, e.metric,
            _num(e.baseline.value if e.baseline else None),
            _num(e.perturbed.value if e.perturbed else None),
            _num(e.percent_change),
            "" if e.baseline is None else str(e.baseline.n),
            "" if e.perturbed is None else str(e.perturbed.n),
            e.reason or "",
        ])
    return rows


def report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(report_rows(report))
    return buf.getvalue()


def emit_report(report: EvalReport, directory, formats=DEFAULT_FORMATS) -> dict[str, Path]:
    """Write ``report.json``/``report.csv`` (and ``chart.svg`` if asked) into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = {}
    for fmt in formats:
        if fmt == "json":
            path = d / "report.json"
            path.write_text(report_json(report))
        elif fmt == "csv":
            path = d / "report.csv"
            path.write_text(report_csv(report))
        elif fmt == "svg":
            path = emit_chart(report, d / "chart.svg")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written[fmt] = path
    return written


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------- chart

BAR_WIDTH = 36
BAR_GAP = 18
PLOT_HEIGHT = 260
MARGIN = {"left": 70, "right": 30, "top": 50, "bottom": 120}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def chart_svg(report: EvalReport, title: str | None = None) -> str:
    entries = report.changes
    if not entries:
        raise ValueError("report has no percent-change entries to chart")
    values = [e.percent_change for e in entries]
    span = max(1.0, max(abs(v) for v in values))
    lo = min(0.0, min(values))
    hi = max(0.0, max(values))
    if hi - lo == 0:
        hi = span
    scale = PLOT_HEIGHT / (hi - lo)
    zero_y = MARGIN["top"] + hi * scale
    width = MARGIN["left"] + MARGIN["right"] + len(entries) * (BAR_WIDTH + BAR_GAP) + BAR_GAP
    height = MARGIN["top"] + PLOT_HEIGHT + MARGIN["bottom"]
    dim = (report.perturbation or {}).get("dimension", "perturbation")
    title = title or f"Percent change under {dim}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<title>{escape(title)}</title>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" '
        f'y2="{MARGIN["top"] + PLOT_HEIGHT}" stroke="#444"/>',
        f'<text x="18" y="{MARGIN["top"] + PLOT_HEIGHT / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + PLOT_HEIGHT / 2:.1f})">% change</text>',
    ]
    for tick in (lo, 0.0, hi):
        y = zero_y - tick * scale
        out.append(f'<text class="tick" x="{MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(tick)}</text>')
    for n, e in enumerate(entries):
        x = MARGIN["left"] + BAR_GAP + n * (BAR_WIDTH + BAR_GAP)
        v = e.percent_change
        top = zero_y - max(v, 0.0) * scale
        h = abs(v) * scale
        fill = "#c0392b" if v < 0 else "#2c7fb8"
        out.append(
            f'<rect class="bar" data-model="{escape(e.model)}" data-metric="{escape(e.metric)}" '
            f'data-value="{v!r}" x="{x}" y="{top:.3f}" width="{BAR_WIDTH}" height="{h:.3f}" fill="{fill}"/>'
        )
        vy = top - 4 if v >= 0 else top + h + 12
        out.append(f'<text class="value" x="{x + BAR_WIDTH / 2}" y="{vy:.1f}" text-anchor="middle">{_fmt(v)}</text>')
        ly = MARGIN["top"] + PLOT_HEIGHT + 14
        label = escape(f"{e.model} {e.metric}")
        out.append(
            f'<text class="label" x="{x + BAR_WIDTH / 2}" y="{ly}" text-anchor="end" '
            f'transform="rotate(-45 {x + BAR_WIDTH / 2} {ly})">{label}</text>'
        )
    out.append(
        f'<line class="zero-line" x1="{MARGIN["left"]}" y1="{zero_y:.3f}" x2="{width - MARGIN["right"]}" '
        f'y2="{zero_y:.3f}" stroke="#000"/>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_chart(report: EvalReport, path) -> Path:
    """Bar chart of signed percent change, one bar per model x metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(chart_svg(report))
    return path
