"""Result serialization: report JSON, flat CSV tables, SVG line plots, and
a markdown summary.

Everything here is a pure function of its inputs and emits bytes that are
identical across runs and machines: no timestamps, no environment probes,
fixed float formatting. SVG output is plain text so plots can be diffed and
checked in tests.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

from .errors import ManifestError
from .metrics import (
    ALL_CONDITIONS,
    CHANGE_CONDITIONS,
    DetectionCurve,
    DynamicsRow,
    EvalReport,
    RacRecord,
)

_SERIES_COLORS = {
    "CONCAVE": "#c0392b",
    "NOFILL": "#d68910",
    "CONVEX": "#1e8449",
    "NOCHANGE": "#7f8c8d",
}

_VIEW_W, _VIEW_H = 640, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60, 130, 30, 50


def _ordered(conditions) -> list[str]:
    return [c for c in ALL_CONDITIONS if c in conditions]


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def report_json_str(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def load_report(path: str | Path) -> EvalReport:
    """Rebuild an EvalReport from its JSON form, re-running all the
    dataclass validation."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        curve = DetectionCurve(
            tau_grid=tuple(data["tau_grid_percent"]),
            rates={c: tuple(v) for c, v in data["rates"].items()},
        )
        records = tuple(
            RacRecord(
                trial_id=r["trial_id"],
                condition=r["condition"],
                a_init=r["a_init"],
                a_out=r["a_out"],
                rac=r["rac"],
                rel_delta=r["rel_delta"],
            )
            for r in data["records"]
        )
        return EvalReport(
            battery_id=data["battery_id"],
            observer_spec=data["observer_spec"],
            records=records,
            curve=curve,
            mean_rac=dict(data["mean_rac"]),
            median_rac=dict(data["median_rac"]),
            tau_star=data["tau_star_percent"],
            rmse_at_tau_star=data["rmse_at_tau_star"],
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: malformed report: {exc}") from None


def records_csv(report: EvalReport) -> str:
    lines = ["trial_id,condition,a_init,a_out,rac,rel_delta"]
    for r in report.records:
        lines.append(
            f"{r.trial_id},{r.condition},{r.a_init},{r.a_out},"
            f"{_fmt(r.rac)},{_fmt(r.rel_delta)}"
        )
    return "\n".join(lines) + "\n"


def curve_csv(report: EvalReport) -> str:
    conds = _ordered(report.curve.rates)
    lines = ["tau_percent," + ",".join(conds)]
    for j, tau in enumerate(report.curve.tau_grid):
        cells = ",".join(repr(float(report.curve.rates[c][j])) for c in conds)
        lines.append(f"{tau:g},{cells}")
    return "\n".join(lines) + "\n"


def dynamics_csv(rows: Sequence[DynamicsRow]) -> str:
    conds = _ordered({c for row in rows for c in row.mean_rac})
    lines = ["label," + ",".join(conds)]
    for row in rows:
        cells = ",".join(
            _fmt(row.mean_rac[c]) if c in row.mean_rac else "" for c in conds
        )
        lines.append(f"{row.label},{cells}")
    return "\n".join(lines) + "\n"


def load_dynamics_csv(path: str | Path) -> tuple[DynamicsRow, ...]:
    """Parse a dynamics.csv back into rows, for plotting."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty dynamics table")
    header = lines[0].split(",")
    if header[:1] != ["label"] or len(header) < 2:
        raise ManifestError(f"{path}: bad dynamics header {lines[0]!r}")
    conds = header[1:]
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ManifestError(f"{path}: line {lineno}: wrong column count")
        try:
            mean = {
                c: float(v) for c, v in zip(conds, cells[1:]) if v != ""
            }
        except ValueError as exc:
            raise ManifestError(f"{path}: line {lineno}: {exc}") from None
        rows.append(DynamicsRow(label=cells[0], mean_rac=mean))
    if not rows:
        raise ManifestError(f"{path}: dynamics table has no rows")
    return tuple(rows)


def _svg_frame(title: str, x_label: str, y_label: str) -> list[str]:
    x0, y0 = _MARGIN_L, _VIEW_H - _MARGIN_B
    x1, y1 = _VIEW_W - _MARGIN_R, _MARGIN_T
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_VIEW_W}" '
        f'height="{_VIEW_H}" viewBox="0 0 {_VIEW_W} {_VIEW_H}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{_VIEW_W}" height="{_VIEW_H}" fill="white"/>',
        f'<text x="{(x0 + x1) // 2}" y="18" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{_VIEW_H - 10}" '
        f'text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) // 2})">{y_label}</text>',
    ]


def _svg_series(
    series: dict[str, list[tuple[float, float]]],
    x_range: tuple[float, float],
    y_range: tuple[float, float],
) -> list[str]:
    x0, y0 = _MARGIN_L, _VIEW_H - _MARGIN_B
    x1, y1 = _VIEW_W - _MARGIN_R, _MARGIN_T
    xa, xb = x_range
    ya, yb = y_range

    def px(x: float) -> float:
        return x0 + (x - xa) / (xb - xa) * (x1 - x0)

    def py(y: float) -> float:
        return y0 + (y - ya) / (yb - ya) * (y1 - y0)

    parts = []
    for idx, (name, points) in enumerate(series.items()):
        color = _SERIES_COLORS.get(name, "#333333")
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{coords}"/>'
        )
        ly = _MARGIN_T + 14 + 18 * idx
        lx = _VIEW_W - _MARGIN_R + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{lx + 28}" y="{ly + 4}">{name}</text>')
    return parts


def _y_ticks() -> list[str]:
    x0, y0 = _MARGIN_L, _VIEW_H - _MARGIN_B
    y1 = _MARGIN_T
    parts = []
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 + frac * (y1 - y0)
        parts.append(
            f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{y + 4:.2f}" '
            f'text-anchor="end">{frac:g}</text>'
        )
    return parts


def svg_detection_curve(report: EvalReport) -> str:
    """Detection (and false-alarm) rate against the percent threshold grid,
    threshold axis on a log scale."""
    grid = report.curve.tau_grid
    xa, xb = math.log10(grid[0]), math.log10(grid[-1])
    y_max = 1.0
    parts = _svg_frame(
        f"battery {report.battery_id} under {report.observer_spec}",
        "threshold tau (%)",
        "detection rate",
    )
    x0, y0 = _MARGIN_L, _VIEW_H - _MARGIN_B
    x1 = _VIEW_W - _MARGIN_R
    for tick in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
        if tick < grid[0] or tick > grid[-1]:
            continue
        x = x0 + (math.log10(tick) - xa) / (xb - xa) * (x1 - x0)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle">{tick:g}</text>'
        )
    parts.extend(_y_ticks())
    series = {
        cond: [
            (math.log10(t), report.curve.rates[cond][j])
            for j, t in enumerate(grid)
        ]
        for cond in _ordered(report.curve.rates)
    }
    parts.extend(_svg_series(series, (xa, xb), (0.0, y_max)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_dynamics(rows: Sequence[DynamicsRow]) -> str:
    """Mean ratio per change condition across an ordered sequence of
    model snapshots."""
    if not rows:
        raise ValueError("no dynamics rows to plot")
    conds = _ordered({c for row in rows for c in row.mean_rac})
    values = [row.mean_rac[c] for row in rows for c in conds if c in row.mean_rac]
    y_top = max(1.0, max(values))
    xa, xb = 0.0, float(max(len(rows) - 1, 1))
    parts = _svg_frame("mean ratio across snapshots", "snapshot", "mean RAC")
    x0, y0 = _MARGIN_L, _VIEW_H - _MARGIN_B
    x1 = _VIEW_W - _MARGIN_R
    for i, row in enumerate(rows):
        x = x0 + (i - xa) / (xb - xa) * (x1 - x0)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle">'
            f"{row.label}</text>"
        )
    parts.extend(_y_ticks())
    series = {
        cond: [
            (float(i), row.mean_rac[cond])
            for i, row in enumerate(rows)
            if cond in row.mean_rac
        ]
        for cond in conds
    }
    parts.extend(_svg_series(series, (xa, xb), (0.0, y_top)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def summary_md(report: EvalReport) -> str:
    counts: dict[str, int] = {}
    for r in report.records:
        counts[r.condition] = counts.get(r.condition, 0) + 1
    lines = [
        "# Change-detection summary",
        "",
        f"- battery: `{report.battery_id}`",
        f"- observer: `{report.observer_spec}`",
        "- trials: "
        + ", ".join(f"{counts[c]} {c}" for c in _ordered(counts)),
    ]
    if report.tau_star is not None:
        lines.append(
            f"- fitted threshold: tau* = {report.tau_star:g}% "
            f"(rmse {report.rmse_at_tau_star:.4f})"
        )
    lines += ["", "| condition | mean RAC | median RAC |", "| --- | --- | --- |"]
    for cond in CHANGE_CONDITIONS:
        if cond in report.mean_rac:
            lines.append(
                f"| {cond} | {report.mean_rac[cond]:.4f} "
                f"| {report.median_rac[cond]:.4f} |"
            )
    if "NOCHANGE" in report.curve.rates:
        tau = (
            report.tau_star
            if report.tau_star is not None
            else report.curve.tau_grid[0]
        )
        j = report.curve.tau_grid.index(tau)
        lines.append("")
        lines.append(
            f"False-alarm rate at tau = {tau:g}%: "
            f"{report.curve.rates['NOCHANGE'][j]:.4f}"
        )
    return "\n".join(lines) + "\n"
