"""Historical-series ingestion, trace export, and SVG comparison charts.

All ingestion is CSV with a `year,value` header; run traces export to CSV
with a `year` column plus one column per variable. Charts are plain SVG 1.1
so outputs stay diffable and reproducible byte-for-byte.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

from .engine import RunResult

SVG_WIDTH = 960
SVG_HEIGHT = 540

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class DataFormatError(ValueError):
    """Malformed ingestion file; message carries the offending line."""


@dataclass(frozen=True)
class TimeSeries:
    """Year-indexed real values with strictly increasing years."""

    name: str
    years: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.years) != len(self.values):
            raise ValueError("years and values differ in length")
        for a, b in zip(self.years, self.years[1:]):
            if not a < b:
                raise DataFormatError(f"years not increasing: {a} then {b}")
        for y, v in zip(self.years, self.values):
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite value at year {y}")

    def __len__(self) -> int:
        return len(self.years)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.years, self.values))

    def truncate(self, first: int, last: int) -> "TimeSeries":
        pairs = [(y, v) for y, v in zip(self.years, self.values) if first <= y <= last]
        return TimeSeries(self.name, tuple(y for y, _ in pairs), tuple(v for _, v in pairs))


@dataclass(frozen=True)
class DataBundle:
    """The historical series the model is calibrated against."""

    pbr_history: TimeSeries
    total_population: TimeSeries
    poverty_below_fpl: TimeSeries
    crime_rate: TimeSeries | None = None

    @property
    def vulnerable_population(self) -> TimeSeries:
        return derive_vulnerable(self.poverty_below_fpl)

    def calibration_series(self) -> dict[str, TimeSeries]:
        return {
            "pbr": self.pbr_history,
            "total_population": self.total_population,
            "vulnerable_population": self.vulnerable_population,
        }


def load_series(path: str | os.PathLike, name: str) -> TimeSeries:
    """Parse a `year,value` CSV into a validated TimeSeries."""
    years: list[int] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: no data rows") from None
        if [c.strip().lower() for c in header[:2]] != ["year", "value"]:
            raise DataFormatError(f"{path}: expected 'year,value' header, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                year = int(row[0])
                value = float(row[1])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not math.isfinite(value):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            if years and year <= years[-1]:
                raise DataFormatError(f"{path}:{lineno}: years not increasing")
            years.append(year)
            values.append(value)
    if not years:
        raise DataFormatError(f"{path}: no data rows")
    return TimeSeries(name, tuple(years), tuple(values))


def derive_vulnerable(poverty: TimeSeries) -> TimeSeries:
    """Vulnerable population proxy: twice the below-poverty headcount."""
    return TimeSeries(
        "vulnerable_population",
        poverty.years,
        tuple(2.0 * v for v in poverty.values),
    )


def load_bundle(data_dir: str | os.PathLike) -> DataBundle:
    """Load the standard bundle (pbr, total_population, poverty, crime)."""
    def p(stem: str) -> str:
        return os.path.join(data_dir, stem + ".csv")

    crime = None
    if os.path.exists(p("crime_rate")):
        crime = load_series(p("crime_rate"), "crime_rate")
    return DataBundle(
        pbr_history=load_series(p("pbr"), "pbr"),
        total_population=load_series(p("total_population"), "total_population"),
        poverty_below_fpl=load_series(p("poverty"), "poverty_below_fpl"),
        crime_rate=crime,
    )


def _fmt(v: float) -> str:
    # repr round-trips floats exactly through float().
    return repr(v)


def export_series(series: TimeSeries, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("year,value\n")
        for y, v in zip(series.years, series.values):
            fh.write(f"{y},{_fmt(v)}\n")


def export_run(result: RunResult, path: str | os.PathLike) -> None:
    """Write saved traces as CSV: `year` column plus one column per variable."""
    names = list(result.traces)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["year"] + names) + "\n")
        for i, t in enumerate(result.times):
            year = str(int(t)) if float(t).is_integer() else repr(t)
            row = [year] + [_fmt(result.traces[n][i]) for n in names]
            fh.write(",".join(row) + "\n")


def export_comparison(
    times: Sequence[float],
    columns: dict[str, Sequence[float]],
    path: str | os.PathLike,
) -> None:
    """CSV with a `year` column and one column per labelled series."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["year"] + names) + "\n")
        for i, t in enumerate(times):
            year = str(int(t)) if float(t).is_integer() else repr(t)
            fh.write(",".join([year] + [_fmt(columns[n][i]) for n in names]) + "\n")


@dataclass(frozen=True)
class ChartSeries:
    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]
    historical: bool = False


@dataclass(frozen=True)
class ChartPanel:
    title: str
    series: tuple[ChartSeries, ...]
    y_label: str = ""


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    else:
        step = 10.0 * mag
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(t)
        t += step
    return ticks


def _tick_label(v: float) -> str:
    if abs(v) >= 1e6:
        return f"{v/1e6:g}M"
    if abs(v) >= 1e4:
        return f"{v/1e3:g}k"
    return f"{v:g}"


def render_chart(panels: Sequence[ChartPanel], path: str | os.PathLike) -> None:
    """Render panels side by side into one SVG 1.1 document.

    Each series becomes exactly one polyline; historical series are dashed
    with point markers, simulated series solid.
    """
    n = max(len(panels), 1)
    margin = 56
    gutter = 40
    panel_w = (SVG_WIDTH - 2 * margin - gutter * (n - 1)) / n
    panel_h = SVG_HEIGHT - 2 * margin

    out: list[str] = []
    out.append(
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">'
    )
    out.append(f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>')

    for pi, panel in enumerate(panels):
        x0 = margin + pi * (panel_w + gutter)
        y0 = margin
        xs = [v for s in panel.series for v in s.x]
        ys = [v for s in panel.series for v in s.y]
        if not xs:
            continue
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if y_hi == y_lo:
            y_lo -= 1.0
            y_hi += 1.0
        pad = 0.05 * (y_hi - y_lo)
        y_lo -= pad
        y_hi += pad

        def sx(v: float) -> float:
            return x0 + (v - x_lo) / (x_hi - x_lo) * panel_w if x_hi > x_lo else x0

        def sy(v: float) -> float:
            return y0 + panel_h - (v - y_lo) / (y_hi - y_lo) * panel_h

        # axes
        out.append(
            f'<line x1="{x0:.2f}" y1="{y0 + panel_h:.2f}" x2="{x0 + panel_w:.2f}" '
            f'y2="{y0 + panel_h:.2f}" stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" '
            f'y2="{y0 + panel_h:.2f}" stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x0 + panel_w / 2:.2f}" y="{y0 - 18:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{panel.title}</text>'
        )
        for tv in _nice_ticks(x_lo, x_hi):
            out.append(
                f'<text x="{sx(tv):.2f}" y="{y0 + panel_h + 18:.2f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{_tick_label(tv)}</text>'
            )
        for tv in _nice_ticks(y_lo, y_hi):
            out.append(
                f'<text x="{x0 - 6:.2f}" y="{sy(tv) + 3:.2f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{_tick_label(tv)}</text>'
            )

        for si, s in enumerate(panel.series):
            color = PALETTE[si % len(PALETTE)]
            dash = ' stroke-dasharray="6 4"' if s.historical else ""
            pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(s.x, s.y))
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                f'points="{pts}"/>'
            )
            if s.historical:
                for x, y in zip(s.x, s.y):
                    out.append(
                        f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2" fill="{color}"/>'
                    )
            # legend entry
            ly = y0 + 14 * si + 8
            lx = x0 + 8
            out.append(
                f'<line x1="{lx:.2f}" y1="{ly:.2f}" x2="{lx + 22:.2f}" y2="{ly:.2f}" '
                f'stroke="{color}" stroke-width="1.5"{dash}/>'
            )
            out.append(
                f'<text x="{lx + 28:.2f}" y="{ly + 3:.2f}" font-family="sans-serif" '
                f'font-size="11">{s.label}</text>'
            )

    out.append("</svg>")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(out) + "\n")
