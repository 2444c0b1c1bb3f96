"""Economic panel alignment: frequency conversion and standardization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

FREQUENCIES = ("monthly", "quarterly", "yearly")

#: Middle month of each quarter, the anchor for interpolation.
_QUARTER_ANCHOR = {1: 2, 2: 5, 3: 8, 4: 11}


class PanelError(Exception):
    pass


def _month_index(d: date) -> int:
    return d.year * 12 + (d.month - 1)


def _month_date(idx: int) -> date:
    return date(idx // 12, idx % 12 + 1, 1)


@dataclass
class EconSeries:
    """One named economic indicator at its native frequency."""

    name: str
    frequency: str
    observations: list[tuple[date, float]]

    def __post_init__(self) -> None:
        if self.frequency not in FREQUENCIES:
            raise PanelError(f"unknown frequency {self.frequency!r}")
        dates = [d for d, _ in self.observations]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise PanelError(f"{self.name}: dates must be strictly increasing")


def interpolate_quarterly_to_monthly(series: EconSeries) -> EconSeries:
    """Monthly series anchored at each quarter's middle month.

    Months between anchors are linearly interpolated; months before the
    first and after the last anchor carry the nearest anchor value, so the
    output spans every month of the observed quarters and reproduces the
    quarterly inputs exactly at their anchors.
    """
    if series.frequency != "quarterly":
        raise PanelError(f"{series.name}: wrong frequency {series.frequency!r}, expected quarterly")
    if len(series.observations) < 2:
        raise PanelError(f"{series.name}: need at least 2 quarterly observations")

    anchors: list[tuple[int, float]] = []
    for d, v in series.observations:
        quarter = (d.month - 1) // 3 + 1
        anchors.append((_month_index(date(d.year, _QUARTER_ANCHOR[quarter], 1)), v))
    if any(b <= a for (a, _), (b, _) in zip(anchors, anchors[1:])):
        raise PanelError(f"{series.name}: observations must fall in distinct, increasing quarters")

    first_q = series.observations[0][0]
    last_q = series.observations[-1][0]
    start = _month_index(date(first_q.year, ((first_q.month - 1) // 3) * 3 + 1, 1))
    end = _month_index(date(last_q.year, ((last_q.month - 1) // 3) * 3 + 3, 1))

    xs = np.array([m for m, _ in anchors], dtype=float)
    ys = np.array([v for _, v in anchors], dtype=float)
    months = np.arange(start, end + 1, dtype=float)
    values = np.interp(months, xs, ys)  # np.interp clamps outside the anchor range
    return EconSeries(
        name=series.name,
        frequency="monthly",
        observations=[(_month_date(int(m)), float(v)) for m, v in zip(months, values)],
    )


def yearly_to_monthly(series: EconSeries) -> EconSeries:
    """Yearly values repeated as within-year constants."""
    if series.frequency != "yearly":
        raise PanelError(f"{series.name}: wrong frequency {series.frequency!r}, expected yearly")
    obs = []
    for d, v in series.observations:
        for month in range(1, 13):
            obs.append((date(d.year, month, 1), v))
    return EconSeries(name=series.name, frequency="monthly", observations=obs)


def to_monthly(series: EconSeries) -> EconSeries:
    if series.frequency == "monthly":
        return series
    if series.frequency == "quarterly":
        return interpolate_quarterly_to_monthly(series)
    return yearly_to_monthly(series)


@dataclass
class Panel:
    """Rectangular standardized monthly matrix with its back-transforms."""

    names: list[str]
    months: list[date]
    data: np.ndarray
    dropped_rows: int
    transforms: dict[str, tuple[float, float]]

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def sample_covariance(self) -> np.ndarray:
        if self.n < 2:
            raise PanelError("need at least 2 rows for a covariance")
        return np.cov(self.data, rowvar=False, ddof=1)


def build_panel(
    series_list: Sequence[EconSeries], start: date, end: date
) -> Panel:
    """Align series to months in [start, end], listwise-delete incomplete rows
    and standardize every column to mean 0, variance 1 (recorded)."""
    if not series_list:
        raise PanelError("no series")
    monthly = [to_monthly(s) for s in series_list]
    lookup = [{_month_index(d): v for d, v in s.observations} for s in monthly]
    months = [
        _month_date(m) for m in range(_month_index(start), _month_index(end) + 1)
    ]
    rows = []
    kept_months = []
    dropped = 0
    for month in months:
        idx = _month_index(month)
        cells = [table.get(idx) for table in lookup]
        if any(c is None for c in cells):
            dropped += 1
            continue
        rows.append(cells)
        kept_months.append(month)
    if not rows:
        raise PanelError("no months where every series is observed")
    data = np.array(rows, dtype=float)
    transforms = {}
    for j, series in enumerate(monthly):
        mean = float(np.mean(data[:, j]))
        sd = float(np.std(data[:, j], ddof=1)) if data.shape[0] > 1 else 0.0
        if sd == 0.0:
            raise PanelError(f"{series.name}: constant over the panel, cannot standardize")
        data[:, j] = (data[:, j] - mean) / sd
        transforms[series.name] = (mean, sd)
    return Panel(
        names=[s.name for s in monthly],
        months=kept_months,
        data=data,
        dropped_rows=dropped,
        transforms=transforms,
    )


def read_panel_csv(csv_path: str | Path, sidecar_path: str | Path | None = None) -> list[EconSeries]:
    """Panel CSV: ``date`` column in ISO months plus one column per variable;
    a sidecar JSON declares each column's native frequency."""
    csv_path = Path(csv_path)
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    try:
        frequencies = json.loads(Path(sidecar_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PanelError(f"cannot read frequency sidecar {sidecar_path}: {exc}") from exc
    text = csv_path.read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    columns = [c for c in (reader.fieldnames or []) if c != "date"]
    missing = [c for c in columns if c not in frequencies]
    if missing:
        raise PanelError(f"sidecar missing frequency for: {', '.join(missing)}")
    cells: dict[str, list[tuple[date, float]]] = {c: [] for c in columns}
    for row in reader:
        raw = row.get("date", "")
        parts = raw.split("-")
        if len(parts) < 2:
            raise PanelError(f"bad month {raw!r}")
        d = date(int(parts[0]), int(parts[1]), 1)
        for c in columns:
            value = (row.get(c) or "").strip()
            if value:
                cells[c].append((d, float(value)))
    return [EconSeries(name=c, frequency=frequencies[c], observations=cells[c]) for c in columns]
