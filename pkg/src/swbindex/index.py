"""Daily well-being scores, the composite index and series statistics.

Scores are stored in [0, 1]; every rendered table and CSV multiplies by 100.
A day whose positive and negative shares are both zero has no score: missing
is an honest value here, never imputed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import DIMENSIONS
from .estimator import CategoryDistribution

INDEX_COLUMNS = DIMENSIONS + ("swb",)


class IndexError_(Exception):
    pass


class DegenerateSeriesError(IndexError_):
    pass


def component_score(dist: CategoryDistribution) -> float | None:
    """Positive share among opinionated posts: positive / (positive + negative).

    Neutral and off-topic mass never enters; when nothing opinionated was
    observed the score is missing.
    """
    pos = dist["positive"]
    neg = dist["negative"]
    denom = pos + neg
    if denom <= 0.0:
        return None
    return pos / denom


def composite(scores: Mapping[str, float | None]) -> float | None:
    """Plain mean of the eight dimension scores; missing if any is missing."""
    values = [scores.get(dim) for dim in DIMENSIONS]
    if any(v is None for v in values):
        return None
    return float(sum(values)) / len(DIMENSIONS)


@dataclass(frozen=True)
class DailyComponents:
    day: date
    scores: dict[str, float | None]

    def __post_init__(self) -> None:
        for dim, v in self.scores.items():
            if dim not in DIMENSIONS:
                raise IndexError_(f"unknown dimension {dim!r}")
            if v is not None and not 0.0 <= v <= 1.0:
                raise IndexError_(f"score out of range for {dim}: {v}")

    @property
    def composite(self) -> float | None:
        return composite(self.scores)

    def column(self, name: str) -> float | None:
        if name == "swb":
            return self.composite
        return self.scores.get(name)


@dataclass
class IndexSeries:
    days: list[DailyComponents]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        dates = [d.day for d in self.days]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise IndexError_("dates must be strictly increasing")

    def column(self, name: str) -> list[tuple[date, float | None]]:
        return [(d.day, d.column(name)) for d in self.days]


def _period_key(day: date, period: str) -> str:
    if period == "week":
        year, week, _ = day.isocalendar()
        return f"{year}-W{week:02d}"
    if period == "month":
        return f"{day.year}-{day.month:02d}"
    if period == "year":
        return str(day.year)
    raise IndexError_(f"unknown period {period!r}")


def aggregate(series: IndexSeries, period: str) -> dict[str, dict[str, tuple[float, float | None, int]]]:
    """Per-period mean and sample SD (n-1) of every column.

    Missing daily values are excluded; a period appears only if at least one
    column has an observation, and a single-observation column reports no SD.
    """
    if not series.days:
        raise IndexError_("empty series")
    buckets: dict[str, dict[str, list[float]]] = {}
    for daily in series.days:
        key = _period_key(daily.day, period)
        per = buckets.setdefault(key, {col: [] for col in INDEX_COLUMNS})
        for col in INDEX_COLUMNS:
            v = daily.column(col)
            if v is not None:
                per[col].append(v)
    result: dict[str, dict[str, tuple[float, float | None, int]]] = {}
    for key in sorted(buckets):
        stats: dict[str, tuple[float, float | None, int]] = {}
        for col, values in buckets[key].items():
            if not values:
                continue
            mean = float(np.mean(values))
            sd = float(np.std(values, ddof=1)) if len(values) > 1 else None
            stats[col] = (mean, sd, len(values))
        if stats:
            result[key] = stats
    return result


def local_linear_trend(
    points: Sequence[tuple[date, float | None]], bandwidth_days: float
) -> list[tuple[date, float | None, float | None]]:
    """Local-linear fit with tricube kernel weights over a day window.

    At each observation date a weighted straight line is fitted to the
    points within ``bandwidth_days``; returns the fitted value and its
    pointwise standard error. Windows with fewer than 3 points yield a
    missing trend at that date.
    """
    if bandwidth_days <= 0:
        raise IndexError_("bandwidth must be positive")
    observed = [(d, v) for d, v in points if v is not None]
    if len(observed) < 5:
        raise IndexError_("need at least 5 non-missing points")
    t = np.array([d.toordinal() for d, _ in observed], dtype=float)
    y = np.array([v for _, v in observed], dtype=float)

    out: list[tuple[date, float | None, float | None]] = []
    for d0, _ in observed:
        t0 = float(d0.toordinal())
        u = np.abs(t - t0) / bandwidth_days
        w = np.where(u < 1.0, (1.0 - u**3) ** 3, 0.0)
        inside = w > 0
        if inside.sum() < 3:
            out.append((d0, None, None))
            continue
        X = np.column_stack([np.ones(inside.sum()), t[inside] - t0])
        wi = w[inside]
        XtW = X.T * wi
        G = XtW @ X
        try:
            beta = np.linalg.solve(G, XtW @ y[inside])
            Ginv = np.linalg.inv(G)
        except np.linalg.LinAlgError:
            out.append((d0, None, None))
            continue
        fitted = float(beta[0])
        resid = y[inside] - X @ beta
        dof = float(wi.sum()) - 2.0
        sigma2 = float(wi @ resid**2) / dof if dof > 0 else 0.0
        # Equivalent-kernel vector for the fitted value at t0.
        ell = (Ginv @ XtW)[0]
        se = math.sqrt(max(sigma2, 0.0) * float(ell @ ell))
        out.append((d0, fitted, se))
    return out


def pearson_correlation(a: Sequence[float | None], b: Sequence[float | None]) -> float:
    """Pearson r over jointly observed pairs; degenerate inputs are an error."""
    if len(a) != len(b):
        raise IndexError_("series must be paired")
    pairs = [(x, y) for x, y in zip(a, b) if x is not None and y is not None]
    if len(pairs) < 2:
        raise IndexError_("need at least 2 paired observations")
    xs = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateSeriesError("degenerate series")
    return float(dx @ dy / math.sqrt(vx * vy))


# ---------------------------------------------------------------------------
# Wire formats: index CSV, trend CSV, components CSV, aggregate tables.


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value * 100.0:.4f}"


def render_index_csv(series: IndexSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("date",) + INDEX_COLUMNS)
    for daily in series.days:
        writer.writerow([daily.day.isoformat()] + [_fmt(daily.column(col)) for col in INDEX_COLUMNS])
    return buf.getvalue()


def parse_index_csv(text: str, provenance: dict | None = None) -> IndexSeries:
    reader = csv.DictReader(io.StringIO(text))
    days = []
    for row in reader:
        scores = {
            dim: (float(row[dim]) / 100.0 if row.get(dim) not in (None, "") else None)
            for dim in DIMENSIONS
        }
        days.append(DailyComponents(day=date.fromisoformat(row["date"]), scores=scores))
    return IndexSeries(days=days, provenance=provenance or {})


def render_trend_csv(trend: Iterable[tuple[date, float | None, float | None]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("date", "value", "se"))
    for day, value, se in trend:
        writer.writerow([day.isoformat(), _fmt(value), _fmt(se)])
    return buf.getvalue()


def render_aggregate_csv(stats: Mapping[str, Mapping[str, tuple[float, float | None, int]]], period: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [period]
    for col in INDEX_COLUMNS:
        header += [col, f"{col}_sd"]
    writer.writerow(header)
    for key, row in stats.items():
        cells = [key]
        for col in INDEX_COLUMNS:
            if col in row:
                mean, sd, _ = row[col]
                cells += [_fmt(mean), _fmt(sd)]
            else:
                cells += ["", ""]
        writer.writerow(cells)
    return buf.getvalue()


def render_aggregate_table(stats: Mapping[str, Mapping[str, tuple[float, float | None, int]]], period: str) -> str:
    """Aligned plain-text view, mean with SD parenthesised underneath-style."""
    cols = [period] + list(INDEX_COLUMNS)
    lines = ["  ".join(f"{c:>10}" for c in cols)]
    for key, row in stats.items():
        cells = [f"{key:>10}"]
        sds = [f"{'':>10}"]
        for col in INDEX_COLUMNS:
            if col in row:
                mean, sd, _ = row[col]
                cells.append(f"{mean * 100.0:>10.1f}")
                sds.append(f"({sd * 100.0:.1f})".rjust(10) if sd is not None else f"{'':>10}")
            else:
                cells.append(f"{'':>10}")
                sds.append(f"{'':>10}")
        lines.append("  ".join(cells))
        if any(s.strip() for s in sds):
            lines.append("  ".join(sds))
    return "\n".join(lines) + "\n"


def read_components_csv(text: str) -> IndexSeries:
    """Components fixture: date plus one column per dimension, 0-100 scale."""
    reader = csv.DictReader(io.StringIO(text))
    days = []
    for row in reader:
        scores = {
            dim: (float(row[dim]) / 100.0 if row.get(dim) not in (None, "") else None)
            for dim in DIMENSIONS
        }
        days.append(DailyComponents(day=date.fromisoformat(row["date"]), scores=scores))
    return IndexSeries(days=days)
