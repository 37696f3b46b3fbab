"""Parsing and validation of raw case counts and unit metadata.

Input files are plain CSV:

* cases:    header ``unit_id,date,count``, ISO dates, one row per unit-day
* metadata: header ``unit_id,city_code,district_letter,age_group,population,region,status``

A gap in the day axis of a unit is a hard error, never an implicit zero,
because silent zero-fill would distort crossing times downstream.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from typing import Optional

from .errors import DataError

REGIONS = ("North", "South")
STATUSES = ("Urban", "Suburban")

#: Default rate normalization: cases per 100,000 persons per day.
DEFAULT_RATE_SCALE = 100_000.0


@dataclass(frozen=True)
class RawSeries:
    """Consecutive daily case counts for one unit."""

    unit_id: str
    start_date: dt.date
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) < 1:
            raise DataError(f"{self.unit_id}: empty count series")
        if any(c < 0 for c in self.counts):
            raise DataError(f"{self.unit_id}: negative count")

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.counts) - 1)


@dataclass(frozen=True)
class UnitMeta:
    """Static attributes of one unit (district or district-age-group)."""

    unit_id: str
    city_code: str
    district_letter: str
    population: int
    region: str
    status: str
    age_group: Optional[int] = None

    def __post_init__(self):
        if self.population <= 0:
            raise DataError(f"{self.unit_id}: population must be positive")
        if self.region not in REGIONS:
            raise DataError(f"{self.unit_id}: region must be one of {REGIONS}")
        if self.status not in STATUSES:
            raise DataError(f"{self.unit_id}: status must be one of {STATUSES}")
        if self.age_group is not None and self.age_group not in (1, 2, 3, 4):
            raise DataError(f"{self.unit_id}: age_group must be in 1..4")


@dataclass(frozen=True)
class RateSeries:
    """Daily infection rates (cases per `scale` persons per day) for one unit."""

    unit_id: str
    start_date: dt.date
    rates: tuple[float, ...]

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.rates) - 1)


def _parse_date(text: str, row_no: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"row {row_no}: unparseable date {text!r}") from exc


def parse_case_series(path) -> dict[str, RawSeries]:
    """Read a case CSV into one RawSeries per unit.

    Rows for a unit may appear in any order but must cover consecutive
    days exactly once. Errors report the offending row number.
    """
    per_unit: dict[str, dict[dt.date, int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"unit_id", "date", "count"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: expected header unit_id,date,count")
        for row_no, row in enumerate(reader, start=2):
            unit = row["unit_id"].strip()
            if not unit:
                raise DataError(f"row {row_no}: empty unit_id")
            day = _parse_date(row["date"].strip(), row_no)
            try:
                count = int(row["count"])
            except ValueError as exc:
                raise DataError(
                    f"row {row_no}: unparseable count {row['count']!r}"
                ) from exc
            if count < 0:
                raise DataError(f"row {row_no}: negative count for {unit}")
            days = per_unit.setdefault(unit, {})
            if day in days:
                raise DataError(f"row {row_no}: duplicate ({unit}, {day})")
            days[day] = count

    out: dict[str, RawSeries] = {}
    for unit, days in per_unit.items():
        ordered = sorted(days)
        start, end = ordered[0], ordered[-1]
        if (end - start).days + 1 != len(ordered):
            raise DataError(f"{unit}: gap in day axis between {start} and {end}")
        counts = tuple(days[start + dt.timedelta(days=i)] for i in range(len(ordered)))
        out[unit] = RawSeries(unit_id=unit, start_date=start, counts=counts)
    return out


def write_case_series(path, series: dict[str, RawSeries]) -> None:
    """Serialize a RawSeries set back to the CSV wire format (round-trippable)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "date", "count"])
        for unit in sorted(series):
            s = series[unit]
            for i, c in enumerate(s.counts):
                writer.writerow([unit, (s.start_date + dt.timedelta(days=i)).isoformat(), c])


def parse_unit_metadata(path) -> dict[str, UnitMeta]:
    """Read the metadata CSV into a registry keyed by unit_id."""
    out: dict[str, UnitMeta] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {
            "unit_id", "city_code", "district_letter", "age_group",
            "population", "region", "status",
        }
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: unexpected metadata header")
        for row_no, row in enumerate(reader, start=2):
            unit = row["unit_id"].strip()
            if unit in out:
                raise DataError(f"row {row_no}: duplicate unit {unit!r}")
            age_raw = (row["age_group"] or "").strip()
            try:
                age = int(age_raw) if age_raw else None
            except ValueError as exc:
                raise DataError(f"row {row_no}: bad age_group {age_raw!r}") from exc
            try:
                population = int(row["population"])
            except ValueError as exc:
                raise DataError(
                    f"row {row_no}: bad population {row['population']!r}"
                ) from exc
            try:
                out[unit] = UnitMeta(
                    unit_id=unit,
                    city_code=row["city_code"].strip(),
                    district_letter=row["district_letter"].strip(),
                    population=population,
                    region=row["region"].strip(),
                    status=row["status"].strip(),
                    age_group=age,
                )
            except DataError as exc:
                raise DataError(f"row {row_no}: {exc}") from exc
    return out


def compute_daily_rates(
    series: RawSeries, meta: UnitMeta, scale: float = DEFAULT_RATE_SCALE
) -> RateSeries:
    """Convert counts to rates: counts[t] / population * scale."""
    if series.unit_id != meta.unit_id:
        raise DataError(
            f"unit_id mismatch: series {series.unit_id!r} vs meta {meta.unit_id!r}"
        )
    rates = tuple(c / meta.population * scale for c in series.counts)
    return RateSeries(unit_id=series.unit_id, start_date=series.start_date, rates=rates)


def window_clip(series: RateSeries, start: dt.date, end: dt.date) -> RateSeries:
    """Return the sub-series covering exactly [start, end]."""
    if start > end:
        raise DataError(f"window start {start} after end {end}")
    if start < series.start_date or end > series.end_date:
        raise DataError(
            f"{series.unit_id}: window [{start}, {end}] outside data "
            f"[{series.start_date}, {series.end_date}]"
        )
    i = (start - series.start_date).days
    j = (end - series.start_date).days + 1
    return RateSeries(unit_id=series.unit_id, start_date=start, rates=series.rates[i:j])
