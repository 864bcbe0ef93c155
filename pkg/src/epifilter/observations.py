"""Daily observation series: CSV loading, validation, calendar alignment.

File format (UTF-8, comma separated, ISO dates, one row per day, no gaps)::

    date,hospitalized,recovered_cum,deaths_cum
    2020-03-06,120,15,1

``hospitalized`` is the number of people currently under treatment (a
stock); ``recovered_cum`` and ``deaths_cum`` are running totals of people
discharged from treatment.  Public datasets often publish daily new counts
instead; convert them before loading.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

from .assimilation import Observation

COLUMNS = ("date", "hospitalized", "recovered_cum", "deaths_cum")
DEFAULT_SIM_START = dt.date(2020, 1, 17)
DEFAULT_FIRST_OBS_DAY = 49


class ObservationError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class ObservationParseError(ObservationError):
    pass


class ObservationValidationError(ObservationError):
    pass


@dataclass(frozen=True)
class ObservationSeries:
    start_date: dt.date
    records: tuple[Observation, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def first_day(self) -> int | None:
        return self.records[0].day_index if self.records else None

    def date_of(self, day_index: int) -> dt.date:
        return self.start_date + dt.timedelta(days=day_index)


def day_index(date: dt.date, sim_start_date: dt.date) -> int:
    return (date - sim_start_date).days


def _parse_count(text: str, column: str, row: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise ObservationParseError(f"{column} is not an integer: {text!r}", row) from None
    if value < 0:
        raise ObservationValidationError(f"{column} is negative ({value})", row)
    return value


def parse_observations(lines, sim_start_date: dt.date = DEFAULT_SIM_START,
                       first_obs_day_index: int | None = DEFAULT_FIRST_OBS_DAY,
                       lax_columns: bool = False) -> ObservationSeries:
    """Parse CSV text lines into a validated series.

    Row numbers in error messages count the header as row 1.
    """
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ObservationParseError("empty file (no header)") from None
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ObservationParseError(f"missing column(s): {', '.join(missing)}", 1)
    extra = [c for c in header if c not in COLUMNS]
    if extra and not lax_columns:
        raise ObservationParseError(f"unexpected column(s): {', '.join(extra)} (use lax columns to ignore)", 1)
    pos = {c: header.index(c) for c in COLUMNS}

    records: list[Observation] = []
    prev_date = None
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ObservationParseError(f"expected {len(header)} fields, found {len(row)}", row_no)
        try:
            date = dt.date.fromisoformat(row[pos["date"]].strip())
        except ValueError:
            raise ObservationParseError(f"bad date {row[pos['date']]!r}", row_no) from None
        h = _parse_count(row[pos["hospitalized"]], "hospitalized", row_no)
        r = _parse_count(row[pos["recovered_cum"]], "recovered_cum", row_no)
        d = _parse_count(row[pos["deaths_cum"]], "deaths_cum", row_no)
        if prev_date is not None:
            expected = prev_date + dt.timedelta(days=1)
            if date > expected:
                raise ObservationValidationError(f"gap in dates: {expected.isoformat()} is missing", row_no)
            if date != expected:
                raise ObservationValidationError(
                    f"dates must increase by one day, got {date.isoformat()} after {prev_date.isoformat()}", row_no)
            last = records[-1]
            if r < last.r_cum:
                raise ObservationValidationError(f"recovered_cum decreases ({last.r_cum} -> {r})", row_no)
            if d < last.d_cum:
                raise ObservationValidationError(f"deaths_cum decreases ({last.d_cum} -> {d})", row_no)
        elif first_obs_day_index is not None and day_index(date, sim_start_date) != first_obs_day_index:
            raise ObservationValidationError(
                f"first observation {date.isoformat()} is day {day_index(date, sim_start_date)} after "
                f"{sim_start_date.isoformat()}, expected day {first_obs_day_index}", row_no)
        if day_index(date, sim_start_date) < 0:
            raise ObservationValidationError(f"{date.isoformat()} precedes the simulation start", row_no)
        records.append(Observation(day_index(date, sim_start_date), h, r, d))
        prev_date = date
    return ObservationSeries(sim_start_date, tuple(records))


def load_observations(path, sim_start_date: dt.date = DEFAULT_SIM_START,
                      first_obs_day_index: int | None = DEFAULT_FIRST_OBS_DAY,
                      lax_columns: bool = False) -> ObservationSeries:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return parse_observations(fh, sim_start_date, first_obs_day_index, lax_columns)
    except UnicodeDecodeError as exc:
        raise ObservationParseError(f"{path}: not UTF-8 ({exc.reason})") from None


def format_observations(series: ObservationSeries) -> str:
    lines = [",".join(COLUMNS)]
    for rec in series.records:
        lines.append(f"{series.date_of(rec.day_index).isoformat()},{rec.h_stock},{rec.r_cum},{rec.d_cum}")
    return "\n".join(lines) + "\n"


def write_observations(series: ObservationSeries, path) -> None:
    Path(path).write_text(format_observations(series), encoding="utf-8")
