"""CSV and key-value text output for daily summaries.

``summaries.csv`` has one row per day and phase::

    day_index,date,phase,rt_mean,rt_lo68,rt_hi68,rt_lo90,rt_hi90,r_mean,...,n_eff,resampled

with the quantity blocks in the order ``rt, r, h, r_cum, d_cum, asym, p_hd,
mean_t_h``.  Floats use 17 significant digits so files compare byte for byte.
"""

from __future__ import annotations

import datetime as dt
import io
from pathlib import Path
from typing import Iterable, Sequence

from .experiment import QUANTITIES, DailySummary


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def level_tag(c: float) -> str:
    return format(round(c * 100, 9), "g")


def summary_columns(levels: Sequence[float] = (0.68, 0.90)) -> list[str]:
    cols = ["day_index", "date", "phase"]
    for q in QUANTITIES:
        cols.append(f"{q}_mean")
        for c in levels:
            cols += [f"{q}_lo{level_tag(c)}", f"{q}_hi{level_tag(c)}"]
    return cols + ["n_eff", "resampled"]


def summary_rows(summaries: Iterable[DailySummary], start_date: dt.date,
                 levels: Sequence[float] = (0.68, 0.90)) -> list[list[str]]:
    rows = []
    for s in summaries:
        row = [str(s.day_index), (start_date + dt.timedelta(days=s.day_index)).isoformat(), s.phase]
        for q in QUANTITIES:
            summ = s.quantities[q]
            row.append(fmt(summ.mean))
            for c in levels:
                lo, hi = summ.intervals[c]
                row += [fmt(lo), fmt(hi)]
        row += [fmt(s.n_eff), "1" if s.resampled else "0"]
        rows.append(row)
    return rows


def _csv(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def summaries_csv(summaries, start_date: dt.date, levels=(0.68, 0.90)) -> str:
    return _csv(summary_columns(levels), summary_rows(summaries, start_date, levels))


def divergence_csv(divergence: Iterable[tuple[int, float]], start_date: dt.date) -> str:
    rows = [[str(d), (start_date + dt.timedelta(days=d)).isoformat(), fmt(v)] for d, v in divergence]
    return _csv(["day_index", "date", "relative_difference"], rows)


def meta_text(meta: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in meta.items())


def write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")
