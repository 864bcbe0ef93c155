import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epifilter.assimilation import Observation
from epifilter.observations import (
    ObservationParseError,
    ObservationSeries,
    ObservationValidationError,
    day_index,
    format_observations,
    load_observations,
    parse_observations,
    write_observations,
)

START = dt.date(2020, 1, 17)
HEADER = "date,hospitalized,recovered_cum,deaths_cum"


def parse(text, **kw):
    return parse_observations(text.strip().splitlines(), START, **kw)


def test_day_indices_from_calendar(tmp_path):
    path = tmp_path / "obs.csv"
    path.write_text(f"{HEADER}\n2020-03-06,10,0,0\n2020-03-07,12,1,0\n2020-03-08,15,1,1\n", encoding="utf-8")
    series = load_observations(path, START, 49)
    assert [r.day_index for r in series] == [49, 50, 51]
    assert series.records[2] == Observation(51, 15, 1, 1)
    assert series.first_day == 49
    assert series.date_of(51) == dt.date(2020, 3, 8)


def test_gap_names_missing_date():
    with pytest.raises(ObservationValidationError, match="2020-03-07") as exc:
        parse(f"{HEADER}\n2020-03-06,10,0,0\n2020-03-08,12,1,0\n")
    assert exc.value.row == 3


def test_decreasing_deaths():
    with pytest.raises(ObservationValidationError, match="deaths_cum decreases") as exc:
        parse(f"{HEADER}\n2020-03-06,10,0,2\n2020-03-07,12,1,1\n")
    assert exc.value.row == 3
    assert "row 3" in str(exc.value)


def test_decreasing_recoveries():
    with pytest.raises(ObservationValidationError, match="recovered_cum"):
        parse(f"{HEADER}\n2020-03-06,10,5,0\n2020-03-07,12,4,0\n")


def test_hospital_stock_may_fall():
    series = parse(f"{HEADER}\n2020-03-06,10,0,0\n2020-03-07,3,7,0\n")
    assert [r.h_stock for r in series] == [10, 3]


@pytest.mark.parametrize("body,kind,fragment", [
    ("2020-03-06,-1,0,0", ObservationValidationError, "negative"),
    ("2020-03-06,1.5,0,0", ObservationParseError, "integer"),
    ("2020-03-06,1,000,0,0", ObservationParseError, "fields"),
    ("06/03/2020,1,0,0", ObservationParseError, "bad date"),
    ("2020-03-07,1,0,0", ObservationValidationError, "expected day 49"),
])
def test_row_errors(body, kind, fragment):
    with pytest.raises(kind, match=fragment) as exc:
        parse(f"{HEADER}\n{body}\n")
    assert exc.value.row == 2


def test_duplicate_or_backwards_date():
    with pytest.raises(ObservationValidationError, match="one day"):
        parse(f"{HEADER}\n2020-03-06,1,0,0\n2020-03-06,1,0,0\n")


def test_header_errors():
    with pytest.raises(ObservationParseError, match="missing"):
        parse("date,hospitalized,deaths_cum\n2020-03-06,1,0\n")
    with pytest.raises(ObservationParseError, match="empty"):
        parse_observations([], START)


def test_extra_columns_need_lax_mode():
    text = f"{HEADER},note\n2020-03-06,1,0,0,x\n"
    with pytest.raises(ObservationParseError, match="unexpected"):
        parse(text)
    series = parse(text, lax_columns=True)
    assert series.records == (Observation(49, 1, 0, 0),)


def test_column_order_is_free():
    series = parse("deaths_cum,date,recovered_cum,hospitalized\n3,2020-03-06,2,1\n")
    assert series.records == (Observation(49, 1, 2, 3),)


def test_alignment_check_can_be_disabled():
    series = parse(f"{HEADER}\n2020-04-01,1,0,0\n", first_obs_day_index=None)
    assert series.first_day == 75
    with pytest.raises(ObservationValidationError, match="precedes"):
        parse(f"{HEADER}\n2020-01-01,1,0,0\n", first_obs_day_index=None)


def test_not_utf8(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_bytes(HEADER.encode() + b"\n2020-03-06,1,0,0\xff\n")
    with pytest.raises(ObservationParseError, match="UTF-8"):
        load_observations(path, START)


def test_blank_lines_ignored():
    series = parse(f"{HEADER}\n2020-03-06,1,0,0\n\n2020-03-07,2,0,0\n")
    assert len(series) == 2


@st.composite
def series_strategy(draw):
    n = draw(st.integers(0, 60))
    h = draw(st.lists(st.integers(0, 10**6), min_size=n, max_size=n))
    dr = draw(st.lists(st.integers(0, 10**4), min_size=n, max_size=n))
    dd = draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    r, d = np.cumsum(dr), np.cumsum(dd)
    return ObservationSeries(START, tuple(Observation(49 + i, h[i], int(r[i]), int(d[i])) for i in range(n)))


@given(series_strategy())
def test_round_trip(series):
    again = parse_observations(format_observations(series).splitlines(), START, 49)
    assert again == series


def test_round_trip_through_file(tmp_path):
    series = ObservationSeries(START, tuple(Observation(49 + i, i, 2 * i, i // 3) for i in range(30)))
    write_observations(series, tmp_path / "o.csv")
    assert load_observations(tmp_path / "o.csv", START, 49) == series


def test_day_index_arithmetic():
    gen = np.random.default_rng(0)
    for offset in gen.integers(0, 5000, 1000):
        date = START + dt.timedelta(days=int(offset))
        assert day_index(date, START) == offset
        assert date.toordinal() - START.toordinal() == offset
