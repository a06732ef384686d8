from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from battarb.errors import DataSchemaError
from battarb.prices import EUR_MWH_TO_EUR_WH, PriceSeries, load_prices

START = datetime(2014, 1, 1)


def write_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("timestamp,price_eur_mwh\n")
        for stamp, price in rows:
            fh.write(f"{stamp.strftime('%Y-%m-%dT%H:%M:%S')},{price}\n")


def hourly_rows(n, price=50.0, start=START):
    return [(start + timedelta(hours=i), price) for i in range(n)]


def test_unit_conversion_is_exact(tmp_path):
    f = tmp_path / "p.csv"
    write_csv(f, hourly_rows(24, 50.0))
    series = load_prices(f)
    assert len(series) == 24
    assert np.all(series.prices == 50.0 * 1e-6)


def test_gap_is_rejected_naming_missing_hour(tmp_path):
    rows = hourly_rows(24)
    del rows[13]
    f = tmp_path / "p.csv"
    write_csv(f, rows)
    with pytest.raises(DataSchemaError, match="2014-01-01T13:00:00"):
        load_prices(f)


def test_duplicate_hour_rejected(tmp_path):
    rows = hourly_rows(5)
    rows.insert(3, rows[2])
    f = tmp_path / "p.csv"
    write_csv(f, rows)
    with pytest.raises(DataSchemaError, match="duplicate"):
        load_prices(f)


def test_empty_file_rejected(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("timestamp,price_eur_mwh\n")
    with pytest.raises(DataSchemaError, match="no data rows"):
        load_prices(f)


def test_malformed_row_names_line_number(tmp_path):
    rows = hourly_rows(3)
    f = tmp_path / "p.csv"
    write_csv(f, rows)
    with open(f, "a") as fh:
        fh.write("2014-01-01T03:00:00,not_a_number\n")
    with pytest.raises(DataSchemaError, match="line 5"):
        load_prices(f)


def test_full_year_fixture(tmp_path):
    # 8760 rows generated here, counted independently of the loader
    rows = hourly_rows(8760)
    f = tmp_path / "year.csv"
    write_csv(f, rows)
    assert sum(1 for _ in open(f)) - 1 == 8760
    series = load_prices(f)
    assert len(series) == 8760
    assert series.horizon_s == 8760 * 3600


def test_zero_order_hold_boundaries():
    series = PriceSeries(start=START, prices=np.array([1e-4, 2e-4]))
    assert series.at(0) == 1e-4
    assert series.at(59 * 60 + 59) == 1e-4
    assert series.at(3600) == 2e-4
    with pytest.raises(ValueError):
        series.at(2 * 3600)
    with pytest.raises(ValueError):
        series.at(-1)


def test_constant_series_holds_everywhere():
    series = PriceSeries(start=START, prices=np.full(4, 7e-5))
    for t in np.linspace(0, series.horizon_s - 1, 17):
        assert series.at(float(t)) == 7e-5


def test_negative_prices_accepted(tmp_path):
    f = tmp_path / "p.csv"
    write_csv(f, hourly_rows(3, -12.5))
    series = load_prices(f)
    assert np.all(series.prices == -12.5 * EUR_MWH_TO_EUR_WH)


def test_zero_order_hold_matches_floor_indexing(prices_week):
    rng = np.random.default_rng(1)
    for t in rng.uniform(0, prices_week.horizon_s - 1e-9, size=50):
        assert prices_week.at(float(t)) == prices_week.prices[int(t // 3600)]


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-500, max_value=3000, allow_nan=False, width=32),
        min_size=1,
        max_size=72,
    )
)
def test_round_trip_preserves_values(tmp_path_factory, values):
    series = PriceSeries(start=START, prices=np.array(values, dtype=float) * EUR_MWH_TO_EUR_WH)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    series.to_csv(path)
    back = load_prices(path)
    assert back.start == series.start
    np.testing.assert_array_equal(back.prices, series.prices)


def test_slice_hours(prices_week):
    part = prices_week.slice_hours(24, 48)
    assert len(part) == 48
    assert part.start == prices_week.start + timedelta(hours=24)
    np.testing.assert_array_equal(part.prices, prices_week.prices[24:72])


def test_unknown_schema_rejected(tmp_path):
    with pytest.raises(DataSchemaError, match="schema"):
        load_prices(tmp_path / "x.csv", schema="parquet")
