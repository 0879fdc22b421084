from datetime import datetime, timezone

import pytest

from stormreach.errors import NowcastParseError, SchemaViolationError
from stormreach.nowcast import (HEADER_LINE, NowcastFile, StormCellObservation,
                                parse_nowcast, serialize_nowcast)

FULL_ROW = ("1;120;0.5;39.0;8.2;0.3;0.7;38.8;39.2;45;30;"
            "0.52;39.02;0.54;39.04;0.56;39.06;0.58;39.08;0.6;39.1;0.62;39.12")


def write(tmp_path, rows, name="nowcast_20161219_1030.csv"):
    path = tmp_path / name
    path.write_text("\n".join([HEADER_LINE] + rows) + "\n", encoding="utf-8")
    return path


def test_parse_full_row(tmp_path):
    nowcast = parse_nowcast(write(tmp_path, [FULL_ROW]))
    assert nowcast.issue_time == datetime(2016, 12, 19, 10, 30, tzinfo=timezone.utc)
    (cell,) = nowcast.cells
    assert cell.id == 1
    assert cell.pixels == 120
    assert cell.center == (0.5, 39.0)
    assert cell.heading == 45.0
    assert cell.speed == 30.0
    assert cell.n_forecasts == 6
    assert cell.forecast(1) == (0.52, 39.02)
    assert cell.forecast(6) == (0.62, 39.12)


def test_blank_forecasts_are_absent_not_zero(tmp_path):
    row = FULL_ROW.rsplit(";", 4)[0] + ";;;;"  # blank out the 50/60 min pair
    nowcast = parse_nowcast(write(tmp_path, [row]))
    (cell,) = nowcast.cells
    assert cell.n_forecasts == 4
    assert cell.forecast(5) is None
    assert cell.forecast(6) is None


def test_inverted_latitude_extremities_rejected(tmp_path):
    row = FULL_ROW.replace(";38.8;39.2;", ";39.2;38.8;")
    with pytest.raises(SchemaViolationError, match="line 2"):
        parse_nowcast(write(tmp_path, [row]))


def test_duplicate_ids_rejected(tmp_path):
    with pytest.raises(SchemaViolationError, match="duplicate"):
        parse_nowcast(write(tmp_path, [FULL_ROW, FULL_ROW]))


def test_malformed_value_names_line_and_column(tmp_path):
    row = FULL_ROW.replace("0.5;39.0", "oops;39.0")
    with pytest.raises(NowcastParseError, match=r"line 2, column 3 \(LONCEN\)"):
        parse_nowcast(write(tmp_path, [row]))


def test_half_blank_forecast_pair_rejected(tmp_path):
    row = FULL_ROW.rsplit(";", 2)[0] + ";;39.12"
    with pytest.raises(NowcastParseError, match="half blank"):
        parse_nowcast(write(tmp_path, [row]))


def test_bad_filename_rejected(tmp_path):
    path = tmp_path / "whatever.csv"
    path.write_text(HEADER_LINE + "\n", encoding="utf-8")
    with pytest.raises(NowcastParseError, match="filename"):
        parse_nowcast(path)


def test_round_trip_identity(tmp_path):
    original = parse_nowcast(write(tmp_path, [FULL_ROW]))
    cell = original.cells[0]
    shifted = StormCellObservation(
        id=2, pixels=77, center=(1.23456789, 38.87654321), radius=5.5,
        west=1.0, east=1.5, south=38.5, north=39.25, heading=359.99, speed=0.0,
        center_forecasts=(cell.center_forecasts[0], None, None, None, None, None))
    nowcast = NowcastFile(issue_time=original.issue_time,
                          cells=(cell, shifted))
    out_dir = tmp_path / "rt"
    path = serialize_nowcast(nowcast, out_dir)
    again = parse_nowcast(path)
    assert again == nowcast
    # Twice through the writer is byte-stable too.
    text1 = path.read_text()
    serialize_nowcast(again, out_dir)
    assert path.read_text() == text1


def test_observation_invariants():
    with pytest.raises(SchemaViolationError):
        StormCellObservation(id=1, pixels=0, center=(0.0, 39.0), radius=1.0,
                             west=-1.0, east=1.0, south=38.0, north=40.0,
                             heading=0.0, speed=1.0)
    with pytest.raises(SchemaViolationError):
        StormCellObservation(id=1, pixels=5, center=(0.0, 39.0), radius=1.0,
                             west=-1.0, east=1.0, south=38.0, north=40.0,
                             heading=360.0, speed=1.0)
