"""Reading and writing of storm-cell nowcast files.

A nowcast file is UTF-8 text, ';'-delimited, one header line, one row per
tracked storm cell. Forecast columns for horizons past the cell lifetime are
blank. The issue time is encoded in the filename as nowcast_YYYYMMDD_HHMM.csv.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import NowcastParseError, SchemaViolationError

N_HORIZONS = 6

HEADER_COLUMNS = (
    ["NUM", "NUPIX", "LONCEN", "LATCEN", "RADIOE", "LONOES", "LONEST",
     "LATSUR", "LATNOR", "DIRN", "VKMH"]
    + [f"{axis}{10 * (t + 1)}" for t in range(N_HORIZONS) for axis in ("LON", "LAT")]
)
HEADER_LINE = ";".join(HEADER_COLUMNS)

_FILENAME_RE = re.compile(r"nowcast_(\d{8})_(\d{4})\.csv$")


@dataclass(frozen=True)
class StormCellObservation:
    """One nowcast row: current cell state plus center forecasts per horizon."""

    id: int
    pixels: int
    center: tuple[float, float]  # (lon, lat) degrees
    radius: float  # effective radius, km
    west: float
    east: float
    south: float
    north: float
    heading: float  # degrees clockwise from North
    speed: float  # km/h
    # One entry per horizon 10..60 min; None where the forecast is absent.
    center_forecasts: tuple = field(default=(None,) * N_HORIZONS)

    def __post_init__(self):
        lon, lat = self.center
        if not self.south <= lat <= self.north:
            raise SchemaViolationError(
                f"cell {self.id}: latitude extremities do not bracket the center "
                f"({self.south} <= {lat} <= {self.north} fails)")
        if not self.west <= lon <= self.east:
            raise SchemaViolationError(
                f"cell {self.id}: longitude extremities do not bracket the center "
                f"({self.west} <= {lon} <= {self.east} fails)")
        if self.pixels < 1:
            raise SchemaViolationError(f"cell {self.id}: pixel count {self.pixels} < 1")
        if self.speed < 0:
            raise SchemaViolationError(f"cell {self.id}: negative speed {self.speed}")
        if not 0.0 <= self.heading < 360.0:
            raise SchemaViolationError(f"cell {self.id}: heading {self.heading} outside [0, 360)")
        if len(self.center_forecasts) != N_HORIZONS:
            raise SchemaViolationError(
                f"cell {self.id}: expected {N_HORIZONS} forecast slots")

    @property
    def n_forecasts(self) -> int:
        return sum(1 for f in self.center_forecasts if f is not None)

    def forecast(self, tau: int):
        """Forecast center (lon, lat) at horizon tau in 1..6, or None."""
        if not 1 <= tau <= N_HORIZONS:
            raise ValueError(f"horizon {tau} outside 1..{N_HORIZONS}")
        return self.center_forecasts[tau - 1]


@dataclass(frozen=True)
class NowcastFile:
    issue_time: datetime
    cells: tuple

    def __post_init__(self):
        ids = [c.id for c in self.cells]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaViolationError(f"duplicate cell IDs in nowcast: {dupes}")

    def cell(self, cell_id: int):
        for c in self.cells:
            if c.id == cell_id:
                return c
        return None


def issue_time_from_name(path) -> datetime:
    m = _FILENAME_RE.search(Path(path).name)
    if m is None:
        raise NowcastParseError(
            f"{path}: filename does not match nowcast_YYYYMMDD_HHMM.csv")
    stamp = m.group(1) + m.group(2)
    try:
        t = datetime.strptime(stamp, "%Y%m%d%H%M")
    except ValueError as exc:
        raise NowcastParseError(f"{path}: bad timestamp in filename: {exc}") from exc
    return t.replace(tzinfo=timezone.utc)


def filename_for(issue_time: datetime) -> str:
    return issue_time.strftime("nowcast_%Y%m%d_%H%M.csv")


def _field(raw: str, line_no: int, col: int, conv, kind: str):
    text = raw.strip()
    if not text:
        raise NowcastParseError(
            f"line {line_no}, column {col + 1} ({HEADER_COLUMNS[col]}): "
            f"required {kind} value is blank")
    try:
        return conv(text)
    except ValueError as exc:
        raise NowcastParseError(
            f"line {line_no}, column {col + 1} ({HEADER_COLUMNS[col]}): "
            f"cannot parse {kind} from {text!r}") from exc


def _parse_row(parts, line_no: int) -> StormCellObservation:
    if len(parts) != len(HEADER_COLUMNS):
        raise NowcastParseError(
            f"line {line_no}: expected {len(HEADER_COLUMNS)} fields, got {len(parts)}")
    forecasts = []
    for tau in range(N_HORIZONS):
        lon_raw = parts[11 + 2 * tau].strip()
        lat_raw = parts[12 + 2 * tau].strip()
        if not lon_raw and not lat_raw:
            forecasts.append(None)
        elif lon_raw and lat_raw:
            forecasts.append((
                _field(lon_raw, line_no, 11 + 2 * tau, float, "float"),
                _field(lat_raw, line_no, 12 + 2 * tau, float, "float"),
            ))
        else:
            missing = 12 + 2 * tau if not lat_raw else 11 + 2 * tau
            raise NowcastParseError(
                f"line {line_no}, column {missing + 1} ({HEADER_COLUMNS[missing]}): "
                f"forecast pair is half blank")
    try:
        return StormCellObservation(
            id=_field(parts[0], line_no, 0, int, "int"),
            pixels=_field(parts[1], line_no, 1, int, "int"),
            center=(_field(parts[2], line_no, 2, float, "float"),
                    _field(parts[3], line_no, 3, float, "float")),
            radius=_field(parts[4], line_no, 4, float, "float"),
            west=_field(parts[5], line_no, 5, float, "float"),
            east=_field(parts[6], line_no, 6, float, "float"),
            south=_field(parts[7], line_no, 7, float, "float"),
            north=_field(parts[8], line_no, 8, float, "float"),
            heading=_field(parts[9], line_no, 9, float, "float"),
            speed=_field(parts[10], line_no, 10, float, "float"),
            center_forecasts=tuple(forecasts),
        )
    except SchemaViolationError as exc:
        raise SchemaViolationError(f"line {line_no}: {exc}") from exc


def parse_nowcast(path) -> NowcastFile:
    """Parse one nowcast file; malformed rows and invariant violations raise."""
    path = Path(path)
    issue_time = issue_time_from_name(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise NowcastParseError(f"{path}: empty file")
    if lines[0].strip() != HEADER_LINE:
        raise NowcastParseError(f"{path}: header line does not match the nowcast schema")
    cells = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells.append(_parse_row(line.split(";"), line_no))
    return NowcastFile(issue_time=issue_time, cells=tuple(cells))


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def serialize_nowcast(nowcast: NowcastFile, directory) -> Path:
    """Write a nowcast under its canonical filename; returns the path written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / filename_for(nowcast.issue_time)
    rows = [HEADER_LINE]
    for c in nowcast.cells:
        parts = [_fmt(c.id), _fmt(c.pixels), _fmt(c.center[0]), _fmt(c.center[1]),
                 _fmt(c.radius), _fmt(c.west), _fmt(c.east), _fmt(c.south),
                 _fmt(c.north), _fmt(c.heading), _fmt(c.speed)]
        for fc in c.center_forecasts:
            if fc is None:
                parts += ["", ""]
            else:
                parts += [_fmt(fc[0]), _fmt(fc[1])]
        rows.append(";".join(parts))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
