"""Trace and metadata ingestion.

Parses delimiter-separated thermostat exports into validated in-memory
records, resamples them to hourly resolution, segments heating/cooling
seasons, and summarizes metadata penetration. Timestamps are local
wall-clock and are never shifted; gaps are preserved, not interpolated.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    MissingColumnError,
    ParseError,
)

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL_SECONDS = 300
HEATING = "heating"
COOLING = "cooling"
COMFORT_EXCLUSIVE = "comfort-exclusive"
PARAMID_SPAN = "paramid-span"

# Months excluded from the paramid-span eligibility window, per mode.
_EXCLUDED_MONTHS = {HEATING: (6, 7, 8), COOLING: (12, 1, 2)}

_NA_TOKENS = {"", "na", "nan", "null", "none"}

_TIMESTAMP_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M")

_EPOCH = datetime(1970, 1, 1)


@dataclass(slots=True)
class TraceRecord:
    """One thermostat export row at the base sampling interval."""

    timestamp: datetime
    control_temp: float | None = None
    cool_setpoint: float | None = None
    heat_setpoint: float | None = None
    outdoor_temp: float | None = None
    heat_runtimes: tuple[float, ...] = ()
    cool_runtimes: tuple[float, ...] = ()
    thermostat_temp: float | None = None
    sensor_temps: tuple[float | None, ...] = ()
    motion_flags: tuple[bool | None, ...] = ()

    @property
    def heat_seconds(self) -> float:
        return sum(self.heat_runtimes)

    @property
    def cool_seconds(self) -> float:
        return sum(self.cool_runtimes)


class TraceColumns:
    """Column-oriented numpy view of a trace, built once per trace.

    Absent temperatures are NaN. ``sensors`` is shaped (n_sensors, n_records)
    where row 0 is the thermostat probe and rows 1.. are the remote sensors.
    """

    def __init__(self, trace: "HouseTrace"):
        recs = trace.records
        n = len(recs)
        # wall-clock seconds since a fixed naive origin; no time-zone involved
        self.epoch = np.fromiter(
            (int((r.timestamp - _EPOCH).total_seconds()) for r in recs),
            dtype=np.int64,
            count=n,
        )
        self.heat_seconds = np.fromiter((r.heat_seconds for r in recs), dtype=float, count=n)
        self.cool_seconds = np.fromiter((r.cool_seconds for r in recs), dtype=float, count=n)

        def col(getter) -> np.ndarray:
            out = np.full(n, np.nan)
            for i, r in enumerate(recs):
                v = getter(r)
                if v is not None:
                    out[i] = v
            return out

        self.outdoor = col(lambda r: r.outdoor_temp)
        self.control = col(lambda r: r.control_temp)
        self.heat_setpoint = col(lambda r: r.heat_setpoint)
        self.cool_setpoint = col(lambda r: r.cool_setpoint)
        n_remote = max((len(r.sensor_temps) for r in recs), default=0)
        self.sensors = np.full((1 + n_remote, n), np.nan)
        for i, r in enumerate(recs):
            if r.thermostat_temp is not None:
                self.sensors[0, i] = r.thermostat_temp
            for k, v in enumerate(r.sensor_temps):
                if v is not None:
                    self.sensors[1 + k, i] = v
        self.hour = np.fromiter((r.timestamp.hour for r in recs), dtype=np.int64, count=n)
        self.month = np.fromiter((r.timestamp.month for r in recs), dtype=np.int64, count=n)

    @property
    def n_sensors(self) -> int:
        return self.sensors.shape[0]


@dataclass
class HouseTrace:
    """Time-ordered records for one house at a constant base interval."""

    house_id: str
    records: list[TraceRecord]
    interval_seconds: int
    _columns: TraceColumns | None = field(default=None, repr=False, compare=False)

    def columns(self) -> TraceColumns:
        if self._columns is None:
            self._columns = TraceColumns(self)
        return self._columns

    @property
    def n_sensors(self) -> int:
        return self.columns().n_sensors

    def slice(self, start: datetime, end: datetime) -> "HouseTrace":
        """Sub-trace with records in [start, end] inclusive."""
        recs = [r for r in self.records if start <= r.timestamp <= end]
        return HouseTrace(self.house_id, recs, self.interval_seconds)


@dataclass(slots=True)
class HourlyRecord:
    """One hour of aggregated trace data.

    Runtimes are summed over stages and sub-intervals and clamped to one
    hour; temperatures are means over present readings. ``sensor_count`` is
    the number of remote sensors with at least one present reading in the
    hour (the thermostat probe does not count).
    """

    hour_start: datetime
    heat_seconds: float
    cool_seconds: float
    outdoor_temp: float | None
    control_temp: float | None
    thermostat_temp: float | None
    sensor_temps: tuple[float | None, ...]
    sensor_count: int
    n_records: int
    coverage: float


@dataclass(frozen=True, slots=True)
class SeasonWindow:
    mode: str  # heating | cooling
    start: datetime
    end: datetime
    definition: str  # comfort-exclusive | paramid-span


@dataclass(slots=True)
class HouseMetadata:
    house_id: str
    num_remote_sensors: int
    floor_area: float | None = None
    num_occupants: int | None = None
    num_floors: int | None = None
    state_code: str | None = None
    eco_plus_enrolled: bool | None = None
    eco_plus_slider: int | None = None


@dataclass
class ColumnMapping:
    """Names the file columns carrying each trace field.

    Keys absent from the mapping are simply not ingested; keys present must
    exist in the file header. ``timestamp`` is always required.
    """

    timestamp: str = "timestamp"
    control_temp: str | None = None
    cool_setpoint: str | None = None
    heat_setpoint: str | None = None
    outdoor_temp: str | None = None
    thermostat_temp: str | None = None
    heat_runtimes: tuple[str, ...] = ()
    cool_runtimes: tuple[str, ...] = ()
    sensor_temps: tuple[str, ...] = ()
    motion_flags: tuple[str, ...] = ()
    delimiter: str = ","
    temperature_unit: str = "F"

    def to_dict(self) -> dict:
        out: dict = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or v == ():
                continue
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ColumnMapping":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown mapping keys: {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("heat_runtimes", "cool_runtimes", "sensor_temps", "motion_flags"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "ColumnMapping":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read mapping {path}: {exc}") from exc
        return cls.from_dict(raw)


def canonical_mapping(n_sensors: int, n_heat_stages: int = 1, n_cool_stages: int = 1) -> ColumnMapping:
    """Mapping for the toolkit's own trace CSV schema (also emitted by synth)."""
    return ColumnMapping(
        timestamp="timestamp",
        control_temp="control_temp",
        cool_setpoint="cool_setpoint",
        heat_setpoint="heat_setpoint",
        outdoor_temp="outdoor_temp",
        thermostat_temp="thermostat_temp",
        heat_runtimes=tuple(f"heat_stage{i + 1}" for i in range(n_heat_stages)),
        cool_runtimes=tuple(f"cool_stage{i + 1}" for i in range(n_cool_stages)),
        sensor_temps=tuple(f"sensor{i + 1}_temp" for i in range(n_sensors)),
    )


def _parse_timestamp(cell: str, row: int) -> datetime:
    cell = cell.strip()
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        pass
    for fmt in _TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(cell, fmt)
        except ValueError:
            continue
    raise ParseError(f"unparsable timestamp {cell!r}", row=row)


def _parse_float(cell: str, column: str, row: int) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        if cell.strip().lower() in _NA_TOKENS:
            return None
        raise ParseError(f"unparsable numeric cell {cell!r} in column {column!r}", row=row)
    if math.isnan(value):
        return None
    if math.isinf(value):
        raise ParseError(f"non-finite value in column {column!r}", row=row)
    return value


def _parse_bool(cell: str, column: str, row: int) -> bool | None:
    cell = cell.strip().lower()
    if cell in _NA_TOKENS:
        return None
    if cell in ("1", "true", "yes", "t", "y"):
        return True
    if cell in ("0", "false", "no", "f", "n"):
        return False
    raise ParseError(f"unparsable boolean cell {cell!r} in column {column!r}", row=row)


def _infer_interval(timestamps: Sequence[datetime]) -> int:
    if len(timestamps) < 2:
        return DEFAULT_INTERVAL_SECONDS
    diffs = Counter(
        int((b - a).total_seconds()) for a, b in zip(timestamps, timestamps[1:])
    )
    diffs.pop(0, None)
    if not diffs:
        return DEFAULT_INTERVAL_SECONDS
    top = max(diffs.values())
    # modal spacing; ties broken toward the smallest (a gap is a multiple)
    return min(s for s, c in diffs.items() if c == top)


def parse_trace(
    source: bytes | str | Path,
    mapping: ColumnMapping,
    house_id: str = "",
) -> HouseTrace:
    """Parse a delimiter-separated trace file into a HouseTrace.

    ``source`` may be raw bytes, raw text, or a path. Records are sorted by
    timestamp; duplicated timestamps keep the first occurrence and a warning
    is emitted. The base interval is inferred from the modal spacing.
    """
    if isinstance(source, Path):
        text = source.read_text()
        house_id = house_id or source.stem
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = source
    reader = csv.reader(io.StringIO(text), delimiter=mapping.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty trace file")
    index = {name.strip(): i for i, name in enumerate(header)}

    def require(name: str) -> int:
        if name not in index:
            raise MissingColumnError(f"column {name!r} named in the mapping is missing from the header")
        return index[name]

    ts_col = require(mapping.timestamp)
    scalar_cols = {
        key: require(name)
        for key, name in (
            ("control_temp", mapping.control_temp),
            ("cool_setpoint", mapping.cool_setpoint),
            ("heat_setpoint", mapping.heat_setpoint),
            ("outdoor_temp", mapping.outdoor_temp),
            ("thermostat_temp", mapping.thermostat_temp),
        )
        if name is not None
    }
    heat_cols = [require(n) for n in mapping.heat_runtimes]
    cool_cols = [require(n) for n in mapping.cool_runtimes]
    sensor_cols = [require(n) for n in mapping.sensor_temps]
    motion_cols = [require(n) for n in mapping.motion_flags]

    records: list[TraceRecord] = []
    for row_idx, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue

        def cell(col: int) -> str:
            return row[col] if col < len(row) else ""

        ts = _parse_timestamp(cell(ts_col), row_idx)
        values = {
            key: _parse_float(cell(col), header[col], row_idx)
            for key, col in scalar_cols.items()
        }
        # absent runtime cells mean the equipment did not run
        heat = tuple(_parse_float(cell(c), header[c], row_idx) or 0.0 for c in heat_cols)
        cool = tuple(_parse_float(cell(c), header[c], row_idx) or 0.0 for c in cool_cols)
        sensors = tuple(_parse_float(cell(c), header[c], row_idx) for c in sensor_cols)
        motion = tuple(_parse_bool(cell(c), header[c], row_idx) for c in motion_cols)
        records.append(
            TraceRecord(
                timestamp=ts,
                heat_runtimes=heat,
                cool_runtimes=cool,
                sensor_temps=sensors,
                motion_flags=motion,
                **values,
            )
        )
    if not records:
        raise DataError("trace file contains no data rows")

    records.sort(key=lambda r: r.timestamp)
    deduped: list[TraceRecord] = [records[0]]
    dropped = 0
    for rec in records[1:]:
        if rec.timestamp == deduped[-1].timestamp:
            dropped += 1
            continue
        deduped.append(rec)
    if dropped:
        logger.warning("%s: dropped %d duplicate-timestamp rows", house_id or "trace", dropped)

    interval = _infer_interval([r.timestamp for r in deduped])
    for i, rec in enumerate(deduped):
        for rt in rec.heat_runtimes + rec.cool_runtimes:
            if not 0.0 <= rt <= interval:
                raise DataError(
                    f"runtime {rt} s outside [0, {interval}] at {rec.timestamp} (record {i})"
                )
    return HouseTrace(house_id=house_id, records=deduped, interval_seconds=interval)


def _format_float(value: float | None) -> str:
    if value is None:
        return ""
    return repr(value)


def write_trace(trace: HouseTrace, path: str | Path, mapping: ColumnMapping | None = None) -> None:
    """Serialize a trace to the canonical CSV schema.

    Floats are written with shortest round-trip precision so that
    parse -> write -> parse is the identity.
    """
    n_remote = max((len(r.sensor_temps) for r in trace.records), default=0)
    n_heat = max((len(r.heat_runtimes) for r in trace.records), default=0)
    n_cool = max((len(r.cool_runtimes) for r in trace.records), default=0)
    mapping = mapping or canonical_mapping(n_remote, n_heat or 1, n_cool or 1)
    header = [mapping.timestamp]
    for name in (
        mapping.control_temp,
        mapping.cool_setpoint,
        mapping.heat_setpoint,
        mapping.outdoor_temp,
        mapping.thermostat_temp,
    ):
        if name is not None:
            header.append(name)
    header += list(mapping.heat_runtimes) + list(mapping.cool_runtimes) + list(mapping.sensor_temps)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=mapping.delimiter, lineterminator="\n")
        writer.writerow(header)
        for r in trace.records:
            row = [r.timestamp.strftime("%Y-%m-%d %H:%M:%S")]
            for name, value in (
                (mapping.control_temp, r.control_temp),
                (mapping.cool_setpoint, r.cool_setpoint),
                (mapping.heat_setpoint, r.heat_setpoint),
                (mapping.outdoor_temp, r.outdoor_temp),
                (mapping.thermostat_temp, r.thermostat_temp),
            ):
                if name is not None:
                    row.append(_format_float(value))
            for i in range(len(mapping.heat_runtimes)):
                row.append(_format_float(r.heat_runtimes[i] if i < len(r.heat_runtimes) else 0.0))
            for i in range(len(mapping.cool_runtimes)):
                row.append(_format_float(r.cool_runtimes[i] if i < len(r.cool_runtimes) else 0.0))
            for i in range(len(mapping.sensor_temps)):
                row.append(_format_float(r.sensor_temps[i] if i < len(r.sensor_temps) else None))
            writer.writerow(row)


def resample_hourly(trace: HouseTrace) -> list[HourlyRecord]:
    """Aggregate a trace to hourly records.

    Stage runtimes are summed (multi-stage seconds combine into one metric)
    and clamped to [0, 3600]; temperatures are means over present readings.
    Hours with no records are not emitted.
    """
    if not trace.records:
        raise InsufficientDataError("cannot resample an empty trace")
    cols = trace.columns()
    hour_key = cols.epoch // 3600
    uniq, inverse = np.unique(hour_key, return_inverse=True)
    n_hours = len(uniq)
    n_rec = np.bincount(inverse, minlength=n_hours)

    def mean_present(values: np.ndarray) -> np.ndarray:
        present = ~np.isnan(values)
        sums = np.bincount(inverse, weights=np.where(present, values, 0.0), minlength=n_hours)
        counts = np.bincount(inverse, weights=present.astype(float), minlength=n_hours)
        out = np.full(n_hours, np.nan)
        np.divide(sums, counts, out=out, where=counts > 0)
        return out

    heat = np.clip(np.bincount(inverse, weights=cols.heat_seconds, minlength=n_hours), 0.0, 3600.0)
    cool = np.clip(np.bincount(inverse, weights=cols.cool_seconds, minlength=n_hours), 0.0, 3600.0)
    outdoor = mean_present(cols.outdoor)
    control = mean_present(cols.control)
    sensor_means = np.vstack([mean_present(cols.sensors[k]) for k in range(cols.n_sensors)])
    expected = 3600.0 / trace.interval_seconds

    out: list[HourlyRecord] = []
    for h in range(n_hours):
        remote = sensor_means[1:, h]
        out.append(
            HourlyRecord(
                hour_start=_EPOCH + timedelta(hours=int(uniq[h])),
                heat_seconds=float(heat[h]),
                cool_seconds=float(cool[h]),
                outdoor_temp=None if np.isnan(outdoor[h]) else float(outdoor[h]),
                control_temp=None if np.isnan(control[h]) else float(control[h]),
                thermostat_temp=None if np.isnan(sensor_means[0, h]) else float(sensor_means[0, h]),
                sensor_temps=tuple(None if np.isnan(v) else float(v) for v in remote),
                sensor_count=int(np.sum(~np.isnan(remote))),
                n_records=int(n_rec[h]),
                coverage=float(n_rec[h] / expected),
            )
        )
    return out


def segment_seasons(trace: HouseTrace, definition: str = COMFORT_EXCLUSIVE) -> list[SeasonWindow]:
    """Identify heating and cooling season windows.

    comfort-exclusive: the longest run containing activations of exactly one
    mode, trimmed to that mode's first and last activation. paramid-span:
    first-to-last activation of the mode inside its month eligibility window
    (heating excludes Jun-Aug, cooling excludes Dec-Feb).
    """
    if definition not in (COMFORT_EXCLUSIVE, PARAMID_SPAN):
        raise ConfigError(f"unknown season definition {definition!r}")
    if not trace.records:
        raise InsufficientDataError("cannot segment an empty trace")
    span = trace.records[-1].timestamp - trace.records[0].timestamp
    if span < timedelta(days=1):
        raise InsufficientDataError("season segmentation needs a trace spanning at least one day")

    cols = trace.columns()
    active = {HEATING: cols.heat_seconds > 0, COOLING: cols.cool_seconds > 0}
    windows: list[SeasonWindow] = []
    for mode in (HEATING, COOLING):
        own = active[mode]
        if definition == PARAMID_SPAN:
            eligible = ~np.isin(cols.month, _EXCLUDED_MONTHS[mode])
            idx = np.flatnonzero(own & eligible)
            if idx.size == 0:
                continue
            windows.append(
                SeasonWindow(
                    mode=mode,
                    start=trace.records[idx[0]].timestamp,
                    end=trace.records[idx[-1]].timestamp,
                    definition=definition,
                )
            )
            continue
        opp = active[COOLING if mode == HEATING else HEATING]
        best: tuple[float, int, int] | None = None
        block_start = 0
        boundaries = list(np.flatnonzero(opp)) + [len(trace.records)]
        for b in boundaries:
            idx = np.flatnonzero(own[block_start:b])
            if idx.size:
                first, last = block_start + idx[0], block_start + idx[-1]
                duration = (
                    trace.records[last].timestamp - trace.records[first].timestamp
                ).total_seconds()
                if best is None or duration > best[0]:
                    best = (duration, first, last)
            block_start = b + 1
        if best is not None:
            windows.append(
                SeasonWindow(
                    mode=mode,
                    start=trace.records[best[1]].timestamp,
                    end=trace.records[best[2]].timestamp,
                    definition=definition,
                )
            )
    return windows


def parse_metadata(source: bytes | str | Path) -> list[HouseMetadata]:
    """Parse a metadata CSV whose header uses the HouseMetadata field names."""
    if isinstance(source, Path):
        text = source.read_text()
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = source
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "house_id" not in reader.fieldnames:
        raise MissingColumnError("metadata file must carry a 'house_id' column")
    if "num_remote_sensors" not in reader.fieldnames:
        raise MissingColumnError("metadata file must carry a 'num_remote_sensors' column")
    out: list[HouseMetadata] = []
    for row_idx, row in enumerate(reader, start=1):
        def fnum(key: str) -> float | None:
            return _parse_float(row.get(key) or "", key, row_idx)

        def inum(key: str) -> int | None:
            v = fnum(key)
            return None if v is None else int(v)

        sensors = inum("num_remote_sensors")
        if sensors is None or sensors < 0:
            raise ParseError("num_remote_sensors must be a non-negative integer", row=row_idx)
        slider = inum("eco_plus_slider")
        out.append(
            HouseMetadata(
                house_id=row["house_id"],
                num_remote_sensors=sensors,
                floor_area=fnum("floor_area"),
                num_occupants=inum("num_occupants"),
                num_floors=inum("num_floors"),
                state_code=(row.get("state_code") or "").strip() or None,
                eco_plus_enrolled=_parse_bool(row.get("eco_plus_enrolled") or "", "eco_plus_enrolled", row_idx),
                eco_plus_slider=slider,
            )
        )
    return out


_OCCUPANT_BINS = ("1", "2", "3", "4", "5+")
_FLOOR_BINS = ("1", "2", "3", "4+")
_AREA_BINS = ("100-999", "1000-1999", "2000-2999", "3000-3999", "4000+")
_SENSOR_BINS = ("0", "1", "2", "3", "4", "5+")


def _sensor_bin(n: int) -> str:
    return str(n) if n < 5 else "5+"


@dataclass
class PenetrationReport:
    """Metadata roll-up: sensor penetration, eco+ participation, cross-tabs."""

    total_houses: int
    sensor_count_histogram: dict[int, int]
    sensor_count_shares: dict[int, float]
    cumulative_at_least: dict[int, float]
    at_least_one_share: float
    eco_plus_known: int
    eco_plus_enrolled: int
    eco_plus_rate: float | None
    slider_histogram: dict[int, int]
    slider_shares: dict[int, float]
    cross_tabs: dict[str, dict[str, dict[str, int]]]
    cleaning: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "total_houses": self.total_houses,
            "sensor_count_histogram": {str(k): v for k, v in sorted(self.sensor_count_histogram.items())},
            "sensor_count_shares": {str(k): v for k, v in sorted(self.sensor_count_shares.items())},
            "cumulative_at_least": {str(k): v for k, v in sorted(self.cumulative_at_least.items())},
            "at_least_one_share": self.at_least_one_share,
            "eco_plus": {
                "known": self.eco_plus_known,
                "enrolled": self.eco_plus_enrolled,
                "rate": self.eco_plus_rate,
                "slider_histogram": {str(k): v for k, v in sorted(self.slider_histogram.items())},
                "slider_shares": {str(k): v for k, v in sorted(self.slider_shares.items())},
            },
            "cross_tabs": self.cross_tabs,
            "cleaning": self.cleaning,
        }


def summarize_metadata(metadata: Sequence[HouseMetadata]) -> PenetrationReport:
    """Summarize sensor penetration and eco+ participation.

    Cleaning is applied per attribute (area >= 100 ft^2, occupants >= 1);
    a record failing one attribute's rule still counts in the others.
    """
    if not metadata:
        raise InsufficientDataError("summarize_metadata requires at least one record")
    total = len(metadata)
    hist = Counter(m.num_remote_sensors for m in metadata)
    shares = {k: v / total for k, v in hist.items()}
    cumulative: dict[int, float] = {}
    for k in sorted(hist):
        cumulative[k] = sum(v for kk, v in hist.items() if kk >= k) / total
    at_least_one = sum(v for k, v in hist.items() if k >= 1) / total

    known = [m for m in metadata if m.eco_plus_enrolled is not None]
    enrolled = [m for m in known if m.eco_plus_enrolled]
    sliders = Counter(
        m.eco_plus_slider for m in enrolled if m.eco_plus_slider is not None
    )
    slider_total = sum(sliders.values())

    def occupants_bin(m: HouseMetadata) -> str | None:
        if m.num_occupants is None or m.num_occupants < 1:
            return None
        return str(m.num_occupants) if m.num_occupants < 5 else "5+"

    def floors_bin(m: HouseMetadata) -> str | None:
        if m.num_floors is None or m.num_floors < 1:
            return None
        return str(m.num_floors) if m.num_floors < 4 else "4+"

    def area_bin(m: HouseMetadata) -> str | None:
        if m.floor_area is None or m.floor_area < 100:
            return None
        if m.floor_area >= 4000:
            return "4000+"
        lo = int(m.floor_area // 1000) * 1000
        return f"{max(lo, 100)}-{lo + 999}"

    cross_tabs: dict[str, dict[str, dict[str, int]]] = {}
    cleaning: dict[str, dict[str, int]] = {}
    for attr, binner, labels in (
        ("occupants", occupants_bin, _OCCUPANT_BINS),
        ("floors", floors_bin, _FLOOR_BINS),
        ("area", area_bin, _AREA_BINS),
    ):
        table = {label: {sb: 0 for sb in _SENSOR_BINS} for label in labels}
        excluded = 0
        for m in metadata:
            label = binner(m)
            if label is None:
                excluded += 1
                continue
            table[label][_sensor_bin(m.num_remote_sensors)] += 1
        cross_tabs[attr] = table
        cleaning[attr] = {"total": total, "excluded": excluded, "kept": total - excluded}

    return PenetrationReport(
        total_houses=total,
        sensor_count_histogram=dict(hist),
        sensor_count_shares=shares,
        cumulative_at_least=cumulative,
        at_least_one_share=at_least_one,
        eco_plus_known=len(known),
        eco_plus_enrolled=len(enrolled),
        eco_plus_rate=len(enrolled) / len(known) if known else None,
        slider_histogram=dict(sliders),
        slider_shares={k: v / slider_total for k, v in sliders.items()} if slider_total else {},
        cross_tabs=cross_tabs,
        cleaning=cleaning,
    )
