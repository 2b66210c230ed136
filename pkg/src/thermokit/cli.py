"""Command-line pipeline.

Subcommands mirror the analysis stages (ingest, comfort, ffp, identify,
deficiency, panel, synth, all). Stages communicate through on-disk
artifacts under the output directory, so any stage can be rerun in
isolation. Outputs are deterministic: rerunning a stage on identical
inputs and configuration produces byte-identical files.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
failure, 3 numerical failure (a diagnostics file is written).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, asdict
from datetime import datetime
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from . import __version__
from . import comfort as comfort_mod
from . import deficiency as deficiency_mod
from . import ffp as ffp_mod
from . import panel as panel_mod
from . import synth as synth_mod
from . import thermal_id
from .errors import ConfigError, DataError, NumericalError, ThermokitError
from .ingest import (
    COMFORT_EXCLUSIVE,
    COOLING,
    HEATING,
    PARAMID_SPAN,
    ColumnMapping,
    HouseTrace,
    SeasonWindow,
    canonical_mapping,
    parse_metadata,
    parse_trace,
    resample_hourly,
    segment_seasons,
    summarize_metadata,
    write_trace,
)
from .report import (
    TABLE_SCHEMAS,
    config_hash,
    jsonable,
    summary_row,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

_TIME_FMT = "%Y-%m-%d %H:%M:%S"

STAGES = ("ingest", "comfort", "ffp", "identify", "deficiency", "panel")


@dataclass
class RunConfig:
    """Resolved run configuration; flags win over the config file."""

    input_dir: str | None = None
    metadata: str | None = None
    mapping: str | None = None
    out: str = "out"
    season_def: str = "comfort"
    bin_width: float = 1.0
    comfort_c: float = 2.0
    model: str = "base"
    outcome: str = "combined"
    seed: int = 0
    jobs: int = 1
    houses: int = 6
    days: int = 365
    noise: float = 0.0

    def comfort_definition(self) -> str:
        return COMFORT_EXCLUSIVE if self.season_def == "comfort" else PARAMID_SPAN


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value document mirroring the flag names."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig()
    for field_ in RunConfig.__dataclass_fields__.values():
        name = field_.name
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            setattr(cfg, name, flag_value)
        elif name in file_cfg:
            raw = file_cfg[name]
            current = getattr(cfg, name)
            if isinstance(current, bool):
                setattr(cfg, name, raw.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(cfg, name, int(raw))
            elif isinstance(current, float):
                setattr(cfg, name, float(raw))
            else:
                setattr(cfg, name, raw)
    unknown = set(file_cfg) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg.season_def not in ("comfort", "paramid"):
        raise ConfigError(f"--season-def must be comfort or paramid, got {cfg.season_def!r}")
    if cfg.model not in ("base", "seasonal"):
        raise ConfigError(f"--model must be base or seasonal, got {cfg.model!r}")
    if cfg.outcome not in ("cool", "heat", "combined"):
        raise ConfigError(f"--outcome must be cool, heat or combined, got {cfg.outcome!r}")
    if cfg.bin_width <= 0:
        raise ConfigError("--bin-width must be positive")
    if cfg.comfort_c < 0:
        raise ConfigError("--comfort-c must be non-negative")
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return cfg


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    """Order-preserving map, optionally over a process pool."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_manifest(stage_dir: Path, cfg: RunConfig, counts: dict[str, int]) -> None:
    payload = {
        "config": asdict(cfg),
        "config_sha256": config_hash(asdict(cfg)),
        "versions": {
            "thermokit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "row_counts": counts,
    }
    write_json(stage_dir / "manifest.json", payload)


def _stage_dir(cfg: RunConfig, stage: str) -> Path:
    path = Path(cfg.out) / stage
    path.mkdir(parents=True, exist_ok=True)
    return path


# ----------------------------------------------------------------- ingest


@dataclass
class _ParseTask:
    path: str
    mapping_dict: dict


def _parse_one(task: _ParseTask) -> HouseTrace:
    return parse_trace(Path(task.path), ColumnMapping.from_dict(task.mapping_dict))


def _load_input_traces(cfg: RunConfig) -> list[HouseTrace]:
    if not cfg.input_dir:
        raise ConfigError("--input is required for this stage")
    if not cfg.mapping:
        raise ConfigError("--mapping is required for this stage")
    input_dir = Path(cfg.input_dir)
    if not input_dir.is_dir():
        raise ConfigError(f"--input {input_dir} is not a directory")
    mapping = ColumnMapping.load(cfg.mapping)
    paths = sorted(input_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no .csv trace files under {input_dir}")
    tasks = [_ParseTask(str(p), mapping.to_dict()) for p in paths]
    return _pmap(_parse_one, tasks, cfg.jobs)


def _window_json(w: SeasonWindow) -> dict:
    return {
        "mode": w.mode,
        "start": w.start.strftime(_TIME_FMT),
        "end": w.end.strftime(_TIME_FMT),
        "definition": w.definition,
    }


def stage_ingest(cfg: RunConfig) -> list[HouseTrace]:
    out = _stage_dir(cfg, "ingest")
    traces = _load_input_traces(cfg)
    (out / "traces").mkdir(exist_ok=True)
    seasons: dict[str, dict[str, dict]] = {}
    n_records = 0
    max_remote = 0
    for trace in traces:
        n_records += len(trace.records)
        max_remote = max(max_remote, trace.n_sensors - 1)
        write_trace(trace, out / "traces" / f"{trace.house_id}.csv")
        entry: dict[str, dict] = {}
        for definition in (COMFORT_EXCLUSIVE, PARAMID_SPAN):
            for window in segment_seasons(trace, definition):
                entry.setdefault(definition, {})[window.mode] = _window_json(window)
        seasons[trace.house_id] = entry
    write_json(out / "seasons.json", seasons)

    counts = {"houses": len(traces), "records": n_records}
    if cfg.metadata:
        metadata = parse_metadata(Path(cfg.metadata))
        report = summarize_metadata(metadata)
        write_json(out / "penetration.json", report.to_dict())
        write_csv(
            out / "penetration.csv",
            ("num_remote_sensors", "houses", "share", "share_at_least"),
            [
                (k, report.sensor_count_histogram[k], report.sensor_count_shares[k],
                 report.cumulative_at_least[k])
                for k in sorted(report.sensor_count_histogram)
            ],
        )
        counts["metadata_rows"] = len(metadata)
    _write_manifest(out, cfg, counts)
    return traces


def _read_normalized(cfg: RunConfig) -> list[HouseTrace]:
    traces_dir = Path(cfg.out) / "ingest" / "traces"
    if not traces_dir.is_dir():
        raise DataError(f"{traces_dir} missing; run the ingest stage first")
    paths = sorted(traces_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no normalized traces under {traces_dir}")
    n_sensors = 0
    for p in paths:
        with p.open() as fh:
            header = fh.readline().strip().split(",")
        n_sensors = max(n_sensors, sum(1 for c in header if c.startswith("sensor")))
    mapping = canonical_mapping(n_sensors)
    tasks = [_ParseTask(str(p), mapping.to_dict()) for p in paths]
    return _pmap(_parse_one, tasks, cfg.jobs)


def _read_seasons(cfg: RunConfig) -> dict:
    path = Path(cfg.out) / "ingest" / "seasons.json"
    if not path.exists():
        raise DataError(f"{path} missing; run the ingest stage first")
    return json.loads(path.read_text())


def _season_window(seasons: dict, house_id: str, definition: str, mode: str) -> tuple[datetime, datetime] | None:
    entry = seasons.get(house_id, {}).get(definition, {}).get(mode)
    if entry is None:
        return None
    return (
        datetime.strptime(entry["start"], _TIME_FMT),
        datetime.strptime(entry["end"], _TIME_FMT),
    )


# ----------------------------------------------------------------- comfort


def _room_labels(trace: HouseTrace) -> list[str]:
    return ["thermostat"] + [f"sensor{k}" for k in range(1, trace.n_sensors)]


def _season_room_report(
    trace: HouseTrace, mode: str, window: tuple[datetime, datetime], cfg: RunConfig
) -> dict | None:
    sliced = trace.slice(*window)
    if not sliced.records:
        return None
    cols = sliced.columns()
    setpoint = cols.heat_setpoint if mode == HEATING else cols.cool_setpoint
    labels = _room_labels(trace)
    rooms: dict[str, dict] = {}
    room_series: dict[str, list[float | None]] = {}
    for k, label in enumerate(labels):
        temps = cols.sensors[k]
        room_series[label] = [None if np.isnan(v) else float(v) for v in temps]
        dev = temps - setpoint
        dev = dev[~np.isnan(dev)]
        if dev.size == 0:
            continue
        hist = comfort_mod.rf_histogram(dev.tolist(), bin_width_f=cfg.bin_width)
        entry = {
            "n_samples": hist.total_samples,
            "analysis_bound_f": hist.analysis_bound_f,
            "histogram": {str(x): r for x, r in sorted(hist.bins.items())},
            "coi": comfort_mod.coi(hist, cfg.comfort_c),
        }
        if mode == COOLING:
            entry["cci"] = comfort_mod.cci(hist)
        rooms[label] = entry
    if not rooms:
        return None
    sp_list = [None if np.isnan(v) else float(v) for v in setpoint]
    report: dict = {"rooms": rooms}
    try:
        stats_sp = comfort_mod.deviation_stats(room_series, "setpoint", sp_list)
        stats_ca = comfort_mod.deviation_stats(room_series, "control-average")
        report["deviation_stats"] = {
            "setpoint": _deviation_json(stats_sp),
            "control-average": _deviation_json(stats_ca),
        }
    except ThermokitError:
        pass
    return report


def _deviation_json(stats: comfort_mod.DeviationStats) -> dict:
    return {
        "coldest_room": stats.coldest_room,
        "hottest_room": stats.hottest_room,
        "per_room": {
            room: asdict(s) for room, s in sorted(stats.per_room.items())
        },
    }


def _house_dr_report(trace: HouseTrace, window: tuple[datetime, datetime], cfg: RunConfig) -> dict | None:
    """Per-house DR summary from thermostat-defined curtailment-like events.

    Events are the thermostat probe's afternoon free-floating periods; rooms
    are compared over each event and averaged per room across events.
    """
    sliced = trace.slice(*window)
    if len(sliced.records) == 0 or trace.n_sensors < 2:
        return None
    events = ffp_mod.extract_ffps(sliced, 0, ffp_mod.DR_AFTERNOON)
    if not events:
        return None
    labels = _room_labels(trace)
    cdrd_samples: dict[str, list[float]] = {label: [] for label in labels}
    dev_samples: dict[str, list[float]] = {label: [] for label in labels}
    n_used = 0
    for event in events:
        ev = trace.slice(event.start, event.end)
        cols = ev.columns()
        times = [r.timestamp for r in ev.records]
        series = {
            label: [None if np.isnan(v) else float(v) for v in cols.sensors[k]]
            for k, label in enumerate(labels)
            if not np.all(np.isnan(cols.sensors[k]))
        }
        if len(series) < 2:
            continue
        summary = comfort_mod.dr_comfort_summary(times, series)
        n_used += 1
        for room, minutes in summary.cdrd_minutes.items():
            if minutes is not None:
                cdrd_samples[room].append(minutes)
        for room, dev in summary.max_deviation_f.items():
            dev_samples[room].append(dev)
    if n_used == 0:
        return None
    mean_cdrd = {
        room: (sum(v) / len(v) if v else None) for room, v in cdrd_samples.items()
    }
    mean_dev = {room: (sum(v) / len(v) if v else None) for room, v in dev_samples.items()}
    uncensored = {r: m for r, m in mean_cdrd.items() if m is not None}
    devs = {r: d for r, d in mean_dev.items() if d is not None}
    report: dict = {
        "n_events": n_used,
        "mean_cdrd_minutes": mean_cdrd,
        "mean_max_deviation_f": mean_dev,
    }
    if uncensored:
        fast = min(uncensored, key=lambda r: (uncensored[r], r))
        slow = max(uncensored, key=lambda r: (uncensored[r], r))
        report.update(
            fast_room=fast,
            slow_room=slow,
            fast_cdrd_minutes=uncensored[fast],
            slow_cdrd_minutes=uncensored[slow],
            thermostat_cdrd_minutes=uncensored.get("thermostat"),
            comfort_gap_minutes=uncensored[slow] - uncensored[fast],
        )
    if devs:
        report.update(
            min_deviation_f=min(devs.values()),
            max_deviation_f=max(devs.values()),
            thermostat_deviation_f=devs.get("thermostat"),
            comfort_gap_deviation_f=max(devs.values()) - min(devs.values()),
        )
    return report


def stage_comfort(cfg: RunConfig, traces: list[HouseTrace] | None = None) -> None:
    out = _stage_dir(cfg, "comfort")
    traces = traces if traces is not None else _read_normalized(cfg)
    seasons = _read_seasons(cfg)
    definition = cfg.comfort_definition()

    houses: dict[str, dict] = {}
    room_rows: list[tuple] = []
    for trace in traces:
        house: dict = {}
        for mode in (HEATING, COOLING):
            window = _season_window(seasons, trace.house_id, definition, mode)
            if window is None:
                continue
            report = _season_room_report(trace, mode, window, cfg)
            if report is None:
                continue
            house[mode] = report
            for room, entry in report["rooms"].items():
                room_rows.append(
                    (
                        trace.house_id,
                        mode,
                        room,
                        entry["coi"],
                        entry.get("cci"),
                        entry["n_samples"],
                    )
                )
        dr_window = _season_window(seasons, trace.house_id, definition, COOLING)
        if dr_window is not None:
            dr = _house_dr_report(trace, dr_window, cfg)
            if dr is not None:
                house["dr"] = dr
        if house:
            houses[trace.house_id] = house

    write_json(out / "houses.json", houses)
    write_csv(
        out / "comfort_rooms.csv",
        ("house_id", "season", "room", "coi", "cci", "n_samples"),
        sorted(room_rows),
    )
    _write_table1(out, houses)
    _write_table2(out, houses)
    _write_table3(out, houses)
    _write_manifest(out, cfg, {"houses": len(houses), "room_rows": len(room_rows)})


def _write_table1(out: Path, houses: dict) -> None:
    metrics: dict[tuple[str, str, str], list[float]] = {}
    for house in houses.values():
        dr = house.get("dr")
        if not dr:
            continue
        pairs = (
            ("fast_reacting_rooms", "duration", "min", dr.get("fast_cdrd_minutes")),
            ("slow_reacting_rooms", "duration", "min", dr.get("slow_cdrd_minutes")),
            ("thermostat", "duration", "min", dr.get("thermostat_cdrd_minutes")),
            ("comfort_gap", "duration", "min", dr.get("comfort_gap_minutes")),
            ("least_varying_rooms", "deviation", "F", dr.get("min_deviation_f")),
            ("most_varying_rooms", "deviation", "F", dr.get("max_deviation_f")),
            ("thermostat", "deviation", "F", dr.get("thermostat_deviation_f")),
            ("comfort_gap", "deviation", "F", dr.get("comfort_gap_deviation_f")),
        )
        for group, metric, unit, value in pairs:
            if value is not None:
                metrics.setdefault((group, metric, unit), []).append(value)
    order = [
        ("fast_reacting_rooms", "duration", "min"),
        ("slow_reacting_rooms", "duration", "min"),
        ("thermostat", "duration", "min"),
        ("comfort_gap", "duration", "min"),
        ("least_varying_rooms", "deviation", "F"),
        ("most_varying_rooms", "deviation", "F"),
        ("thermostat", "deviation", "F"),
        ("comfort_gap", "deviation", "F"),
    ]
    rows = [key + tuple(summary_row(metrics.get(key, []))) for key in order]
    write_csv(out / "table1_dr_comfort.csv", TABLE_SCHEMAS["table1_dr_comfort"], rows)


def _write_table2(out: Path, houses: dict) -> None:
    thermostat, lowest, highest = [], [], []
    for house in houses.values():
        season = house.get(COOLING)
        if not season:
            continue
        ccis = {
            room: entry["cci"]
            for room, entry in season["rooms"].items()
            if entry.get("cci") is not None
        }
        if len(ccis) < 2 or "thermostat" not in ccis:
            continue
        thermostat.append(ccis["thermostat"])
        lowest.append(min(ccis.values()))
        highest.append(max(ccis.values()))
    rows = [
        ("thermostat_room_comfort", *summary_row(thermostat)),
        ("lowest_room_comfort", *summary_row(lowest)),
        ("highest_room_comfort", *summary_row(highest)),
    ]
    write_csv(out / "table2_cci_extremes.csv", TABLE_SCHEMAS["table2_cci_extremes"], rows)


def _write_table3(out: Path, houses: dict) -> None:
    rows = []
    for season in (COOLING, HEATING):
        for reference in ("setpoint", "control-average"):
            coldest: list[float] = []
            hottest: list[float] = []
            for house in houses.values():
                stats = house.get(season, {}).get("deviation_stats", {}).get(reference)
                if not stats:
                    continue
                per_room = stats["per_room"]
                coldest.append(per_room[stats["coldest_room"]]["mean"])
                hottest.append(per_room[stats["hottest_room"]]["mean"])
            for room_type, values in (("coldest_room", coldest), ("hottest_room", hottest)):
                arr = np.asarray(values, dtype=float)
                rows.append(
                    (
                        season,
                        reference,
                        room_type,
                        float(np.mean(arr)) if arr.size else None,
                        float(np.std(arr)) if arr.size else None,
                        int(arr.size),
                    )
                )
    write_csv(
        out / "table3_deviation_extremes.csv",
        TABLE_SCHEMAS["table3_deviation_extremes"],
        rows,
    )


# ----------------------------------------------------------------- ffp


@dataclass
class _FfpTask:
    trace: HouseTrace
    windows: dict[str, tuple[datetime, datetime] | None]


def _extract_house(task: _FfpTask) -> list[ffp_mod.FFPSegment]:
    segments: list[ffp_mod.FFPSegment] = []
    for mode in ffp_mod.MODES:
        window = task.windows.get(mode)
        if window is None:
            continue
        sliced = task.trace.slice(*window)
        if not sliced.records:
            continue
        for sensor in range(task.trace.n_sensors):
            segments.extend(ffp_mod.extract_ffps(sliced, sensor, mode))
    return segments


def stage_ffp(cfg: RunConfig, traces: list[HouseTrace] | None = None) -> None:
    out = _stage_dir(cfg, "ffp")
    traces = traces if traces is not None else _read_normalized(cfg)
    seasons = _read_seasons(cfg)
    tasks = []
    for trace in traces:
        windows = {
            ffp_mod.HEATING_NIGHT: _season_window(seasons, trace.house_id, PARAMID_SPAN, HEATING),
            ffp_mod.COOLING_DAY: _season_window(seasons, trace.house_id, PARAMID_SPAN, COOLING),
            ffp_mod.DR_AFTERNOON: _season_window(
                seasons, trace.house_id, cfg.comfort_definition(), COOLING
            ),
        }
        tasks.append(_FfpTask(trace=trace, windows=windows))
    all_segments: list[ffp_mod.FFPSegment] = []
    for segments in _pmap(_extract_house, tasks, cfg.jobs):
        all_segments.extend(segments)
    all_segments.sort(key=lambda s: (s.house_id, s.sensor_index, s.mode, s.start))
    with open(out / "segments.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ffp_mod.SEGMENT_CSV_HEADER)
        for seg in all_segments:
            writer.writerow(ffp_mod.segment_to_row(seg))
    _write_manifest(out, cfg, {"segments": len(all_segments)})


def _read_segments(cfg: RunConfig) -> list[ffp_mod.FFPSegment]:
    path = Path(cfg.out) / "ffp" / "segments.csv"
    if not path.exists():
        raise DataError(f"{path} missing; run the ffp stage first")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [ffp_mod.segment_from_row(row) for row in reader]


# ----------------------------------------------------------------- identify


def _fit_segment_safe(segment: ffp_mod.FFPSegment) -> thermal_id.RcFit | None:
    try:
        return thermal_id.fit_segment(segment)
    except ThermokitError as exc:
        logger.info(
            "fit skipped for %s sensor %d %s @ %s: %s",
            segment.house_id,
            segment.sensor_index,
            segment.mode,
            segment.start,
            exc,
        )
        return None


@dataclass
class _RkTask:
    trace: HouseTrace
    window: tuple[datetime, datetime] | None


def _rk_house(task: _RkTask) -> list[thermal_id.RkFit]:
    if task.window is None:
        return []
    sliced = task.trace.slice(*task.window)
    if not sliced.records:
        return []
    fits: list[thermal_id.RkFit] = []
    for sensor in range(task.trace.n_sensors):
        nights = thermal_id.nightly_aggregate(sliced, sensor)
        try:
            fits.append(
                thermal_id.fit_rk_balance(nights, house_id=task.trace.house_id, sensor_index=sensor)
            )
        except ThermokitError as exc:
            logger.info("rk fit skipped for %s sensor %d: %s", task.trace.house_id, sensor, exc)
    return fits


def stage_identify(cfg: RunConfig, traces: list[HouseTrace] | None = None) -> None:
    out = _stage_dir(cfg, "identify")
    segments = [s for s in _read_segments(cfg) if s.mode != ffp_mod.DR_AFTERNOON]
    fits = [f for f in _pmap(_fit_segment_safe, segments, cfg.jobs) if f is not None]

    heating = [f for f in fits if f.mode == "heating"]
    cooling = [f for f in fits if f.mode == "cooling"]
    kept_heating = thermal_id.filter_fits(heating, param="rc")
    kept_cooling = thermal_id.filter_fits(cooling, param="rc")
    kept_cooling = thermal_id.filter_fits(kept_cooling, param="rq")
    kept_ids = {id(f) for f in kept_heating} | {id(f) for f in kept_cooling}

    traces = traces if traces is not None else _read_normalized(cfg)
    seasons = _read_seasons(cfg)
    rk_tasks = [
        _RkTask(trace=t, window=_season_window(seasons, t.house_id, PARAMID_SPAN, HEATING))
        for t in traces
    ]
    rk_fits: list[thermal_id.RkFit] = []
    for fit_list in _pmap(_rk_house, rk_tasks, cfg.jobs):
        rk_fits.extend(fit_list)
    kept_rk = thermal_id.filter_rk_fits(rk_fits)
    kept_rk_ids = {id(f) for f in kept_rk}

    # "filtered" is true when the outlier filters removed the fit
    fit_rows = []
    for f in sorted(fits, key=lambda f: (f.house_id, f.sensor_index, f.mode)):
        fit_rows.append(
            (
                f.house_id,
                f.sensor_index,
                f.mode,
                f.rc_hours,
                f.rq_f,
                None,
                f.rmse_f,
                None,
                f.segments_used,
                None,
                id(f) not in kept_ids,
            )
        )
    for f in sorted(rk_fits, key=lambda f: (f.house_id, f.sensor_index)):
        fit_rows.append(
            (
                f.house_id,
                f.sensor_index,
                "heating",
                None,
                None,
                f.rk_f,
                None,
                f.r_value,
                None,
                f.nights_used,
                id(f) not in kept_rk_ids,
            )
        )
    write_csv(
        out / "fits.csv",
        (
            "house_id",
            "sensor",
            "season",
            "RC_hours",
            "RQ_F",
            "RK_F",
            "rmse",
            "r_value",
            "n_segments",
            "n_nights",
            "filtered",
        ),
        fit_rows,
    )

    params = thermal_id.collect_thermal_params(kept_heating + kept_cooling, kept_rk)
    write_csv(
        out / "params.csv",
        ("house_id", "sensor", "rc_heating_hours", "rc_cooling_hours", "rq_f", "rk_f"),
        [
            (p.house_id, p.sensor_index, p.rc_heating_hours, p.rc_cooling_hours, p.rq_f, p.rk_f)
            for p in params
        ],
    )
    _write_manifest(
        out,
        cfg,
        {
            "segments_fit": len(fits),
            "rc_fits_kept": len(kept_heating) + len(kept_cooling),
            "rk_fits": len(rk_fits),
            "rk_fits_kept": len(kept_rk),
            "rooms_with_params": len(params),
        },
    )


def _read_params(cfg: RunConfig) -> list[thermal_id.ThermalParams]:
    path = Path(cfg.out) / "identify" / "params.csv"
    if not path.exists():
        raise DataError(f"{path} missing; run the identify stage first")
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def opt(key: str) -> float | None:
                return float(row[key]) if row[key] else None

            out.append(
                thermal_id.ThermalParams(
                    house_id=row["house_id"],
                    sensor_index=int(row["sensor"]),
                    rc_heating_hours=opt("rc_heating_hours"),
                    rc_cooling_hours=opt("rc_cooling_hours"),
                    rq_f=opt("rq_f"),
                    rk_f=opt("rk_f"),
                )
            )
    return out


# ----------------------------------------------------------------- deficiency


def stage_deficiency(cfg: RunConfig) -> None:
    out = _stage_dir(cfg, "deficiency")
    params = _read_params(cfg)
    by_house: dict[str, list[thermal_id.ThermalParams]] = {}
    for p in params:
        by_house.setdefault(p.house_id, []).append(p)
    reports = []
    report_json: dict[str, dict] = {}
    for house_id in sorted(by_house):
        report = deficiency_mod.classify_house(by_house[house_id])
        reports.append(report)
        report_json[house_id] = {
            "rooms": {str(k): flags.as_dict() for k, flags in sorted(report.rooms.items())},
            "category_counts": report.category_counts,
            "skipped_categories": report.skipped_categories,
        }
    write_json(out / "reports.json", report_json)

    rollup = deficiency_mod.deficiency_rollup(reports)
    rows = []
    for category in deficiency_mod.CATEGORIES:
        r = rollup[category]
        rows.append(
            (
                category,
                r.houses_evaluated,
                r.one_room,
                r.pct(r.one_room),
                r.two_rooms,
                r.pct(r.two_rooms),
                r.total,
                r.pct(r.total),
            )
        )
    write_csv(out / "table4_deficiencies.csv", TABLE_SCHEMAS["table4_deficiencies"], rows)

    rep = deficiency_mod.representativeness(params)
    rep_rows = []
    for name in ("rc_hours", "rk_f", "rq_f"):
        entry = rep.per_parameter.get(name)
        if entry is None:
            rep_rows.append((name, None, None, None, None, None, None, 0))
            continue
        s = entry.stats
        rep_rows.append(
            (name, s.mean, s.median, s.std, s.min, s.max, entry.coefficient_of_variation_pct, s.n)
        )
    write_csv(
        out / "table5_representativeness.csv",
        TABLE_SCHEMAS["table5_representativeness"],
        rep_rows,
    )
    _write_manifest(out, cfg, {"houses": len(reports), "rooms": len(params)})


# ----------------------------------------------------------------- panel


def _regression_json(result: panel_mod.RegressionResult) -> dict:
    return {
        "model": result.model,
        "outcome": result.outcome,
        "n_obs": result.n_obs,
        "n_clusters": result.n_clusters,
        "fe_levels": result.fe_levels,
        "degenerate_dims": list(result.degenerate_dims),
        "k_params": result.k_params,
        "rank": result.rank,
        "terms": [
            {
                "term": term,
                "estimate": est,
                "std_error": se,
                "t_value": t,
                "p_value": p,
                "signif": panel_mod.significance_code(p),
            }
            for term, est, se, t, p in zip(
                result.terms,
                result.estimates,
                result.std_errors,
                result.t_values,
                result.p_values,
            )
        ],
    }


def _result_rows(result: panel_mod.RegressionResult, with_outcome: bool) -> list[tuple]:
    rows = []
    for term, est, se, t, p in zip(
        result.terms, result.estimates, result.std_errors, result.t_values, result.p_values
    ):
        base = (term, est, se, t, p, panel_mod.significance_code(p))
        rows.append(((result.outcome,) + base) if with_outcome else base)
    return rows


def _effects_json(summary: panel_mod.EffectSummary) -> dict:
    return {
        "model": summary.model,
        "outcome": summary.outcome,
        "effects": [asdict(e) for e in summary.effects],
        "pairwise_pct_changes": [asdict(p) for p in summary.pairwise],
    }


def stage_panel(cfg: RunConfig, full: bool = False, traces: list[HouseTrace] | None = None) -> None:
    out = _stage_dir(cfg, "panel")
    traces = traces if traces is not None else _read_normalized(cfg)
    hourly = {t.house_id: resample_hourly(t) for t in traces}
    build = panel_mod.build_panel(hourly)
    write_csv(
        out / "panel.csv",
        (
            "house_id",
            "timestamp",
            "hour",
            "month",
            "season",
            "dc_cool",
            "dc_heat",
            "dc_combined",
            "outdoor_f",
            "sensor_count",
        ),
        [
            (
                r.house_id,
                r.timestamp.strftime(_TIME_FMT),
                r.hour,
                r.month,
                r.season,
                r.dc_cool,
                r.dc_heat,
                r.dc_combined,
                r.outdoor_f,
                r.sensor_count,
            )
            for r in build.rows
        ],
    )

    counts = {"rows": len(build.rows), "dropped_no_outdoor": build.dropped_no_outdoor}
    if full:
        combined = panel_mod.fit_fe_model(build.rows, "base", "combined")
        write_json(out / "regression_base_combined.json", _regression_json(combined))
        write_csv(
            out / "table6_fe_combined.csv",
            TABLE_SCHEMAS["table6_fe_combined"],
            _result_rows(combined, with_outcome=False),
        )
        write_json(out / "effects_base_combined.json", _effects_json(panel_mod.effect_summary(combined)))

        rows7: list[tuple] = []
        for outcome in ("cool", "heat"):
            res = panel_mod.fit_fe_model(build.rows, "base", outcome)
            write_json(out / f"regression_base_{outcome}.json", _regression_json(res))
            rows7.extend(_result_rows(res, with_outcome=True))
        write_csv(out / "table7_fe_by_mode.csv", TABLE_SCHEMAS["table7_fe_by_mode"], rows7)

        rows8: list[tuple] = []
        for outcome in ("cool", "heat"):
            res = panel_mod.fit_fe_model(build.rows, "seasonal", outcome)
            write_json(out / f"regression_seasonal_{outcome}.json", _regression_json(res))
            rows8.extend(_result_rows(res, with_outcome=True))
        write_csv(out / "table8_fe_seasonal.csv", TABLE_SCHEMAS["table8_fe_seasonal"], rows8)
        counts["models_fit"] = 5
    else:
        result = panel_mod.fit_fe_model(build.rows, cfg.model, cfg.outcome)
        write_json(out / f"regression_{cfg.model}_{cfg.outcome}.json", _regression_json(result))
        table = "table6_fe_combined" if cfg.model == "base" else "table8_fe_seasonal"
        write_csv(
            out / f"{table}.csv",
            TABLE_SCHEMAS[table],
            _result_rows(result, with_outcome=cfg.model != "base"),
        )
        write_json(
            out / f"effects_{cfg.model}_{cfg.outcome}.json",
            _effects_json(panel_mod.effect_summary(result)),
        )
        counts["models_fit"] = 1
    _write_manifest(out, cfg, counts)


# ----------------------------------------------------------------- synth / all


def stage_synth(cfg: RunConfig) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    synth_mod.gen_dataset(
        out,
        n_houses=cfg.houses,
        n_days=cfg.days,
        seed=cfg.seed,
        noise_std_f=cfg.noise,
    )
    stage = _stage_dir(cfg, "synth")
    _write_manifest(stage, cfg, {"houses": cfg.houses, "days": cfg.days})


def run_all(cfg: RunConfig) -> None:
    # parse once; the normalized artifacts on disk are round-trip identical
    traces = stage_ingest(cfg)
    stage_comfort(cfg, traces=traces)
    stage_ffp(cfg, traces=traces)
    stage_identify(cfg, traces=traces)
    stage_deficiency(cfg)
    stage_panel(cfg, full=True, traces=traces)


# ----------------------------------------------------------------- entry


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermokit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "validate and normalize traces, segment seasons, summarize metadata"),
        ("comfort", "histograms, comfort indices, deviation stats, DR summaries"),
        ("ffp", "extract free-floating periods"),
        ("identify", "fit RC/RQ/RK and apply the outlier filters"),
        ("deficiency", "classify room deficiencies and thermostat representativeness"),
        ("panel", "build the hourly panel and fit the fixed-effects model"),
        ("synth", "generate a synthetic oracle dataset"),
        ("all", "run the full pipeline"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", dest="input_dir", help="directory of trace CSV files")
        p.add_argument("--metadata", help="metadata CSV path")
        p.add_argument("--mapping", help="column-mapping JSON path")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--season-def", dest="season_def", choices=("comfort", "paramid"),
                       help="season definition for comfort analyses")
        p.add_argument("--bin-width", dest="bin_width", type=float, help="histogram bin width, F")
        p.add_argument("--comfort-c", dest="comfort_c", type=float, help="comfort half-width, F")
        p.add_argument("--model", choices=("base", "seasonal"))
        p.add_argument("--outcome", choices=("cool", "heat", "combined"))
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker pool size for per-house work")
        p.add_argument("--config", help="flat key = value config file; flags win")
        if name == "synth":
            p.add_argument("--houses", type=int, help="synthetic houses to generate")
            p.add_argument("--days", type=int, help="days per synthetic trace")
            p.add_argument("--noise", type=float, help="synthetic temperature noise std, F")
    return parser


_STAGE_FUNCS: dict[str, Callable[[RunConfig], None]] = {
    "ingest": stage_ingest,
    "comfort": stage_comfort,
    "ffp": stage_ffp,
    "identify": stage_identify,
    "deficiency": stage_deficiency,
    "panel": lambda cfg: stage_panel(cfg, full=False),
    "synth": stage_synth,
    "all": run_all,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("THERMOKIT_LOG", "WARNING").upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        _STAGE_FUNCS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        out = Path(getattr(args, "out", None) or "out")
        out.mkdir(parents=True, exist_ok=True)
        write_json(
            out / "diagnostics.json",
            {"error": type(exc).__name__, "message": str(exc)},
        )
        print(f"numerical error: {exc} (diagnostics written to {out / 'diagnostics.json'})",
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
