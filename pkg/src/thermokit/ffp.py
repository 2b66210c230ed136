"""Free-floating period extraction.

A free-floating period is a maximal run of records with zero heating and
cooling runtime inside a mode-specific clock window, during which the
sensor of focus relaxes toward the outdoor temperature. Three constraint
sets are supported:

* heating-night: 10 p.m.-7 a.m., outdoor below indoor throughout, net
  temperature drop of at least 2 F across the run.
* cooling-day: 10 a.m.-5 p.m., outdoor above indoor throughout, net rise
  of at least 2 F.
* dr-afternoon: 12 p.m.-5 p.m., outdoor above indoor throughout, no
  amplitude requirement (stands in for a demand-response curtailment).

All runs must last at least one hour and contain no sampling gap larger
than twice the base interval. A run is cut at the first violated
record-level constraint and extraction resumes after it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import DataError
from .ingest import HouseTrace

HEATING_NIGHT = "heating-night"
COOLING_DAY = "cooling-day"
DR_AFTERNOON = "dr-afternoon"
MODES = (HEATING_NIGHT, COOLING_DAY, DR_AFTERNOON)

MIN_DURATION_SECONDS = 3600
AMPLITUDE_F = 2.0
MAX_GAP_FACTOR = 2.0

# (window start hour, window end hour, outdoor side, signed amplitude or None)
_MODE_RULES = {
    HEATING_NIGHT: (22, 7, "below", -AMPLITUDE_F),
    COOLING_DAY: (10, 17, "above", +AMPLITUDE_F),
    DR_AFTERNOON: (12, 17, "above", None),
}


@dataclass(frozen=True)
class FFPSegment:
    """One free-floating interval for one sensor, with elapsed-hour samples."""

    house_id: str
    sensor_index: int  # 0 = thermostat probe
    mode: str
    start: datetime
    end: datetime
    elapsed_hours: tuple[float, ...]
    temps_f: tuple[float, ...]
    mean_outdoor_f: float
    initial_temp_f: float

    @property
    def duration_hours(self) -> float:
        return self.elapsed_hours[-1]

    @property
    def n_samples(self) -> int:
        return len(self.elapsed_hours)


def in_window(hour: int, start: int, end: int) -> bool:
    """Half-open clock window [start, end), wrapping past midnight."""
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end


def extract_ffps(trace: HouseTrace, sensor_index: int, mode: str) -> list[FFPSegment]:
    """Extract all free-floating periods for one sensor under one mode."""
    if mode not in _MODE_RULES:
        raise DataError(f"unknown ffp mode {mode!r}")
    cols = trace.columns()
    if not 0 <= sensor_index < cols.n_sensors:
        raise DataError(f"sensor index {sensor_index} out of range (trace has {cols.n_sensors})")
    win_start, win_end, side, amplitude = _MODE_RULES[mode]

    temp = cols.sensors[sensor_index]
    hvac_off = (cols.heat_seconds == 0) & (cols.cool_seconds == 0)
    if win_start <= win_end:
        windowed = (cols.hour >= win_start) & (cols.hour < win_end)
    else:
        windowed = (cols.hour >= win_start) | (cols.hour < win_end)
    present = ~np.isnan(temp) & ~np.isnan(cols.outdoor)
    ordering = (cols.outdoor < temp) if side == "below" else (cols.outdoor > temp)
    eligible = hvac_off & windowed & present & ordering

    max_gap = MAX_GAP_FACTOR * trace.interval_seconds
    segments: list[FFPSegment] = []
    run: list[int] = []

    def close(run_idx: list[int]) -> None:
        if len(run_idx) < 2:
            return
        first, last = run_idx[0], run_idx[-1]
        span = cols.epoch[last] - cols.epoch[first]
        if span < MIN_DURATION_SECONDS:
            return
        net = temp[last] - temp[first]
        if amplitude is not None:
            if amplitude < 0 and net > amplitude:
                return
            if amplitude > 0 and net < amplitude:
                return
        elapsed = (cols.epoch[run_idx] - cols.epoch[first]) / 3600.0
        segments.append(
            FFPSegment(
                house_id=trace.house_id,
                sensor_index=sensor_index,
                mode=mode,
                start=trace.records[first].timestamp,
                end=trace.records[last].timestamp,
                elapsed_hours=tuple(float(e) for e in elapsed),
                temps_f=tuple(float(t) for t in temp[run_idx]),
                mean_outdoor_f=float(np.mean(cols.outdoor[run_idx])),
                initial_temp_f=float(temp[first]),
            )
        )

    for i in np.flatnonzero(eligible):
        # contiguity: no ineligible record in between, and any missing-data
        # gap at most twice the base interval
        if run and (i != run[-1] + 1 or cols.epoch[i] - cols.epoch[run[-1]] > max_gap):
            close(run)
            run = []
        run.append(int(i))
    close(run)
    return segments


SEGMENT_CSV_HEADER = (
    "house_id",
    "sensor_index",
    "mode",
    "start",
    "end",
    "n_samples",
    "mean_outdoor_f",
    "initial_temp_f",
    "samples_json",
)


def segment_to_row(segment: FFPSegment) -> list[str]:
    payload = json.dumps(
        [[h, t] for h, t in zip(segment.elapsed_hours, segment.temps_f)],
        separators=(",", ":"),
    )
    return [
        segment.house_id,
        str(segment.sensor_index),
        segment.mode,
        segment.start.strftime("%Y-%m-%d %H:%M:%S"),
        segment.end.strftime("%Y-%m-%d %H:%M:%S"),
        str(segment.n_samples),
        repr(segment.mean_outdoor_f),
        repr(segment.initial_temp_f),
        payload,
    ]


def segment_from_row(row: Sequence[str]) -> FFPSegment:
    samples = json.loads(row[8])
    return FFPSegment(
        house_id=row[0],
        sensor_index=int(row[1]),
        mode=row[2],
        start=datetime.strptime(row[3], "%Y-%m-%d %H:%M:%S"),
        end=datetime.strptime(row[4], "%Y-%m-%d %H:%M:%S"),
        elapsed_hours=tuple(h for h, _ in samples),
        temps_f=tuple(t for _, t in samples),
        mean_outdoor_f=float(row[6]),
        initial_temp_f=float(row[7]),
    )
