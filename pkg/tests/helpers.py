"""Shared test utilities: trace builders and independent oracles.

The oracles here deliberately re-derive results from first principles
(direct scans, explicit dummy matrices, plain threshold checks) so the
library implementations are checked against a second, unrelated route.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from thermokit.ffp import COOLING_DAY, DR_AFTERNOON, HEATING_NIGHT, FFPSegment, in_window
from thermokit.ingest import HouseTrace, TraceRecord
from thermokit.thermal_id import ThermalParams


def make_trace(
    start: datetime,
    n: int,
    interval_s: int = 300,
    heat: float | list[float] = 0.0,
    cool: float | list[float] = 0.0,
    outdoor: float | list[float] = 40.0,
    thermostat: float | list[float | None] = 68.0,
    sensors: list[list[float | None]] | None = None,
    heat_setpoint: float = 68.0,
    cool_setpoint: float = 72.0,
    house_id: str = "h",
    skip_indices: set[int] | None = None,
) -> HouseTrace:
    """Build a trace from scalars or per-record lists; skip_indices makes gaps."""

    def at(value, i):
        return value[i] if isinstance(value, list) else value

    records = []
    for i in range(n):
        if skip_indices and i in skip_indices:
            continue
        records.append(
            TraceRecord(
                timestamp=start + timedelta(seconds=i * interval_s),
                control_temp=at(thermostat, i),
                cool_setpoint=cool_setpoint,
                heat_setpoint=heat_setpoint,
                outdoor_temp=at(outdoor, i),
                heat_runtimes=(at(heat, i),),
                cool_runtimes=(at(cool, i),),
                thermostat_temp=at(thermostat, i),
                sensor_temps=tuple(at(s, i) for s in sensors) if sensors else (),
            )
        )
    return HouseTrace(house_id=house_id, records=records, interval_seconds=interval_s)


# --------------------------------------------------------------- ffp oracle

_WINDOWS = {HEATING_NIGHT: (22, 7), COOLING_DAY: (10, 17), DR_AFTERNOON: (12, 17)}


def rescan_segment(trace: HouseTrace, segment: FFPSegment) -> list[str]:
    """Independently re-check every constraint of a segment against the raw
    trace. Returns a list of violations (empty means the segment is valid)."""
    violations: list[str] = []
    records = [r for r in trace.records if segment.start <= r.timestamp <= segment.end]
    if not records:
        return ["segment covers no trace records"]
    span_s = (records[-1].timestamp - records[0].timestamp).total_seconds()
    if span_s < 3600:
        violations.append(f"duration {span_s} s under one hour")
    win_start, win_end = _WINDOWS[segment.mode]
    previous = None
    temps = []
    for r in records:
        if r.heat_seconds != 0 or r.cool_seconds != 0:
            violations.append(f"runtime inside segment at {r.timestamp}")
        if not in_window(r.timestamp.hour, win_start, win_end):
            violations.append(f"{r.timestamp} outside the {segment.mode} window")
        temp = r.thermostat_temp if segment.sensor_index == 0 else r.sensor_temps[segment.sensor_index - 1]
        if temp is None or r.outdoor_temp is None:
            violations.append(f"absent reading at {r.timestamp}")
            continue
        temps.append(temp)
        if segment.mode == HEATING_NIGHT and not r.outdoor_temp < temp:
            violations.append(f"outdoor not below indoor at {r.timestamp}")
        if segment.mode in (COOLING_DAY, DR_AFTERNOON) and not r.outdoor_temp > temp:
            violations.append(f"outdoor not above indoor at {r.timestamp}")
        if previous is not None:
            gap = (r.timestamp - previous).total_seconds()
            if gap > 2 * trace.interval_seconds:
                violations.append(f"gap of {gap} s before {r.timestamp}")
        previous = r.timestamp
    if temps:
        net = temps[-1] - temps[0]
        if segment.mode == HEATING_NIGHT and not net <= -2.0:
            violations.append(f"net change {net:.3f} F is not a 2 F drop")
        if segment.mode == COOLING_DAY and not net >= 2.0:
            violations.append(f"net change {net:.3f} F is not a 2 F rise")
    return violations


def random_trace(rng: np.random.Generator, house_id: str = "h") -> HouseTrace:
    """A short randomized trace stressing the extractor: random runtimes,
    random outdoor/indoor ordering, occasional gaps and absent readings."""
    n_days = int(rng.integers(1, 4))
    interval = 300
    start = datetime(2017, int(rng.integers(1, 13)), int(rng.integers(1, 28)))
    records = []
    n = n_days * 288
    indoor = 68.0 + rng.normal(0, 1)
    for i in range(n):
        if rng.random() < 0.03:
            continue  # gap
        ts = start + timedelta(seconds=i * interval)
        hvac_off = rng.random() < 0.6
        heat = 0.0 if hvac_off else float(rng.uniform(0, 300))
        cool = 0.0 if hvac_off or heat > 0 else float(rng.uniform(0, 300))
        if rng.random() < 0.02:
            indoor = 68.0 + rng.normal(0, 3)
        indoor += float(rng.normal(0, 0.3))
        outdoor = indoor + float(rng.normal(0, 8))
        sensor = None if rng.random() < 0.05 else indoor + float(rng.normal(0, 2))
        records.append(
            TraceRecord(
                timestamp=ts,
                outdoor_temp=None if rng.random() < 0.03 else outdoor,
                heat_runtimes=(heat,),
                cool_runtimes=(cool,),
                thermostat_temp=None if rng.random() < 0.05 else indoor,
                sensor_temps=(sensor,),
                heat_setpoint=68.0,
                cool_setpoint=72.0,
            )
        )
    return HouseTrace(house_id=house_id, records=records, interval_seconds=interval)


# ------------------------------------------------------------ panel oracle


def lsdv_fit(y, X, house, hour, month, cluster_codes):
    """Explicit dummy-variable least squares with a brute-force cluster
    sandwich; returns (beta, se) for the X block."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape

    def dummies(codes, drop_first):
        codes = np.asarray(codes)
        levels = np.unique(codes)
        D = (codes[:, None] == levels[None, :]).astype(float)
        return D[:, 1:] if drop_first else D

    D = np.column_stack(
        [dummies(house, False), dummies(hour, True), dummies(month, True)]
    )
    Xf = np.column_stack([X, D])
    beta_full, *_ = np.linalg.lstsq(Xf, y, rcond=None)
    resid = y - Xf @ beta_full

    bread = np.linalg.pinv(Xf.T @ Xf)
    levels = np.unique(cluster_codes)
    meat = np.zeros((Xf.shape[1], Xf.shape[1]))
    for g in levels:
        mask = cluster_codes == g
        score = Xf[mask].T @ resid[mask]
        meat += np.outer(score, score)
    G = len(levels)
    k_params = Xf.shape[1]
    c = (G / (G - 1)) * ((n - 1) / (n - k_params))
    V = c * bread @ meat @ bread
    return beta_full[:k], np.sqrt(np.diag(V)[:k])


# -------------------------------------------------------- deficiency oracle


def brute_force_flags(rooms: list[ThermalParams]) -> dict[int, dict[str, bool]]:
    """Direct threshold check: for each category, enumerate rooms and test
    the one-standard-deviation rule explicitly."""
    rules = {
        "low_solar_gain": (lambda p: p.rq_f, "below"),
        "high_solar_gain": (lambda p: p.rq_f, "above"),
        "low_heating_input": (lambda p: p.rk_f, "below"),
        "poor_insulation": (lambda p: p.rc_heating_hours, "below"),
    }
    out: dict[int, dict[str, bool]] = {p.sensor_index: {} for p in rooms}
    for category, (get, side) in rules.items():
        values = [(p.sensor_index, get(p)) for p in rooms if get(p) is not None]
        if len(values) < 3:
            continue
        data = [v for _, v in values]
        mu = sum(data) / len(data)
        sigma = (sum((v - mu) ** 2 for v in data) / len(data)) ** 0.5
        for sensor, v in values:
            if side == "below":
                out[sensor][category] = v < mu - sigma
            else:
                out[sensor][category] = v > mu + sigma
    return out
