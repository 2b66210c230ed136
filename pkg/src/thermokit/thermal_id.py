"""Gray-box thermal parameter identification.

Fits the exponential-relaxation model to free-floating periods (RC alone in
the heating season, RC and RQ jointly in the cooling season), aggregates
heating nights for the balance-point method (RK from the slope of duty
cycle against indoor-outdoor difference), and applies the two-pass outlier
filters: an RMSE cut at 1 F, then a two-standard-deviation trim.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import linregress

from .errors import (
    FitError,
    InsufficientDataError,
    NoDecaySignalError,
    NonPhysicalFitError,
)
from .ffp import COOLING_DAY, DR_AFTERNOON, HEATING_NIGHT, FFPSegment
from .ingest import HouseTrace

logger = logging.getLogger(__name__)

RC_BOUNDS_HOURS = (0.1, 500.0)
RQ_BOUNDS_F = (-20.0, 20.0)
RC_INITIAL_HOURS = 12.0
RQ_INITIAL_F = 2.0
RMSE_LIMIT_F = 1.0
Z_LIMIT = 2.0
R_VALUE_MIN = 0.7
MIN_BALANCE_NIGHTS = 10
_SOLVER_TOL = 1e-14
_MAX_NFEV = 5000

NIGHT_START_HOUR = 22
NIGHT_END_HOUR = 7


@dataclass(frozen=True)
class RcFit:
    """Exponential-relaxation fit for one segment (or a per-sensor median)."""

    house_id: str
    sensor_index: int
    mode: str  # heating | cooling
    rc_hours: float
    rq_f: float | None
    rmse_f: float
    segments_used: int = 1


@dataclass(frozen=True)
class RkFit:
    house_id: str
    sensor_index: int
    rk_f: float
    r_value: float
    nights_used: int


@dataclass(frozen=True)
class NightAggregate:
    """One qualifying heating night: duty cycle plus mean temperatures."""

    night_of: date
    duty_cycle: float
    indoor_mean_f: float
    outdoor_mean_f: float
    n_records: int = 0


@dataclass(frozen=True)
class ThermalParams:
    """Identified parameters for one (house, room)."""

    house_id: str
    sensor_index: int
    rc_heating_hours: float | None = None
    rc_cooling_hours: float | None = None
    rq_f: float | None = None
    rk_f: float | None = None


def _segment_arrays(segment: FFPSegment) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(segment.elapsed_hours, dtype=float)
    y = np.asarray(segment.temps_f, dtype=float)
    return t, y


def _rmse(y: np.ndarray, fitted: np.ndarray) -> float:
    return float(np.sqrt(np.mean((y - fitted) ** 2)))


def fit_rc_heating(segment: FFPSegment) -> RcFit:
    """Fit the thermal time constant to a heating-night segment.

    The initial gap above outdoor is fixed from the first sample and the
    outdoor temperature is held at the segment mean, leaving RC as the only
    parameter. Requires at least 4 samples and a positive initial gap.
    """
    t, y = _segment_arrays(segment)
    if t.size < 4:
        raise InsufficientDataError(f"heating fit needs >= 4 samples, got {t.size}")
    t_out = segment.mean_outdoor_f
    theta0 = y[0] - t_out
    if theta0 <= 0:
        raise NoDecaySignalError(
            f"initial indoor-outdoor gap {theta0:.3f} F is not positive; no decay signal"
        )

    def model(tt: np.ndarray, rc: float) -> np.ndarray:
        return t_out + theta0 * np.exp(-tt / rc)

    p0 = _log_linear_rc_guess(t, y - t_out) or RC_INITIAL_HOURS
    try:
        params, _ = curve_fit(
            model,
            t,
            y,
            p0=(p0,),
            bounds=((RC_BOUNDS_HOURS[0],), (RC_BOUNDS_HOURS[1],)),
            xtol=_SOLVER_TOL,
            ftol=_SOLVER_TOL,
            gtol=_SOLVER_TOL,
            max_nfev=_MAX_NFEV,
        )
    except RuntimeError as exc:
        raise FitError(f"heating RC fit did not converge: {exc}") from exc
    rc = float(params[0])
    return RcFit(
        house_id=segment.house_id,
        sensor_index=segment.sensor_index,
        mode="heating",
        rc_hours=rc,
        rq_f=None,
        rmse_f=_rmse(y, model(t, rc)),
    )


def _log_linear_rc_guess(t: np.ndarray, theta: np.ndarray) -> float | None:
    """Starting value from the log-linear form of the decay; None if unusable."""
    mask = theta > 0
    if mask.sum() < 2:
        return None
    slope = np.polyfit(t[mask], np.log(theta[mask]), 1)[0]
    if slope >= 0:
        return None
    return float(np.clip(-1.0 / slope, *RC_BOUNDS_HOURS))


def fit_rc_rq_cooling(segment: FFPSegment) -> RcFit:
    """Jointly fit RC and the solar/internal gain offset RQ to a cooling
    segment. The initial indoor temperature is fixed from the first sample;
    requires at least 5 samples (parameters + 3)."""
    t, y = _segment_arrays(segment)
    if t.size < 5:
        raise InsufficientDataError(f"cooling fit needs >= 5 samples, got {t.size}")
    t_out = segment.mean_outdoor_f
    y0 = y[0]

    def model(tt: np.ndarray, rc: float, rq: float) -> np.ndarray:
        return t_out + rq + (y0 - t_out - rq) * np.exp(-tt / rc)

    try:
        params, _ = curve_fit(
            model,
            t,
            y,
            p0=(RC_INITIAL_HOURS, RQ_INITIAL_F),
            bounds=(
                (RC_BOUNDS_HOURS[0], RQ_BOUNDS_F[0]),
                (RC_BOUNDS_HOURS[1], RQ_BOUNDS_F[1]),
            ),
            xtol=_SOLVER_TOL,
            ftol=_SOLVER_TOL,
            gtol=_SOLVER_TOL,
            max_nfev=_MAX_NFEV,
        )
    except RuntimeError as exc:
        raise FitError(f"cooling RC/RQ fit did not converge: {exc}") from exc
    rc, rq = float(params[0]), float(params[1])
    return RcFit(
        house_id=segment.house_id,
        sensor_index=segment.sensor_index,
        mode="cooling",
        rc_hours=rc,
        rq_f=rq,
        rmse_f=_rmse(y, model(t, rc, rq)),
    )


def fit_segment(segment: FFPSegment) -> RcFit:
    """Dispatch to the right fitter for the segment's extraction mode."""
    if segment.mode == HEATING_NIGHT:
        return fit_rc_heating(segment)
    if segment.mode in (COOLING_DAY, DR_AFTERNOON):
        return fit_rc_rq_cooling(segment)
    raise FitError(f"no fitter for segment mode {segment.mode!r}")


def filter_fits(
    fits: Sequence[RcFit],
    param: str = "rc",
    group_key: Callable[[RcFit], object] | None = None,
    rmse_limit_f: float = RMSE_LIMIT_F,
    z_limit: float = Z_LIMIT,
    min_group: int = 3,
) -> list[RcFit]:
    """Two-pass outlier filter: drop fits with RMSE above the limit, then
    drop fits whose parameter falls outside mean +/- z_limit * std of the
    surviving group. Groups smaller than ``min_group`` after the RMSE pass
    are dropped entirely with a warning. Default grouping pools the full
    population per season mode.
    """
    if param not in ("rc", "rq"):
        raise ValueError(f"unknown filter parameter {param!r}")
    key = group_key or (lambda f: f.mode)
    value = (lambda f: f.rc_hours) if param == "rc" else (lambda f: f.rq_f)

    survivors = [f for f in fits if f.rmse_f <= rmse_limit_f]
    groups: dict[object, list[RcFit]] = {}
    for f in survivors:
        if value(f) is None:
            continue
        groups.setdefault(key(f), []).append(f)

    kept: list[RcFit] = []
    for gkey, members in groups.items():
        if len(members) < min_group:
            logger.warning(
                "filter_fits: group %r has %d fits after the RMSE pass (< %d); dropped",
                gkey,
                len(members),
                min_group,
            )
            continue
        values = np.array([value(f) for f in members], dtype=float)
        mu = float(np.mean(values))
        sigma = float(np.std(values))
        for f, v in zip(members, values):
            if abs(v - mu) <= z_limit * sigma:
                kept.append(f)
    order = {id(f): i for i, f in enumerate(fits)}
    kept.sort(key=lambda f: order[id(f)])
    return kept


def nightly_aggregate(trace: HouseTrace, sensor_index: int) -> list[NightAggregate]:
    """Aggregate qualifying heating nights (10 p.m.-7 a.m.) for one sensor.

    A night qualifies when heating ran at least once, no cooling ran, and
    both the sensor and outdoor temperatures have present readings. The duty
    cycle is combined-stage heating seconds over the observed night seconds.
    """
    cols = trace.columns()
    if not 0 <= sensor_index < cols.n_sensors:
        raise InsufficientDataError(f"sensor index {sensor_index} out of range")
    in_night = (cols.hour >= NIGHT_START_HOUR) | (cols.hour < NIGHT_END_HOUR)
    if not np.any(in_night):
        return []
    # key each record to the evening its night belongs to
    night_key = (cols.epoch - NIGHT_END_HOUR * 3600) // 86400
    temp = cols.sensors[sensor_index]

    out: list[NightAggregate] = []
    idx = np.flatnonzero(in_night)
    keys = night_key[idx]
    for k in np.unique(keys):
        sel = idx[keys == k]
        heat_total = float(np.sum(cols.heat_seconds[sel]))
        cool_total = float(np.sum(cols.cool_seconds[sel]))
        if heat_total <= 0 or cool_total > 0:
            continue
        t_in = temp[sel]
        t_out = cols.outdoor[sel]
        if np.all(np.isnan(t_in)) or np.all(np.isnan(t_out)):
            continue
        observed = len(sel) * trace.interval_seconds
        out.append(
            NightAggregate(
                night_of=date(1970, 1, 1) + timedelta(days=int(k)),
                duty_cycle=heat_total / observed,
                indoor_mean_f=float(np.nanmean(t_in)),
                outdoor_mean_f=float(np.nanmean(t_out)),
                n_records=len(sel),
            )
        )
    return out


def fit_rk_balance(
    nights: Sequence[NightAggregate],
    house_id: str = "",
    sensor_index: int = 0,
    min_nights: int = MIN_BALANCE_NIGHTS,
) -> RkFit:
    """Balance-point regression of nightly duty cycle on the indoor-outdoor
    difference. RK is the reciprocal slope; the intercept is estimated but
    discarded. Non-positive slopes are rejected as non-physical."""
    if len(nights) < min_nights:
        raise InsufficientDataError(
            f"balance-point fit needs >= {min_nights} nights, got {len(nights)}"
        )
    x = np.array([n.indoor_mean_f - n.outdoor_mean_f for n in nights], dtype=float)
    y = np.array([n.duty_cycle for n in nights], dtype=float)
    if np.ptp(x) == 0:
        raise InsufficientDataError("zero variance in the indoor-outdoor difference")
    result = linregress(x, y)
    if not math.isfinite(result.slope) or result.slope <= 0:
        raise NonPhysicalFitError(f"balance-point slope {result.slope!r} is not positive")
    return RkFit(
        house_id=house_id,
        sensor_index=sensor_index,
        rk_f=1.0 / float(result.slope),
        r_value=float(result.rvalue),
        nights_used=len(nights),
    )


def filter_rk_fits(
    fits: Sequence[RkFit],
    r_value_min: float = R_VALUE_MIN,
    z_limit: float = Z_LIMIT,
    min_group: int = 3,
) -> list[RkFit]:
    """Two-step RK filter: drop fits with correlation below the floor, then
    trim beyond z_limit standard deviations of the surviving population."""
    survivors = [f for f in fits if f.r_value >= r_value_min]
    if len(survivors) < min_group:
        if survivors and len(fits) >= min_group:
            logger.warning(
                "filter_rk_fits: only %d fits survive the r-value pass; std trim skipped",
                len(survivors),
            )
        return survivors
    values = np.array([f.rk_f for f in survivors], dtype=float)
    mu = float(np.mean(values))
    sigma = float(np.std(values))
    return [f for f, v in zip(survivors, values) if abs(v - mu) <= z_limit * sigma]


def collect_thermal_params(
    rc_fits: Iterable[RcFit], rk_fits: Iterable[RkFit]
) -> list[ThermalParams]:
    """Combine surviving per-segment fits into one parameter set per room.

    Each room's value is the median of its surviving per-segment estimates,
    which is robust to a single anomalous night.
    """
    by_room: dict[tuple[str, int], dict[str, list[float]]] = {}

    def bucket(house: str, sensor: int) -> dict[str, list[float]]:
        return by_room.setdefault((house, sensor), {"rc_h": [], "rc_c": [], "rq": [], "rk": []})

    for f in rc_fits:
        b = bucket(f.house_id, f.sensor_index)
        if f.mode == "heating":
            b["rc_h"].append(f.rc_hours)
        else:
            b["rc_c"].append(f.rc_hours)
            if f.rq_f is not None:
                b["rq"].append(f.rq_f)
    for f in rk_fits:
        bucket(f.house_id, f.sensor_index)["rk"].append(f.rk_f)

    out: list[ThermalParams] = []
    for (house, sensor) in sorted(by_room):
        b = by_room[(house, sensor)]
        out.append(
            ThermalParams(
                house_id=house,
                sensor_index=sensor,
                rc_heating_hours=statistics.median(b["rc_h"]) if b["rc_h"] else None,
                rc_cooling_hours=statistics.median(b["rc_c"]) if b["rc_c"] else None,
                rq_f=statistics.median(b["rq"]) if b["rq"] else None,
                rk_f=statistics.median(b["rk"]) if b["rk"] else None,
            )
        )
    return out
