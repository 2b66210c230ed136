"""Ground-truth synthetic data generation.

Every estimator in the toolkit gets a closed-loop oracle: free-floating
segments sampled from the exponential-relaxation model, balance nights
sampled from the duty-cycle line, full-year house traces that embed both,
and duty-cycle panels built from known interaction coefficients and drawn
fixed effects. All output is a pure function of the seed; per-house work
derives child seeds from the house index so parallel generation stays
deterministic.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ffp import COOLING_DAY, DR_AFTERNOON, HEATING_NIGHT, FFPSegment
from .ingest import HouseMetadata, HouseTrace, TraceRecord, canonical_mapping, write_trace
from .panel import SEASONS, PanelRow, season_of_month
from .thermal_id import NightAggregate

logger = logging.getLogger(__name__)

HEAT_SETPOINT_F = 68.0
COOL_SETPOINT_F = 72.0
IDLE_TEMP_F = 70.0
IDLE_OUTDOOR_F = 60.0

_HEATING_MONTHS = (1, 2, 3, 4, 11, 12)
_COOLING_MONTHS = (6, 7, 8, 9)

_MODE_STARTS = {HEATING_NIGHT: 22, COOLING_DAY: 10, DR_AFTERNOON: 12}
_MODE_MAX_HOURS = {HEATING_NIGHT: 9.0, COOLING_DAY: 7.0, DR_AFTERNOON: 5.0}


@dataclass(frozen=True)
class RoomTruth:
    """True thermal parameters for one room."""

    rc_heating_hours: float = 10.0
    rc_cooling_hours: float = 8.0
    rq_f: float = 3.0
    rk_f: float = 60.0


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for all generators; the seed fully determines every output."""

    seed: int = 0
    noise_std_f: float = 0.0
    interval_seconds: int = 300
    rooms: tuple[RoomTruth, ...] = (RoomTruth(),)
    # segment generation
    segment_hours: float = 7.0
    outdoor_heating_f: float = 40.0
    outdoor_cooling_f: float = 90.0
    start_temp_heating_f: float = 68.0
    start_temp_cooling_f: float = 72.0
    # balance-night generation
    n_nights: int = 50
    night_diff_range_f: tuple[float, float] = (5.0, 40.0)
    night_outdoor_base_f: float = 30.0
    # panel generation
    panel_houses: int = 20
    panel_days: int = 14
    panel_noise_std: float = 0.02
    panel_fe_scale: float = 0.02
    panel_baseline: float = 0.05
    panel_outdoor_mean_f: float = 35.0
    panel_outdoor_season_amp_f: float = 12.0
    panel_outdoor_diurnal_amp_f: float = 3.0
    panel_outdoor_noise_f: float = 1.5
    panel_switch_prob: float = 0.5


def gen_ffp_segment(config: SynthConfig, mode: str, room: int = 0) -> FFPSegment:
    """Sample one free-floating segment from the relaxation model.

    Heating segments decay toward the outdoor temperature with no gain
    offset; cooling and DR segments rise toward outdoor plus the room's gain
    offset. Noise is additive Gaussian on temperature.
    """
    if mode not in _MODE_STARTS:
        raise ConfigError(f"unknown segment mode {mode!r}")
    truth = config.rooms[room]
    hours = min(config.segment_hours, _MODE_MAX_HOURS[mode])
    n = int(hours * 3600 / config.interval_seconds) + 1
    if hours < 1.0 or n < 4:
        raise ConfigError(
            f"segment of {config.segment_hours} h at {config.interval_seconds} s "
            "implies under an hour or under 4 samples"
        )
    if mode == HEATING_NIGHT:
        t_out = config.outdoor_heating_f
        t0 = config.start_temp_heating_f
        rc, rq = truth.rc_heating_hours, 0.0
    else:
        t_out = config.outdoor_cooling_f
        t0 = config.start_temp_cooling_f
        rc, rq = truth.rc_cooling_hours, truth.rq_f

    rng = np.random.default_rng(config.seed)
    t = np.arange(n) * (config.interval_seconds / 3600.0)
    temps = t_out + rq + (t0 - t_out - rq) * np.exp(-t / rc)
    if config.noise_std_f > 0:
        temps = temps + rng.normal(0.0, config.noise_std_f, size=n)
    start = datetime(2017, 1, 15, _MODE_STARTS[mode], 0, 0)
    return FFPSegment(
        house_id="synth",
        sensor_index=room,
        mode=mode,
        start=start,
        end=start + timedelta(hours=float(t[-1])),
        elapsed_hours=tuple(float(v) for v in t),
        temps_f=tuple(float(v) for v in temps),
        mean_outdoor_f=t_out,
        initial_temp_f=float(temps[0]),
    )


def gen_balance_nights(
    config: SynthConfig,
    n_nights: int | None = None,
    diff_range_f: tuple[float, float] | None = None,
    room: int = 0,
) -> list[NightAggregate]:
    """Sample qualifying heating nights from the balance-point line.

    Indoor-outdoor differences are drawn uniformly over the range; duty
    cycles follow difference / RK plus Gaussian noise, clamped to [0, 1].
    """
    truth = config.rooms[room]
    if truth.rk_f <= 0:
        raise ConfigError("rk must be positive")
    n = config.n_nights if n_nights is None else n_nights
    lo, hi = diff_range_f or config.night_diff_range_f
    if hi < lo:
        raise ConfigError("empty difference range")
    rng = np.random.default_rng(config.seed)
    diffs = rng.uniform(lo, hi, size=n)
    duty = diffs / truth.rk_f
    if config.noise_std_f > 0:
        duty = duty + rng.normal(0.0, config.noise_std_f, size=n)
    duty = np.clip(duty, 0.0, 1.0)
    base = config.night_outdoor_base_f
    return [
        NightAggregate(
            night_of=date(2017, 1, 1) + timedelta(days=i),
            duty_cycle=float(duty[i]),
            indoor_mean_f=float(base + diffs[i]),
            outdoor_mean_f=base,
            n_records=int(9 * 3600 / config.interval_seconds),
        )
        for i in range(n)
    ]


@dataclass
class SynthPanel:
    rows: list[PanelRow]
    clamp_rate: float
    beta: tuple[float, ...]


def gen_panel(
    config: SynthConfig,
    beta: tuple[float, ...] | None = None,
    fe_scale: float | None = None,
) -> SynthPanel:
    """Generate an hourly duty-cycle panel with known coefficients.

    ``beta`` has 6 entries (per sensor count) for the base model or 24
    (sensor count x season, season-minor) for the seasonal model. Houses get
    a sensor-count regime, optionally switching mid-sample to exercise
    within-house variation. Duty cycles are clamped to [0, 1]; heavy
    clamping is reported because censoring degrades recovery.
    """
    beta = tuple(beta if beta is not None else (0.010, 0.011, 0.012, 0.013, 0.014, 0.015))
    if len(beta) not in (6, 24):
        raise ConfigError("beta must have 6 (base) or 24 (seasonal) entries")
    seasonal = len(beta) == 24
    fe_scale = config.panel_fe_scale if fe_scale is None else fe_scale
    rng = np.random.default_rng(config.seed)

    day_offsets = np.unique(np.linspace(0, 364, config.panel_days).astype(int))
    season_idx = {s: i for i, s in enumerate(SEASONS)}

    alphas = rng.normal(0.0, fe_scale, size=config.panel_houses)
    rhos = rng.normal(0.0, fe_scale / 2.0, size=24)
    nus = rng.normal(0.0, fe_scale / 2.0, size=12)

    rows: list[PanelRow] = []
    clamped = 0
    total = 0
    for h in range(config.panel_houses):
        house_id = f"house{h:04d}"
        j0 = int(rng.integers(0, 6))
        if rng.random() < config.panel_switch_prob:
            j1 = int(rng.integers(0, 6))
            switch_at = day_offsets[len(day_offsets) // 2] if len(day_offsets) else 0
        else:
            j1, switch_at = j0, 10**9
        for off in day_offsets:
            day = datetime(2017, 1, 1) + timedelta(days=int(off))
            j = j1 if off >= switch_at else j0
            for hour in range(24):
                ts = day + timedelta(hours=hour)
                doy = ts.timetuple().tm_yday
                temp = (
                    config.panel_outdoor_mean_f
                    + config.panel_outdoor_season_amp_f * np.sin(2 * np.pi * (doy - 81) / 365.0)
                    + config.panel_outdoor_diurnal_amp_f * np.sin(2 * np.pi * (hour - 9) / 24.0)
                    + rng.normal(0.0, config.panel_outdoor_noise_f)
                )
                season = season_of_month(ts.month)
                coef = beta[j * 4 + season_idx[season]] if seasonal else beta[j]
                y = (
                    config.panel_baseline
                    + coef * temp
                    + alphas[h]
                    + rhos[hour]
                    + nus[ts.month - 1]
                    + rng.normal(0.0, config.panel_noise_std)
                )
                dc = min(1.0, max(0.0, y))
                clamped += int(dc != y)
                total += 1
                rows.append(
                    PanelRow(
                        house_id=house_id,
                        timestamp=ts,
                        hour=hour,
                        month=ts.month,
                        season=season,
                        dc_cool=dc,
                        dc_heat=0.0,
                        dc_combined=dc,
                        outdoor_f=float(temp),
                        sensor_count=j,
                    )
                )
    clamp_rate = clamped / total if total else 0.0
    if clamp_rate > 0.20:
        logger.warning(
            "gen_panel: %.1f%% of duty cycles clamped; coefficient recovery degrades under censoring",
            100.0 * clamp_rate,
        )
    return SynthPanel(rows=rows, clamp_rate=clamp_rate, beta=beta)


@dataclass
class HouseTruth:
    house_id: str
    rooms: dict[int, RoomTruth]
    n_active_sensors: int


def _day_phase(month: int) -> str:
    if month in _HEATING_MONTHS:
        return "heating"
    if month in _COOLING_MONTHS:
        return "cooling"
    return "idle"


def gen_house_trace(
    config: SynthConfig,
    house_id: str,
    n_remote: int,
    n_days: int = 365,
    start: date = date(2017, 1, 1),
    sensor_start_days: dict[int, int] | None = None,
) -> tuple[HouseTrace, HouseTruth]:
    """Generate a full trace embedding recoverable thermal behavior.

    Winter days heat during the day; nights alternate between free-floating
    decays (zero runtime, exponential relaxation per room) and balance
    nights (constant duty cycle with room temperatures on the balance
    line). Summer days cool outside 10 a.m.-5 p.m. and free-float inside
    that window, rising toward outdoor plus each room's gain offset. May
    and October are idle. Outdoor temperature is held flat within each day
    and night block so segment means match the generating model exactly.
    """
    rng = np.random.default_rng(config.seed)
    rooms = {0: config.rooms[0]}
    for k in range(1, n_remote + 1):
        rooms[k] = config.rooms[k % len(config.rooms)]
    sensor_start_days = sensor_start_days or {}
    interval = config.interval_seconds
    per_day = 24 * 3600 // interval
    noise = config.noise_std_f

    # per-evening night plan: (kind, outdoor, duty)
    night_plan: dict[date, tuple[str, float, float]] = {}
    day_outdoor: dict[date, float] = {}
    for d in range(n_days):
        day = start + timedelta(days=d)
        phase = _day_phase(day.month)
        if phase == "heating":
            day_outdoor[day] = float(rng.uniform(30.0, 55.0))
            night_out = float(rng.uniform(20.0, 48.0))
            if d % 2 == 0:
                night_plan[day] = ("ffp", night_out, 0.0)
            else:
                duty = float(np.clip((HEAT_SETPOINT_F - night_out) / 150.0, 0.05, 0.95))
                night_plan[day] = ("balance", night_out, duty)
        elif phase == "cooling":
            day_outdoor[day] = float(rng.uniform(82.0, 98.0))
            night_plan[day] = ("cooling", day_outdoor[day], 0.0)
        else:
            day_outdoor[day] = IDLE_OUTDOOR_F
            night_plan[day] = ("idle", IDLE_OUTDOOR_F, 0.0)

    records: list[TraceRecord] = []
    sensors_sorted = sorted(rooms)
    for d in range(n_days):
        day = start + timedelta(days=d)
        phase = _day_phase(day.month)
        midnight = datetime(day.year, day.month, day.day)
        for i in range(per_day):
            ts = midnight + timedelta(seconds=i * interval)
            hour = ts.hour + ts.minute / 60.0
            evening = day - timedelta(days=1) if hour < 7 else day
            in_night = hour >= 22 or hour < 7
            heat_rt, cool_rt = 0.0, 0.0
            temps: dict[int, float] = {}

            if in_night:
                kind, night_out, duty = night_plan.get(evening, ("idle", IDLE_OUTDOOR_F, 0.0))
                outdoor = night_out
                if kind == "ffp":
                    t_start = datetime(evening.year, evening.month, evening.day, 22)
                    elapsed = (ts - t_start).total_seconds() / 3600.0
                    for k, room in rooms.items():
                        temps[k] = night_out + (HEAT_SETPOINT_F - night_out) * math.exp(
                            -elapsed / room.rc_heating_hours
                        )
                elif kind == "balance":
                    heat_rt = duty * interval
                    for k, room in rooms.items():
                        temps[k] = night_out + room.rk_f * duty
                elif kind == "cooling":
                    cool_rt = 90.0
                    for k in rooms:
                        temps[k] = COOL_SETPOINT_F
                else:
                    for k in rooms:
                        temps[k] = IDLE_TEMP_F
            else:
                outdoor = day_outdoor[day]
                if phase == "heating":
                    heat_rt = 120.0
                    for k in rooms:
                        temps[k] = HEAT_SETPOINT_F
                elif phase == "cooling":
                    if 10 <= hour < 17:
                        t_start = midnight + timedelta(hours=10)
                        elapsed = (ts - t_start).total_seconds() / 3600.0
                        for k, room in rooms.items():
                            temps[k] = (
                                outdoor
                                + room.rq_f
                                + (COOL_SETPOINT_F - outdoor - room.rq_f)
                                * math.exp(-elapsed / room.rc_cooling_hours)
                            )
                    else:
                        cool_rt = 90.0
                        for k in rooms:
                            temps[k] = COOL_SETPOINT_F
                else:
                    for k in rooms:
                        temps[k] = IDLE_TEMP_F

            if noise > 0:
                eps = rng.normal(0.0, noise, size=len(temps))
                for e, k in zip(eps, temps):
                    temps[k] = temps[k] + float(e)
            active = [
                k
                for k in sensors_sorted
                if k == 0 or d >= sensor_start_days.get(k, 0)
            ]
            present = {k: temps[k] for k in active}
            control = sum(present.values()) / len(present)
            records.append(
                TraceRecord(
                    timestamp=ts,
                    control_temp=control,
                    cool_setpoint=COOL_SETPOINT_F,
                    heat_setpoint=HEAT_SETPOINT_F,
                    outdoor_temp=outdoor,
                    heat_runtimes=(heat_rt,),
                    cool_runtimes=(cool_rt,),
                    thermostat_temp=present[0],
                    sensor_temps=tuple(
                        present.get(k) for k in range(1, n_remote + 1)
                    ),
                )
            )
    trace = HouseTrace(house_id=house_id, records=records, interval_seconds=interval)
    truth = HouseTruth(house_id=house_id, rooms=rooms, n_active_sensors=n_remote)
    return trace, truth


def _draw_rooms(rng: np.random.Generator, n_rooms: int) -> tuple[RoomTruth, ...]:
    # uniform draws stay inside a 2-sigma population band (half-range
    # 0.5(b-a) < 2 sigma = 0.577(b-a)), so the outlier trim usually keeps
    # every room
    return tuple(
        RoomTruth(
            rc_heating_hours=float(rng.uniform(6.0, 28.0)),
            rc_cooling_hours=float(rng.uniform(4.0, 15.0)),
            rq_f=float(rng.uniform(1.0, 5.0)),
            rk_f=float(rng.uniform(40.0, 80.0)),
        )
        for _ in range(n_rooms)
    )


_STATES = ("PA", "CA", "TX", "NY", "IL")


def gen_dataset(
    out_dir: str | Path,
    n_houses: int = 4,
    n_days: int = 60,
    seed: int = 0,
    noise_std_f: float = 0.0,
    interval_seconds: int = 300,
    max_remote_sensors: int = 5,
) -> dict:
    """Write a complete synthetic dataset in the ingest CSV schemas.

    Emits traces/, metadata.csv, mapping.json and truth.json under
    ``out_dir`` and returns the truth manifest. House h derives its child
    seed from the dataset seed and h, so houses are independent and the
    whole dataset is reproducible byte for byte.
    """
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    truth_manifest: dict = {
        "seed": seed,
        "n_houses": n_houses,
        "n_days": n_days,
        "noise_std_f": noise_std_f,
        "interval_seconds": interval_seconds,
        "houses": {},
    }
    meta_rows: list[HouseMetadata] = []
    for h in range(n_houses):
        house_id = f"house{h:03d}"
        # disjoint even/odd child seeds keep the truth-draw and trace
        # streams independent
        house_seed = 2 * (seed * 100003 + h)
        rng = np.random.default_rng(house_seed)
        n_remote = h % (max_remote_sensors + 1)
        rooms = _draw_rooms(rng, n_remote + 1)
        # activating within the first quarter keeps the house's final
        # sensor count observed in every season
        sensor_starts: dict[int, int] = {}
        if n_remote >= 1 and rng.random() < 0.4:
            sensor_starts[n_remote] = n_days // 4
        cfg = SynthConfig(
            seed=house_seed + 1,
            noise_std_f=noise_std_f,
            interval_seconds=interval_seconds,
            rooms=rooms,
        )
        trace, truth = gen_house_trace(
            cfg,
            house_id,
            n_remote=n_remote,
            n_days=n_days,
            sensor_start_days=sensor_starts,
        )
        write_trace(trace, out / "traces" / f"{house_id}.csv",
                    canonical_mapping(max_remote_sensors))
        truth_manifest["houses"][house_id] = {
            "rooms": {str(k): asdict(v) for k, v in truth.rooms.items()},
            "n_active_sensors": n_remote,
            "sensor_start_days": {str(k): v for k, v in sensor_starts.items()},
        }
        meta_rows.append(
            HouseMetadata(
                house_id=house_id,
                num_remote_sensors=n_remote,
                floor_area=float(round(rng.uniform(800, 4000))),
                num_occupants=int(rng.integers(1, 6)),
                num_floors=int(rng.integers(1, 4)),
                state_code=_STATES[h % len(_STATES)],
                eco_plus_enrolled=bool(rng.random() < 0.3),
                eco_plus_slider=int(rng.integers(1, 6)),
            )
        )

    with open(out / "metadata.csv", "w", newline="") as fh:
        fh.write(
            "house_id,num_remote_sensors,floor_area,num_occupants,num_floors,"
            "state_code,eco_plus_enrolled,eco_plus_slider\n"
        )
        for m in meta_rows:
            fh.write(
                f"{m.house_id},{m.num_remote_sensors},{m.floor_area},"
                f"{m.num_occupants},{m.num_floors},{m.state_code},"
                f"{str(m.eco_plus_enrolled).lower()},{m.eco_plus_slider}\n"
            )
    (out / "mapping.json").write_text(
        json.dumps(canonical_mapping(max_remote_sensors).to_dict(), indent=2, sort_keys=True)
        + "\n"
    )
    (out / "truth.json").write_text(json.dumps(truth_manifest, indent=2, sort_keys=True) + "\n")
    return truth_manifest
