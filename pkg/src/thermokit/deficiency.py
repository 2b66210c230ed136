"""Room deficiency classification and thermostat representativeness.

Rooms are compared only against other rooms in the same house: a room whose
parameter sits more than one standard deviation from the within-house mean
is flagged. Low/high solar gain come from the gain offset, low heating
input from the balance-point parameter, and poor insulation from the
heating-season time constant (the heating season reflects the physical
envelope rather than occupant behavior).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .comfort import SummaryStats
from .errors import DataError
from .thermal_id import ThermalParams

logger = logging.getLogger(__name__)

CATEGORIES = ("low_solar_gain", "high_solar_gain", "low_heating_input", "poor_insulation")

# category -> (parameter accessor, flag side)
_RULES: dict[str, tuple[Callable[[ThermalParams], float | None], str]] = {
    "low_solar_gain": (lambda p: p.rq_f, "below"),
    "high_solar_gain": (lambda p: p.rq_f, "above"),
    "low_heating_input": (lambda p: p.rk_f, "below"),
    "poor_insulation": (lambda p: p.rc_heating_hours, "below"),
}

MIN_ROOMS = 3


@dataclass(frozen=True)
class RoomFlags:
    low_solar_gain: bool = False
    high_solar_gain: bool = False
    low_heating_input: bool = False
    poor_insulation: bool = False

    def as_dict(self) -> dict[str, bool]:
        return {c: getattr(self, c) for c in CATEGORIES}


@dataclass
class DeficiencyReport:
    house_id: str
    rooms: dict[int, RoomFlags]
    category_counts: dict[str, int]
    skipped_categories: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParamDiffStats:
    stats: SummaryStats
    coefficient_of_variation_pct: float | None  # None when the mean is zero


@dataclass
class RepresentativenessStats:
    """Pooled distributions of room-minus-thermostat parameter differences."""

    per_parameter: dict[str, ParamDiffStats]
    houses_used: dict[str, int]


def classify_house(params: Sequence[ThermalParams], min_rooms: int = MIN_ROOMS) -> DeficiencyReport:
    """Flag rooms one standard deviation beyond their house's mean.

    The within-house mean and (population) standard deviation are computed
    per parameter over rooms where it is present; categories with fewer than
    ``min_rooms`` usable rooms are skipped with a warning. Thresholds are
    strict, so identical rooms produce no flags.
    """
    if not params:
        raise DataError("classify_house requires at least one room")
    house_ids = {p.house_id for p in params}
    if len(house_ids) > 1:
        raise DataError(f"classify_house got rooms from multiple houses: {sorted(house_ids)}")
    house_id = params[0].house_id
    rooms = sorted(params, key=lambda p: p.sensor_index)

    flags: dict[int, dict[str, bool]] = {p.sensor_index: {} for p in rooms}
    skipped: dict[str, str] = {}
    counts: dict[str, int] = {}
    for category, (accessor, side) in _RULES.items():
        present = [(p.sensor_index, accessor(p)) for p in rooms if accessor(p) is not None]
        if len(present) < min_rooms:
            reason = f"only {len(present)} rooms carry the parameter (need {min_rooms})"
            skipped[category] = reason
            logger.warning("house %s: %s skipped: %s", house_id, category, reason)
            counts[category] = 0
            continue
        values = np.array([v for _, v in present], dtype=float)
        mu = float(np.mean(values))
        sigma = float(np.std(values))
        n_flagged = 0
        for (sensor, v) in present:
            hit = v < mu - sigma if side == "below" else v > mu + sigma
            flags[sensor][category] = hit
            n_flagged += int(hit)
        counts[category] = n_flagged
    room_flags = {
        sensor: RoomFlags(**{c: f.get(c, False) for c in CATEGORIES})
        for sensor, f in flags.items()
    }
    return DeficiencyReport(
        house_id=house_id,
        rooms=room_flags,
        category_counts=counts,
        skipped_categories=skipped,
    )


@dataclass(frozen=True)
class CategoryRollup:
    houses_evaluated: int
    one_room: int
    two_rooms: int
    total: int  # houses with at least one flagged room

    def pct(self, count: int) -> float | None:
        if self.houses_evaluated == 0:
            return None
        return 100.0 * count / self.houses_evaluated


def deficiency_rollup(reports: Sequence[DeficiencyReport]) -> dict[str, CategoryRollup]:
    """Cross-house counts of houses with one, two, or any flagged rooms.

    Percentages use the category-specific denominator: only houses where the
    category was evaluable.
    """
    out: dict[str, CategoryRollup] = {}
    for category in CATEGORIES:
        evaluated = [r for r in reports if category not in r.skipped_categories]
        counts = [r.category_counts.get(category, 0) for r in evaluated]
        out[category] = CategoryRollup(
            houses_evaluated=len(evaluated),
            one_room=sum(1 for c in counts if c == 1),
            two_rooms=sum(1 for c in counts if c == 2),
            total=sum(1 for c in counts if c >= 1),
        )
    return out


_REPRESENTATIVENESS_PARAMS: Mapping[str, Callable[[ThermalParams], float | None]] = {
    "rc_hours": lambda p: p.rc_heating_hours,
    "rk_f": lambda p: p.rk_f,
    "rq_f": lambda p: p.rq_f,
}


def representativeness(
    params: Sequence[ThermalParams], thermostat_sensor: int = 0
) -> RepresentativenessStats:
    """Pooled room-minus-thermostat differences per parameter.

    Houses whose thermostat room lacks a parameter are skipped for that
    parameter; the thermostat's zero self-difference is excluded. The
    coefficient of variation is 100 * |std / mean| (sample std).
    """
    by_house: dict[str, list[ThermalParams]] = {}
    for p in params:
        by_house.setdefault(p.house_id, []).append(p)

    per_parameter: dict[str, ParamDiffStats] = {}
    houses_used: dict[str, int] = {}
    for name, accessor in _REPRESENTATIVENESS_PARAMS.items():
        diffs: list[float] = []
        used = 0
        for house in sorted(by_house):
            rooms = by_house[house]
            ref = next(
                (accessor(p) for p in rooms if p.sensor_index == thermostat_sensor), None
            )
            if ref is None:
                continue
            house_diffs = [
                accessor(p) - ref
                for p in rooms
                if p.sensor_index != thermostat_sensor and accessor(p) is not None
            ]
            if house_diffs:
                used += 1
                diffs.extend(house_diffs)
        houses_used[name] = used
        if not diffs:
            continue
        arr = np.array(diffs, dtype=float)
        mean = float(np.mean(arr))
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        per_parameter[name] = ParamDiffStats(
            stats=SummaryStats(
                mean=mean,
                median=float(np.median(arr)),
                std=std,
                min=float(np.min(arr)),
                max=float(np.max(arr)),
                n=int(arr.size),
            ),
            coefficient_of_variation_pct=None if mean == 0 else 100.0 * abs(std / mean),
        )
    return RepresentativenessStats(per_parameter=per_parameter, houses_used=houses_used)
