"""Comfort indices and demand-response comfort metrics.

Builds relative-frequency histograms of temperature deviations, computes the
comfortable-operation and comfortable-cooling indices over them, summarizes
per-room deviations, and quantifies how long rooms stay comfortable when
cooling is curtailed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError

DEFAULT_BIN_WIDTH_F = 1.0
DEFAULT_COMFORT_HALF_WIDTH_F = 2.0
DEFAULT_CDRD_THRESHOLD_F = 2.0

_REL_TOL = 1e-9


@dataclass(frozen=True)
class RFHistogram:
    """Relative frequencies of binned deviations.

    Bin index x covers deviations in [x*w - w/2, x*w + w/2) where w is the
    bin width (nearest-integer bin centers). ``analysis_bound_f`` is the
    half-range the indices are normalized over; under the dataset-max policy
    it is the largest occupied |bin center|, which makes the total in-range
    mass exactly 1.
    """

    bin_width_f: float
    bins: dict[int, float]
    analysis_bound_f: float
    total_samples: int

    def mass_within(self, bound_f: float) -> float:
        limit = bound_f * (1.0 + _REL_TOL) + 1e-12
        return sum(r for x, r in self.bins.items() if abs(x) * self.bin_width_f <= limit)

    def mass_at_or_below_zero(self, bound_f: float) -> float:
        limit = bound_f * (1.0 + _REL_TOL) + 1e-12
        return sum(
            r
            for x, r in self.bins.items()
            if x <= 0 and abs(x) * self.bin_width_f <= limit
        )


@dataclass(frozen=True)
class ComfortIndices:
    coi: float
    cci: float | None
    comfort_half_width_f: float


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    std: float
    min: float
    max: float
    n: int


@dataclass(frozen=True)
class DeviationStats:
    """Per-room deviation summaries for one reference choice."""

    reference: str  # setpoint | control-average
    per_room: dict[str, SummaryStats]
    coldest_room: str
    hottest_room: str


@dataclass(frozen=True)
class CdrdResult:
    minutes: float | None
    censored: bool


@dataclass(frozen=True)
class DRComfortSummary:
    cdrd_minutes: dict[str, float | None]
    max_deviation_f: dict[str, float]
    fast_room: str | None
    slow_room: str | None
    gap_minutes: float | None
    gap_deviation_f: float


def rf_histogram(
    samples: Sequence[float],
    bin_width_f: float = DEFAULT_BIN_WIDTH_F,
    analysis_bound_f: float | None = None,
) -> RFHistogram:
    """Bin deviation samples into relative frequencies.

    A sample d lands in bin floor(d/width + 0.5). With ``analysis_bound_f``
    None (dataset-max policy) the bound is the largest occupied |bin
    center|, so the in-range mass sums to 1.
    """
    if bin_width_f <= 0:
        raise ValueError("bin width must be positive")
    data = np.asarray([s for s in samples if s is not None and math.isfinite(s)], dtype=float)
    if data.size == 0:
        raise InsufficientDataError("rf_histogram requires at least one finite sample")
    idx = np.floor(data / bin_width_f + 0.5).astype(int)
    values, counts = np.unique(idx, return_counts=True)
    bins = {int(x): float(c) / data.size for x, c in zip(values, counts)}
    if analysis_bound_f is None:
        analysis_bound_f = float(np.max(np.abs(values))) * bin_width_f
    return RFHistogram(
        bin_width_f=bin_width_f,
        bins=bins,
        analysis_bound_f=float(analysis_bound_f),
        total_samples=int(data.size),
    )


def coi(hist: RFHistogram, comfort_half_width_f: float = DEFAULT_COMFORT_HALF_WIDTH_F) -> float:
    """Share of in-range histogram mass within the comfort band.

    Under the dataset-max bound policy the denominator is 1 and the index
    reduces to the mass within +/- the comfort half-width.
    """
    if comfort_half_width_f < 0:
        raise ValueError("comfort half-width must be non-negative")
    denom = hist.mass_within(hist.analysis_bound_f)
    if denom <= 0:
        raise ValueError("analysis bound excludes all histogram mass")
    return hist.mass_within(min(comfort_half_width_f, hist.analysis_bound_f)) / denom


def cci(hist: RFHistogram) -> float:
    """Share of in-range mass at or below the cooling setpoint.

    The histogram must have been built from deviations relative to the
    cooling setpoint.
    """
    denom = hist.mass_within(hist.analysis_bound_f)
    if denom <= 0:
        raise ValueError("analysis bound excludes all histogram mass")
    return hist.mass_at_or_below_zero(hist.analysis_bound_f) / denom


def setpoint_reference(
    heat_setpoint: float | None, cool_setpoint: float | None, hvac_mode: str
) -> float | None:
    """Single reference temperature for deviation computation.

    In auto mode (dual setpoints) the reference is the mean of the heating
    and cooling setpoints.
    """
    if hvac_mode == "heat":
        return heat_setpoint
    if hvac_mode == "cool":
        return cool_setpoint
    if hvac_mode == "auto":
        if heat_setpoint is None or cool_setpoint is None:
            return None
        return 0.5 * (heat_setpoint + cool_setpoint)
    raise ValueError(f"unknown hvac mode {hvac_mode!r}")


def _summary(values: np.ndarray) -> SummaryStats:
    return SummaryStats(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        std=float(np.std(values)),
        min=float(np.min(values)),
        max=float(np.max(values)),
        n=int(values.size),
    )


def deviation_stats(
    room_temps: Mapping[str, Sequence[float | None]],
    reference: str,
    setpoints: Sequence[float | None] | None = None,
) -> DeviationStats:
    """Per-room deviation summaries against a reference.

    reference="setpoint" subtracts the setpoint series; "control-average"
    subtracts the mean of the present room temperatures at each timestamp.
    Rooms are ranked by mean deviation to name the coldest and hottest.
    """
    if not room_temps:
        raise InsufficientDataError("deviation_stats requires at least one room")
    rooms = sorted(room_temps)
    mat = np.array(
        [[np.nan if v is None else v for v in room_temps[r]] for r in rooms], dtype=float
    )
    if reference == "setpoint":
        if setpoints is None:
            raise ValueError("setpoint reference requires a setpoint series")
        ref = np.asarray([np.nan if v is None else v for v in setpoints], dtype=float)
        if ref.shape[0] != mat.shape[1]:
            raise ValueError("setpoint series length must match the room series")
    elif reference == "control-average":
        with np.errstate(invalid="ignore"):
            ref = np.nanmean(mat, axis=0)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    dev = mat - ref[None, :]

    per_room: dict[str, SummaryStats] = {}
    for i, room in enumerate(rooms):
        values = dev[i][~np.isnan(dev[i])]
        if values.size == 0:
            continue
        per_room[room] = _summary(values)
    if not per_room:
        raise InsufficientDataError("no room has a finite deviation sample")
    coldest = min(per_room, key=lambda r: (per_room[r].mean, r))
    hottest = max(per_room, key=lambda r: (per_room[r].mean, r))
    return DeviationStats(
        reference=reference, per_room=per_room, coldest_room=coldest, hottest_room=hottest
    )


def cdrd(
    times: Sequence[datetime],
    temps: Sequence[float | None],
    threshold_f: float = DEFAULT_CDRD_THRESHOLD_F,
) -> CdrdResult:
    """Minutes until the room rises ``threshold_f`` above its starting
    temperature, or censored if it never does within the series."""
    if len(times) != len(temps):
        raise ValueError("times and temps must be the same length")
    pairs = [(t, v) for t, v in zip(times, temps) if v is not None and math.isfinite(v)]
    if not pairs:
        raise InsufficientDataError("cdrd requires at least one present temperature")
    t0, start = pairs[0]
    for t, v in pairs:
        if v - start >= threshold_f:
            return CdrdResult(minutes=(t - t0).total_seconds() / 60.0, censored=False)
    return CdrdResult(minutes=None, censored=True)


def dr_comfort_summary(
    times: Sequence[datetime],
    room_temps: Mapping[str, Sequence[float | None]],
    threshold_f: float = DEFAULT_CDRD_THRESHOLD_F,
) -> DRComfortSummary:
    """Comfort summary over one curtailment event.

    Fast/slow rooms are the min/max uncensored rise times. Censored rooms
    are excluded from the duration gap but still contribute their maximum
    deviation to the deviation gap.
    """
    if len(room_temps) < 2:
        raise InsufficientDataError("dr_comfort_summary requires at least two rooms")
    durations: dict[str, float | None] = {}
    deviations: dict[str, float] = {}
    for room in sorted(room_temps):
        temps = room_temps[room]
        result = cdrd(times, temps, threshold_f)
        durations[room] = result.minutes
        present = [v for v in temps if v is not None and math.isfinite(v)]
        deviations[room] = max(present) - present[0]
    uncensored = {r: m for r, m in durations.items() if m is not None}
    if uncensored:
        fast = min(uncensored, key=lambda r: (uncensored[r], r))
        slow = max(uncensored, key=lambda r: (uncensored[r], r))
        gap_minutes: float | None = uncensored[slow] - uncensored[fast]
    else:
        fast = slow = None
        gap_minutes = None
    gap_dev = max(deviations.values()) - min(deviations.values())
    return DRComfortSummary(
        cdrd_minutes=durations,
        max_deviation_f=deviations,
        fast_room=fast,
        slow_room=slow,
        gap_minutes=gap_minutes,
        gap_deviation_f=gap_dev,
    )
