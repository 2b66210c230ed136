"""Deterministic report serialization.

All CSV and JSON outputs round floats to 6 significant digits, sort keys,
and use fixed row ordering so a rerun on identical inputs is byte
identical. ``TABLE_SCHEMAS`` documents the shape of every cross-house
roll-up table the pipeline emits.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

FLOAT_SIG_DIGITS = 6

_STAT_COLUMNS = ("mean", "median", "std", "min", "max")

TABLE_SCHEMAS: dict[str, tuple[str, ...]] = {
    # DR comfort durations and deviations across houses
    "table1_dr_comfort": ("group", "metric", "unit", *_STAT_COLUMNS, "n"),
    # cooling-comfort index extremes across houses
    "table2_cci_extremes": ("room_type", *_STAT_COLUMNS, "n"),
    # deviation extremes from setpoint and from the control average
    "table3_deviation_extremes": ("season", "reference", "room_type", "mean", "std", "n"),
    # deficiency counts with category-specific denominators
    "table4_deficiencies": (
        "category",
        "houses_evaluated",
        "one_room",
        "one_room_pct",
        "two_rooms",
        "two_rooms_pct",
        "total",
        "total_pct",
    ),
    # room-minus-thermostat parameter differences
    "table5_representativeness": ("parameter", *_STAT_COLUMNS, "coeff_of_var_pct", "n"),
    # fixed-effects estimates
    "table6_fe_combined": ("term", "estimate", "std_error", "t_value", "p_value", "signif"),
    "table7_fe_by_mode": ("outcome", "term", "estimate", "std_error", "t_value", "p_value", "signif"),
    "table8_fe_seasonal": ("outcome", "term", "estimate", "std_error", "t_value", "p_value", "signif"),
}


def round_sig(value: float, digits: int = FLOAT_SIG_DIGITS) -> float:
    if value == 0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")


def fmt(value: object) -> str:
    """Render one CSV cell: floats at 6 significant digits, None empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.{FLOAT_SIG_DIGITS}g}"
    return str(value)


def jsonable(obj: object) -> object:
    """Recursively convert to JSON-safe types with rounded floats."""
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else round_sig(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: str | Path, payload: object) -> None:
    Path(path).write_text(
        json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"
    )


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(cell) for cell in row])
            n += 1
    return n


def summary_row(values: Sequence[float]) -> list[float | None]:
    """mean/median/std/min/max/n cells for a roll-up table row."""
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return [None, None, None, None, None, 0]
    return [
        float(np.mean(arr)),
        float(np.median(arr)),
        float(np.std(arr)),
        float(np.min(arr)),
        float(np.max(arr)),
        int(arr.size),
    ]


def config_hash(config: Mapping) -> str:
    canonical = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
