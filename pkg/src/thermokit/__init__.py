"""Thermal behavior analytics for single-zone multi-node residences.

Ingests smart-thermostat traces, computes comfort indices, extracts
free-floating periods, identifies per-room gray-box thermal parameters,
classifies room deficiencies, and estimates the energy impact of remote
sensor counts with fixed-effects panel regression. A synthetic-house
generator provides ground-truth oracles for every estimator.
"""

__version__ = "0.1.0"

from .comfort import (
    CdrdResult,
    ComfortIndices,
    DeviationStats,
    DRComfortSummary,
    RFHistogram,
    cci,
    cdrd,
    coi,
    deviation_stats,
    dr_comfort_summary,
    rf_histogram,
)
from .deficiency import (
    DeficiencyReport,
    RepresentativenessStats,
    classify_house,
    deficiency_rollup,
    representativeness,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateClusterError,
    FitError,
    InsufficientDataError,
    MissingColumnError,
    NoDecaySignalError,
    NonPhysicalFitError,
    NumericalError,
    ParseError,
    RankDeficiencyError,
    ThermokitError,
)
from .ffp import FFPSegment, extract_ffps
from .ingest import (
    ColumnMapping,
    HouseMetadata,
    HourlyRecord,
    HouseTrace,
    PenetrationReport,
    SeasonWindow,
    TraceRecord,
    canonical_mapping,
    parse_metadata,
    parse_trace,
    resample_hourly,
    segment_seasons,
    summarize_metadata,
    write_trace,
)
from .panel import (
    EffectSummary,
    PanelRow,
    RegressionResult,
    build_panel,
    effect_summary,
    fit_fe_model,
)
from .synth import (
    RoomTruth,
    SynthConfig,
    gen_balance_nights,
    gen_dataset,
    gen_ffp_segment,
    gen_house_trace,
    gen_panel,
)
from .thermal_id import (
    NightAggregate,
    RcFit,
    RkFit,
    ThermalParams,
    collect_thermal_params,
    filter_fits,
    filter_rk_fits,
    fit_rc_heating,
    fit_rc_rq_cooling,
    fit_rk_balance,
    nightly_aggregate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
