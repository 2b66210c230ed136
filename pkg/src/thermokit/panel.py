"""Hourly duty-cycle panels and multi-way fixed-effects estimation.

The panel regresses the hourly HVAC duty cycle on sensor-count dummies
interacted with outdoor temperature (optionally also with season dummies),
absorbing additive house, hour-of-day, and month fixed effects by
alternating within-group demeaning. Inference uses the cluster-robust
sandwich with clusters at the house level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import t as t_dist

from .errors import (
    DegenerateClusterError,
    InsufficientDataError,
    NumericalError,
    RankDeficiencyError,
)
from .ingest import HourlyRecord

logger = logging.getLogger(__name__)

SENSOR_CAP = 5
SEASONS = ("spring", "summer", "autumn", "winter")
METEOROLOGICAL_SEASONS: dict[int, str] = {
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "autumn", 10: "autumn", 11: "autumn",
    12: "winter", 1: "winter", 2: "winter",
}

BASE_MODEL = "base"
SEASONAL_MODEL = "seasonal"
OUTCOMES = ("cool", "heat", "combined")

DEMEAN_TOL = 1e-13
DEMEAN_MAX_SWEEPS = 2000


@dataclass(frozen=True, slots=True)
class PanelRow:
    house_id: str
    timestamp: datetime
    hour: int
    month: int
    season: str
    dc_cool: float
    dc_heat: float
    dc_combined: float
    outdoor_f: float
    sensor_count: int


@dataclass
class PanelBuild:
    rows: list[PanelRow]
    dropped_no_outdoor: int


def season_of_month(month: int, season_map: Mapping[int, str] | None = None) -> str:
    return (season_map or METEOROLOGICAL_SEASONS)[month]


def build_panel(
    hourly_by_house: Mapping[str, Sequence[HourlyRecord]],
    sensor_cap: int = SENSOR_CAP,
    season_map: Mapping[int, str] | None = None,
) -> PanelBuild:
    """Assemble panel rows from hourly records.

    Duty cycles are runtime seconds over 3600, clamped to [0, 1]; the
    combined cycle caps at 1. Hours lacking an outdoor reading are dropped
    and counted. Sensor counts above the cap share the top dummy.
    """
    rows: list[PanelRow] = []
    dropped = 0
    for house_id in sorted(hourly_by_house):
        for rec in hourly_by_house[house_id]:
            if rec.outdoor_temp is None:
                dropped += 1
                continue
            dc_cool = min(1.0, max(0.0, rec.cool_seconds / 3600.0))
            dc_heat = min(1.0, max(0.0, rec.heat_seconds / 3600.0))
            rows.append(
                PanelRow(
                    house_id=house_id,
                    timestamp=rec.hour_start,
                    hour=rec.hour_start.hour,
                    month=rec.hour_start.month,
                    season=season_of_month(rec.hour_start.month, season_map),
                    dc_cool=dc_cool,
                    dc_heat=dc_heat,
                    dc_combined=min(1.0, dc_cool + dc_heat),
                    outdoor_f=rec.outdoor_temp,
                    sensor_count=min(rec.sensor_count, sensor_cap),
                )
            )
    if dropped:
        logger.info("build_panel: dropped %d hours lacking outdoor temperature", dropped)
    return PanelBuild(rows=rows, dropped_no_outdoor=dropped)


@dataclass
class RegressionResult:
    """Coefficients and cluster-robust inference for one model fit."""

    model: str
    outcome: str
    terms: tuple[str, ...]
    estimates: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_values: tuple[float, ...]
    p_values: tuple[float, ...]
    n_obs: int
    n_clusters: int
    fe_levels: dict[str, int]
    degenerate_dims: tuple[str, ...]
    k_params: int
    dof_factor: float
    rank: int
    demean_sweeps: int
    covariance: np.ndarray = field(repr=False)

    def term_index(self, term: str) -> int:
        return self.terms.index(term)


def base_terms() -> tuple[str, ...]:
    return tuple(f"beta_{j}" for j in range(SENSOR_CAP + 1))


def seasonal_terms() -> tuple[str, ...]:
    return tuple(
        f"beta_{j}:{season}" for j in range(SENSOR_CAP + 1) for season in SEASONS
    )


def _design_matrix(rows: Sequence[PanelRow], model: str) -> tuple[np.ndarray, tuple[str, ...]]:
    n = len(rows)
    temp = np.fromiter((r.outdoor_f for r in rows), dtype=float, count=n)
    counts = np.fromiter((r.sensor_count for r in rows), dtype=np.int64, count=n)
    if model == BASE_MODEL:
        terms = base_terms()
        X = np.zeros((n, len(terms)))
        X[np.arange(n), counts] = temp
        return X, terms
    if model == SEASONAL_MODEL:
        terms = seasonal_terms()
        season_idx = {s: i for i, s in enumerate(SEASONS)}
        col = np.fromiter(
            (r.sensor_count * len(SEASONS) + season_idx[r.season] for r in rows),
            dtype=np.int64,
            count=n,
        )
        X = np.zeros((n, len(terms)))
        X[np.arange(n), col] = temp
        return X, terms
    raise ValueError(f"unknown model {model!r}")


def demean_multiway(
    Z: np.ndarray,
    group_codes: Sequence[np.ndarray],
    tol: float = DEMEAN_TOL,
    max_sweeps: int = DEMEAN_MAX_SWEEPS,
) -> tuple[np.ndarray, int]:
    """Alternating within-group centering over several group dimensions.

    Sweeps all dimensions until the largest absolute adjustment in a full
    sweep falls below ``tol``, or until rounding noise stops further
    progress (group-mean roundoff bounds how small the adjustments can get
    on large panels). Pairs of sweeps are extrapolated per column with the
    Irons-Tuck step, which cures the slow linear convergence that appears
    when regressor support aligns with one of the group dimensions.
    Returns the demeaned copy and sweep count.
    """
    Z = np.array(Z, dtype=float, copy=True)
    n_cols = Z.shape[1]
    counts = [np.bincount(codes).astype(float) for codes in group_codes]
    scale = max(float(np.abs(Z).max(initial=0.0)), 1.0)
    # group-mean roundoff bounds the smallest achievable adjustment
    float_floor = 128.0 * np.finfo(float).eps * scale

    def sweep_once(M: np.ndarray) -> tuple[np.ndarray, float]:
        out = M.copy()
        worst = 0.0
        for codes, cnt in zip(group_codes, counts):
            means = np.empty((len(cnt), n_cols))
            for j in range(n_cols):
                means[:, j] = np.bincount(codes, weights=out[:, j], minlength=len(cnt))
            means /= cnt[:, None]
            adjust = means[codes]
            out -= adjust
            worst = max(worst, float(np.abs(adjust).max(initial=0.0)))
        return out, worst

    best = np.inf
    stalled = 0
    sweeps = 0
    while sweeps < max_sweeps:
        Z1, _ = sweep_once(Z)
        Z2, worst = sweep_once(Z1)
        sweeps += 2
        if worst < tol or worst < float_floor:
            return Z2, sweeps
        if worst < 0.25 * best:
            best = worst
            stalled = 0
        else:
            stalled += 1
        if stalled >= 10 and worst < 1e-9 * scale:
            logger.debug(
                "demeaning plateaued at %.3e after %d sweeps (tol %.0e unreachable)",
                worst,
                sweeps,
                tol,
            )
            return Z2, sweeps
        # Irons-Tuck extrapolation toward the fixed point, per column
        delta = Z2 - Z1
        delta2 = Z2 - 2.0 * Z1 + Z
        denom = np.einsum("ij,ij->j", delta2, delta2)
        numer = np.einsum("ij,ij->j", delta, delta2)
        coef = np.where(denom > 0, numer / np.where(denom > 0, denom, 1.0), 0.0)
        Z = Z2 - delta * coef[None, :]
    raise NumericalError(
        f"fixed-effect demeaning did not converge below {tol} in {max_sweeps} sweeps"
    )


def fit_fe_model(
    rows: Sequence[PanelRow],
    model: str = BASE_MODEL,
    outcome: str = "combined",
    demean_tol: float = DEMEAN_TOL,
) -> RegressionResult:
    """Estimate the sensor-count interaction model with absorbed fixed effects.

    Coefficients equal the explicit dummy-variable least-squares solution;
    the covariance is the cluster-robust sandwich over house clusters with
    the G/(G-1) * (N-1)/(N-K) small-sample factor, where K counts the
    interaction terms plus the absorbed fixed-effect levels. p-values use a
    t distribution with G-1 degrees of freedom.
    """
    if outcome not in OUTCOMES:
        raise ValueError(f"unknown outcome {outcome!r}")
    n = len(rows)
    if n == 0:
        raise InsufficientDataError("empty panel")
    X, terms = _design_matrix(rows, model)
    y = np.fromiter((getattr(r, f"dc_{outcome}") for r in rows), dtype=float, count=n)

    empty = [terms[j] for j in range(X.shape[1]) if not np.any(X[:, j])]
    if empty:
        raise RankDeficiencyError(
            f"interaction cells with no observations: {', '.join(empty)}"
        )

    house_codes, house_levels = _codes([r.house_id for r in rows])
    hour_codes, hour_levels = _codes([r.hour for r in rows])
    month_codes, month_levels = _codes([r.month for r in rows])
    fe_levels = {"house": house_levels, "hour": hour_levels, "month": month_levels}
    degenerate = tuple(d for d, levels in fe_levels.items() if levels < 2)
    for d in degenerate:
        logger.warning("fixed-effect dimension %r has a single level; absorbs only a constant", d)
    if house_levels < 2:
        raise DegenerateClusterError(
            "cluster-robust inference needs at least 2 houses; got 1"
        )

    Z = np.column_stack([y, X])
    Zt, sweeps = demean_multiway(Z, [house_codes, hour_codes, month_codes], tol=demean_tol)
    yt, Xt = Zt[:, 0], Zt[:, 1:]

    rank = int(np.linalg.matrix_rank(Xt))
    if rank < X.shape[1]:
        raise RankDeficiencyError(
            f"demeaned design has rank {rank} < {X.shape[1]} interaction terms"
        )
    beta, *_ = np.linalg.lstsq(Xt, yt, rcond=None)
    resid = yt - Xt @ beta

    k_x = X.shape[1]
    absorbed = 1 + sum(levels - 1 for levels in fe_levels.values())
    k_params = k_x + absorbed
    G = house_levels
    if n <= k_params:
        raise InsufficientDataError(
            f"panel has {n} rows but the model absorbs {k_params} parameters"
        )

    bread = np.linalg.inv(Xt.T @ Xt)
    scores = np.zeros((G, k_x))
    np.add.at(scores, house_codes, Xt * resid[:, None])
    meat = scores.T @ scores
    dof_factor = (G / (G - 1)) * ((n - 1) / (n - k_params))
    cov = dof_factor * bread @ meat @ bread

    se = np.sqrt(np.diag(cov))
    t_values = beta / se
    p_values = 2.0 * t_dist.sf(np.abs(t_values), df=G - 1)

    return RegressionResult(
        model=model,
        outcome=outcome,
        terms=terms,
        estimates=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_values=tuple(float(t) for t in t_values),
        p_values=tuple(float(p) for p in p_values),
        n_obs=n,
        n_clusters=G,
        fe_levels=fe_levels,
        degenerate_dims=degenerate,
        k_params=k_params,
        dof_factor=float(dof_factor),
        rank=rank,
        demean_sweeps=sweeps,
        covariance=cov,
    )


def _codes(values: Sequence) -> tuple[np.ndarray, int]:
    _, codes = np.unique(np.asarray(values), return_inverse=True)
    return codes, int(codes.max()) + 1


def significance_code(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass(frozen=True)
class TermEffect:
    term: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PairChange:
    from_term: str
    to_term: str
    pct_change: float | None
    undefined_reason: str | None = None


@dataclass
class EffectSummary:
    """Marginal effects of 1 F of outdoor temperature and pairwise changes."""

    outcome: str
    model: str
    effects: tuple[TermEffect, ...]
    pairwise: tuple[PairChange, ...]


def effect_summary(result: RegressionResult, ci_z: float = 1.96) -> EffectSummary:
    """Per-term effects with 95% intervals plus pairwise percent changes.

    The change from term a to term b is (b - a) / a; it is reported as
    undefined when the baseline coefficient's own interval covers zero.
    """
    effects = tuple(
        TermEffect(
            term=term,
            estimate=est,
            std_error=se,
            ci_low=est - ci_z * se,
            ci_high=est + ci_z * se,
        )
        for term, est, se in zip(result.terms, result.estimates, result.std_errors)
    )

    def groups() -> list[list[int]]:
        if result.model == BASE_MODEL:
            return [list(range(len(result.terms)))]
        by_season: dict[str, list[int]] = {s: [] for s in SEASONS}
        for i, term in enumerate(result.terms):
            by_season[term.rsplit(":", 1)[1]].append(i)
        return [by_season[s] for s in SEASONS]

    pairs: list[PairChange] = []
    for group in groups():
        for ai in range(len(group)):
            for bi in range(ai + 1, len(group)):
                a, b = group[ai], group[bi]
                base = result.estimates[a]
                se_a = result.std_errors[a]
                if abs(base) <= ci_z * se_a:
                    pairs.append(
                        PairChange(
                            from_term=result.terms[a],
                            to_term=result.terms[b],
                            pct_change=None,
                            undefined_reason="baseline coefficient not distinguishable from zero",
                        )
                    )
                    continue
                pairs.append(
                    PairChange(
                        from_term=result.terms[a],
                        to_term=result.terms[b],
                        pct_change=100.0 * (result.estimates[b] - base) / base,
                    )
                )
    return EffectSummary(
        outcome=result.outcome,
        model=result.model,
        effects=effects,
        pairwise=tuple(pairs),
    )
