from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermokit.comfort import (
    cci,
    cdrd,
    coi,
    deviation_stats,
    dr_comfort_summary,
    rf_histogram,
    setpoint_reference,
)
from thermokit.errors import InsufficientDataError

finite_samples = st.lists(
    st.floats(min_value=-30, max_value=30), min_size=1, max_size=200
)


def minutes(n):
    t0 = datetime(2017, 6, 19, 12, 0)
    return [t0 + timedelta(minutes=m) for m in n]


class TestRfHistogram:
    def test_degenerate_all_zero(self):
        hist = rf_histogram([0.0, 0.0, 0.0])
        assert hist.bins == {0: 1.0}

    def test_hand_counted_bins(self):
        hist = rf_histogram([-1.0, -1.0, 3.0, 3.0], bin_width_f=1.0)
        assert hist.bins == {-1: 0.5, 3: 0.5}
        assert hist.analysis_bound_f == 3.0

    def test_nearest_integer_binning(self):
        assert rf_histogram([0.6]).bins == {1: 1.0}
        assert rf_histogram([0.4]).bins == {0: 1.0}
        assert rf_histogram([-0.6]).bins == {-1: 1.0}

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            rf_histogram([])

    @given(samples=finite_samples)
    @settings(max_examples=100, deadline=None)
    def test_frequencies_sum_to_one(self, samples):
        hist = rf_histogram(samples)
        assert sum(hist.bins.values()) == pytest.approx(1.0, abs=1e-9)
        assert hist.mass_within(hist.analysis_bound_f) == pytest.approx(1.0, abs=1e-9)


class TestCoi:
    def test_full_mass_in_comfort_band(self):
        hist = rf_histogram([-2.0, -1.0, 0.0, 1.0, 2.0])
        assert coi(hist, 2.0) == pytest.approx(1.0)

    def test_uniform_21_bins(self):
        samples = [float(x) for x in range(-10, 11)]
        hist = rf_histogram(samples)
        assert coi(hist, 2.0) == pytest.approx(5 / 21, abs=1e-12)

    def test_hand_sum_with_m3(self):
        hist = rf_histogram([0.0, 3.0])
        assert coi(hist, 2.0) == pytest.approx(0.5)

    @given(samples=finite_samples)
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_comfort_width(self, samples):
        hist = rf_histogram(samples)
        values = [coi(hist, c) for c in (0.0, 1.0, 2.0, 5.0, 10.0, 40.0)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
        assert 0.0 <= values[0] and values[-1] <= 1.0

    @given(samples=finite_samples)
    @settings(max_examples=50, deadline=None)
    def test_coi_at_bound_is_one(self, samples):
        hist = rf_histogram(samples)
        assert coi(hist, hist.analysis_bound_f) == pytest.approx(1.0, abs=1e-9)

    @given(samples=finite_samples)
    @settings(max_examples=50, deadline=None)
    def test_duplication_invariance(self, samples):
        hist1 = rf_histogram(samples)
        hist2 = rf_histogram(samples * 3)
        assert coi(hist1, 2.0) == pytest.approx(coi(hist2, 2.0), abs=1e-12)
        assert cci(hist1) == pytest.approx(cci(hist2), abs=1e-12)


class TestCci:
    def test_fully_below_setpoint(self):
        assert cci(rf_histogram([-3.0, -1.0, 0.0])) == pytest.approx(1.0)

    def test_hand_sum(self):
        assert cci(rf_histogram([-1.0, 3.0])) == pytest.approx(0.5)

    @given(samples=finite_samples)
    @settings(max_examples=100, deadline=None)
    def test_complement_identity(self, samples):
        hist = rf_histogram(samples)
        above = sum(r for x, r in hist.bins.items() if x > 0)
        assert cci(hist) + above == pytest.approx(1.0, abs=1e-9)


class TestSetpointReference:
    def test_auto_mode_averages(self):
        assert setpoint_reference(68.0, 72.0, "auto") == pytest.approx(70.0)

    def test_single_modes(self):
        assert setpoint_reference(68.0, 72.0, "heat") == 68.0
        assert setpoint_reference(68.0, 72.0, "cool") == 72.0


class TestDeviationStats:
    def test_all_rooms_at_setpoint(self):
        stats = deviation_stats(
            {"a": [72.0, 72.0], "b": [72.0, 72.0]}, "setpoint", [72.0, 72.0]
        )
        for s in stats.per_room.values():
            assert s.mean == 0.0 and s.std == 0.0 and s.min == 0.0 and s.max == 0.0

    def test_control_average_hand_case(self):
        stats = deviation_stats({"lo": [70.0, 70.0], "hi": [74.0, 74.0]}, "control-average")
        assert stats.per_room["lo"].mean == pytest.approx(-2.0)
        assert stats.per_room["hi"].mean == pytest.approx(2.0)
        assert stats.coldest_room == "lo"
        assert stats.hottest_room == "hi"

    def test_control_average_centering_identity(self):
        rng = np.random.default_rng(5)
        rooms = {f"r{i}": [float(v) for v in rng.uniform(60, 80, 30)] for i in range(4)}
        # hide some readings
        rooms["r0"][3] = None
        rooms["r2"][7] = None
        temps = np.array(
            [[np.nan if v is None else v for v in rooms[r]] for r in sorted(rooms)]
        )
        means = np.nanmean(temps, axis=0)
        residual = np.nansum(temps - means, axis=0)
        assert np.abs(residual).max() < 1e-9

    def test_no_rooms_rejected(self):
        with pytest.raises(InsufficientDataError):
            deviation_stats({}, "control-average")


class TestCdrd:
    def test_linear_rise_reaches_threshold(self):
        result = cdrd(minutes([0, 30, 60, 90]), [70.0, 71.0, 72.0, 73.0])
        assert result.minutes == pytest.approx(60.0)
        assert not result.censored

    def test_flat_series_censored(self):
        result = cdrd(minutes([0, 30, 60]), [70.0, 70.0, 70.0])
        assert result.censored and result.minutes is None

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            cdrd([], [])

    def test_absent_leading_values_skipped(self):
        result = cdrd(minutes([0, 30, 60]), [None, 70.0, 72.0])
        assert result.minutes == pytest.approx(30.0)

    @given(
        rises=st.lists(st.floats(min_value=0, max_value=1.0), min_size=3, max_size=30),
        extra=st.lists(st.floats(min_value=0, max_value=2.0), min_size=3, max_size=30),
    )
    @settings(max_examples=60, deadline=None)
    def test_antitone_under_pointwise_heating(self, rises, extra):
        n = min(len(rises), len(extra))
        base = [70.0]
        for r in rises[: n - 1]:
            base.append(base[-1] + r)
        hotter = [base[0]] + [t + e for t, e in zip(base[1:], extra)]
        times = minutes(range(0, 30 * n, 30))
        cool = cdrd(times, base)
        warm = cdrd(times, hotter)
        if cool.minutes is not None:
            assert warm.minutes is not None
            assert warm.minutes <= cool.minutes


class TestDrComfortSummary:
    def test_identical_rooms_zero_gaps(self):
        series = [70.0, 71.0, 72.0, 73.0]
        summary = dr_comfort_summary(minutes([0, 30, 60, 90]), {"a": series, "b": list(series)})
        assert summary.gap_minutes == pytest.approx(0.0)
        assert summary.gap_deviation_f == pytest.approx(0.0)

    def test_hand_gap(self):
        times = minutes([0, 10, 20, 30, 40, 50, 60, 70])
        fast = [70, 71, 72, 72, 72, 72, 72, 72.0]  # +2 at 20 min
        slow = [70, 70, 70, 70, 70, 70, 70, 72.0]  # +2 at 70 min
        summary = dr_comfort_summary(times, {"fast": fast, "slow": slow})
        assert summary.cdrd_minutes == {"fast": 20.0, "slow": 70.0}
        assert summary.gap_minutes == pytest.approx(50.0)
        assert summary.fast_room == "fast"
        assert summary.slow_room == "slow"

    def test_all_censored_keeps_deviation_gap(self):
        times = minutes([0, 30, 60])
        summary = dr_comfort_summary(times, {"a": [70, 70.5, 71.0], "b": [70, 70, 70.2]})
        assert summary.gap_minutes is None
        assert summary.fast_room is None
        assert summary.gap_deviation_f == pytest.approx(0.8)

    def test_censored_room_excluded_from_duration_gap(self):
        times = minutes([0, 30, 60])
        summary = dr_comfort_summary(
            times, {"a": [70, 72.0, 73.0], "b": [70, 70.1, 70.2], "c": [70, 71.0, 72.0]}
        )
        assert summary.cdrd_minutes["b"] is None
        assert summary.gap_minutes == pytest.approx(30.0)

    def test_single_room_rejected(self):
        with pytest.raises(InsufficientDataError):
            dr_comfort_summary(minutes([0, 30]), {"a": [70.0, 71.0]})
