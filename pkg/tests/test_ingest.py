import logging
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_trace
from thermokit.errors import (
    DataError,
    InsufficientDataError,
    MissingColumnError,
    ParseError,
)
from thermokit.ingest import (
    COMFORT_EXCLUSIVE,
    PARAMID_SPAN,
    ColumnMapping,
    HouseMetadata,
    canonical_mapping,
    parse_metadata,
    parse_trace,
    resample_hourly,
    segment_seasons,
    summarize_metadata,
    write_trace,
)

MAPPING = ColumnMapping(
    timestamp="time",
    outdoor_temp="t_out",
    thermostat_temp="t_stat",
    heat_runtimes=("heat1",),
    cool_runtimes=("cool1",),
    sensor_temps=("s1",),
)


def csv_text(rows, header="time,t_out,t_stat,heat1,cool1,s1"):
    return header + "\n" + "\n".join(rows) + "\n"


def five_minute_rows(n, start="2017-06-01 00:00:00"):
    t0 = datetime.strptime(start, "%Y-%m-%d %H:%M:%S")
    return [
        f"{(t0 + timedelta(seconds=300 * i)).strftime('%Y-%m-%d %H:%M:%S')},85,72,0,300,73.5"
        for i in range(n)
    ]


def trace_of(records, interval_s=3600):
    trace = make_trace(datetime(2017, 1, 1), 0, interval_s=interval_s)
    trace.records[:] = records
    return trace


class TestParseTrace:
    def test_well_formed_rows(self):
        trace = parse_trace(csv_text(five_minute_rows(12)), MAPPING, house_id="x")
        assert len(trace.records) == 12
        assert trace.interval_seconds == 300
        assert trace.records[0].cool_runtimes == (300.0,)
        assert trace.records[0].sensor_temps == (73.5,)

    def test_duplicate_timestamps_drop_later_with_warning(self, caplog):
        rows = five_minute_rows(3)
        rows.insert(2, rows[1].replace(",85,", ",99,"))
        with caplog.at_level(logging.WARNING):
            trace = parse_trace(csv_text(rows), MAPPING)
        assert len(trace.records) == 3
        # the first occurrence wins
        assert trace.records[1].outdoor_temp == 85.0
        assert any("duplicate" in r.message for r in caplog.records)

    def test_missing_mapped_column_is_an_error(self):
        text = csv_text(
            ["2017-06-01 00:00:00,72,0,300,73.5"], header="time,t_stat,heat1,cool1,s1"
        )
        with pytest.raises(MissingColumnError, match="t_out"):
            parse_trace(text, MAPPING)

    def test_unparsable_cell_reports_row(self):
        rows = five_minute_rows(3)
        rows[1] = rows[1].replace("85", "oops")
        with pytest.raises(ParseError, match="row 2"):
            parse_trace(csv_text(rows), MAPPING)

    def test_unsorted_rows_are_sorted(self):
        rows = five_minute_rows(3)
        trace = parse_trace(csv_text([rows[2], rows[0], rows[1]]), MAPPING)
        stamps = [r.timestamp for r in trace.records]
        assert stamps == sorted(stamps)

    def test_absent_cells_become_none_and_zero_runtime(self):
        text = csv_text(["2017-06-01 00:00:00,,72,,NA,"])
        trace = parse_trace(text, MAPPING)
        rec = trace.records[0]
        assert rec.outdoor_temp is None
        assert rec.heat_runtimes == (0.0,)
        assert rec.cool_runtimes == (0.0,)
        assert rec.sensor_temps == (None,)

    def test_runtime_above_interval_rejected(self):
        rows = five_minute_rows(3)
        rows[1] = rows[1].replace(",0,300,", ",0,9999,")
        with pytest.raises(DataError, match="runtime"):
            parse_trace(csv_text(rows), MAPPING)

    def test_empty_file_rejected(self):
        with pytest.raises(DataError):
            parse_trace("time,t_out,t_stat,heat1,cool1,s1\n", MAPPING)

    def test_round_trip_identity(self, tmp_path):
        rows = five_minute_rows(20)
        rows[3] = rows[3].replace("73.5", "")  # an absent sensor reading
        trace = parse_trace(csv_text(rows), MAPPING, house_id="h")
        path = tmp_path / "trace.csv"
        write_trace(trace, path)
        again = parse_trace(path, canonical_mapping(1), house_id="h")
        assert again == trace

    @given(temps=st.lists(st.floats(min_value=-40, max_value=120), min_size=2, max_size=40))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_random_temps(self, tmp_path_factory, temps):
        tmp = tmp_path_factory.mktemp("rt")
        trace = make_trace(
            datetime(2017, 3, 1), len(temps), thermostat=[float(t) for t in temps]
        )
        path = tmp / "t.csv"
        write_trace(trace, path)
        again = parse_trace(path, canonical_mapping(0), house_id="h")
        assert [r.thermostat_temp for r in again.records] == [
            r.thermostat_temp for r in trace.records
        ]


class TestResampleHourly:
    def test_full_hour_of_cooling(self):
        trace = make_trace(datetime(2017, 6, 1), 12, cool=300.0)
        hours = resample_hourly(trace)
        assert len(hours) == 1
        assert hours[0].cool_seconds == 3600.0

    def test_stages_combine_into_one_metric(self):
        trace = make_trace(datetime(2017, 1, 1), 12)
        trace.records[0].heat_runtimes = (300.0, 300.0)
        trace.records[1].heat_runtimes = (300.0, 300.0)
        hours = resample_hourly(trace)
        assert hours[0].heat_seconds == 1200.0

    def test_mean_of_present_readings(self):
        temps = [70.0] * 6 + [None] * 6
        trace = make_trace(datetime(2017, 6, 1), 12, thermostat=temps)
        hours = resample_hourly(trace)
        assert hours[0].thermostat_temp == 70.0
        assert hours[0].coverage == pytest.approx(1.0)
        # an hour whose readings are all absent keeps an absent mean
        trace2 = make_trace(datetime(2017, 6, 1), 12, thermostat=[None] * 12)
        assert resample_hourly(trace2)[0].thermostat_temp is None

    def test_half_coverage(self):
        trace = make_trace(datetime(2017, 6, 1), 6, thermostat=70.0)
        assert resample_hourly(trace)[0].coverage == pytest.approx(0.5)

    def test_runtime_conservation(self):
        rng = np.random.default_rng(7)
        heat = [float(rng.uniform(0, 300)) for _ in range(50)]
        trace = make_trace(datetime(2017, 1, 1), 50, heat=heat)
        hours = resample_hourly(trace)
        assert sum(h.heat_seconds for h in hours) == pytest.approx(sum(heat))

    def test_sensor_count_is_present_remote_sensors(self):
        trace = make_trace(
            datetime(2017, 6, 1),
            12,
            sensors=[[71.0] * 12, [None] * 12, [73.0] * 12],
        )
        assert resample_hourly(trace)[0].sensor_count == 2

    def test_empty_trace_rejected(self):
        with pytest.raises(InsufficientDataError):
            resample_hourly(make_trace(datetime(2017, 1, 1), 0))


def day_records(day_start, heat_on=False, cool_on=False):
    """One record per hour for one day."""
    return make_trace(
        day_start,
        24,
        interval_s=3600,
        heat=120.0 if heat_on else 0.0,
        cool=120.0 if cool_on else 0.0,
    ).records


class TestSegmentSeasons:
    def test_cooling_only_window(self):
        records = []
        for month, days, heat_on, cool_on in (
            (1, 31, True, False),
            (6, 92, False, True),
            (11, 30, True, False),
        ):
            start = datetime(2017, month, 1)
            for d in range(days):
                records.extend(day_records(start + timedelta(days=d), heat_on, cool_on))
        windows = {w.mode: w for w in segment_seasons(trace_of(records), COMFORT_EXCLUSIVE)}
        assert windows["cooling"].start == datetime(2017, 6, 1)
        assert windows["cooling"].end.date() == datetime(2017, 8, 31).date()

    def test_paramid_span_first_to_last_activation(self):
        records = []
        records.extend(day_records(datetime(2017, 10, 15), heat_on=True))
        for d in range(1, 30):
            records.extend(day_records(datetime(2017, 10, 15) + timedelta(days=d)))
        records.extend(day_records(datetime(2018, 4, 20), heat_on=True))
        windows = {w.mode: w for w in segment_seasons(trace_of(records), PARAMID_SPAN)}
        assert windows["heating"].start == datetime(2017, 10, 15)
        assert windows["heating"].end.date() == datetime(2018, 4, 20).date()

    def test_paramid_ignores_summer_heating(self):
        records = []
        records.extend(day_records(datetime(2017, 3, 1), heat_on=True))
        records.extend(day_records(datetime(2017, 7, 1), heat_on=True))  # excluded month
        records.extend(day_records(datetime(2017, 10, 1)))
        windows = {w.mode: w for w in segment_seasons(trace_of(records), PARAMID_SPAN)}
        assert windows["heating"].end.date() == datetime(2017, 3, 1).date()

    def test_alternating_modes_cap_window_length(self):
        records = []
        for d in range(10):
            records.extend(
                day_records(
                    datetime(2017, 1, 1) + timedelta(days=d),
                    heat_on=(d % 2 == 0),
                    cool_on=(d % 2 == 1),
                )
            )
        for window in segment_seasons(trace_of(records), COMFORT_EXCLUSIVE):
            assert window.end - window.start <= timedelta(days=1)

    def test_window_contains_no_opposite_runtime(self):
        rng = np.random.default_rng(3)
        records = []
        for d in range(20):
            kind = rng.choice(["heat", "cool", "off"])
            records.extend(
                day_records(datetime(2017, 1, 1) + timedelta(days=d), kind == "heat", kind == "cool")
            )
        trace = trace_of(records)
        for window in segment_seasons(trace, COMFORT_EXCLUSIVE):
            opposite_is_cool = window.mode == "heating"
            for r in trace.records:
                if window.start <= r.timestamp <= window.end:
                    runtime = r.cool_seconds if opposite_is_cool else r.heat_seconds
                    assert runtime == 0

    def test_no_activations_mean_no_window(self):
        records = []
        for d in range(3):
            records.extend(day_records(datetime(2017, 1, 1) + timedelta(days=d)))
        assert segment_seasons(trace_of(records), COMFORT_EXCLUSIVE) == []

    def test_short_trace_rejected(self):
        with pytest.raises(InsufficientDataError):
            segment_seasons(make_trace(datetime(2017, 1, 1), 12), COMFORT_EXCLUSIVE)


def meta(house_id="m1", sensors=0, **kwargs):
    return HouseMetadata(house_id=house_id, num_remote_sensors=sensors, **kwargs)


class TestSummarizeMetadata:
    def test_at_least_one_share(self):
        report = summarize_metadata([meta(sensors=0), meta(sensors=1), meta(sensors=1)])
        assert report.at_least_one_share == pytest.approx(2 / 3)

    def test_degenerate_slider_distribution(self):
        rows = [
            meta(house_id=f"m{i}", eco_plus_enrolled=True, eco_plus_slider=4)
            for i in range(3)
        ]
        report = summarize_metadata(rows)
        assert report.slider_shares == {4: pytest.approx(1.0)}

    def test_shares_sum_to_one(self):
        rng = np.random.default_rng(0)
        rows = [meta(house_id=f"m{i}", sensors=int(rng.integers(0, 9))) for i in range(200)]
        report = summarize_metadata(rows)
        assert sum(report.sensor_count_shares.values()) == pytest.approx(1.0, abs=1e-9)

    def test_cumulative_share_at_zero_is_one(self):
        rows = [meta(house_id=f"m{i}", sensors=i % 3) for i in range(30)]
        report = summarize_metadata(rows)
        assert report.cumulative_at_least[0] == pytest.approx(1.0)

    def test_per_attribute_cleaning(self):
        rows = [
            meta(house_id="a", sensors=1, floor_area=50.0, num_occupants=2),
            meta(house_id="b", sensors=2, floor_area=1500.0, num_occupants=0),
            meta(house_id="c", sensors=3, floor_area=2500.0, num_occupants=3),
        ]
        report = summarize_metadata(rows)
        # the area rule drops house a only; the occupants rule drops house b only
        assert report.cleaning["area"]["kept"] == 2
        assert report.cleaning["occupants"]["kept"] == 2
        area_counts = sum(sum(cell.values()) for cell in report.cross_tabs["area"].values())
        assert area_counts == 2

    def test_empty_input_rejected(self):
        with pytest.raises(InsufficientDataError):
            summarize_metadata([])

    def test_parse_metadata_roundtrip(self):
        text = (
            "house_id,num_remote_sensors,floor_area,num_occupants,num_floors,"
            "state_code,eco_plus_enrolled,eco_plus_slider\n"
            "h1,3,1800,2,2,PA,true,4\n"
            "h2,0,,,,,,\n"
        )
        rows = parse_metadata(text)
        assert rows[0].num_remote_sensors == 3
        assert rows[0].eco_plus_enrolled is True
        assert rows[1].floor_area is None

    def test_negative_sensor_count_rejected(self):
        with pytest.raises(ParseError):
            parse_metadata("house_id,num_remote_sensors\nh,-1\n")
