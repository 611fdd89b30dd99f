import io
import statistics

import numpy as np
import pytest

from trainspot.baseline import LabeledRecord
from trainspot.errors import DataError
from trainspot.journeys import Journey, Leg
from trainspot.timetable import (HeadwayEntry, KpiSeries, StationTimes, TrainTimetable,
                                 compute_kpis, derive_timetable, detect_incidents,
                                 dwell_times, headways, interpolate_missing,
                                 merge_duplicate_trains, read_timetables,
                                 write_timetables)


def lrec(device, station, t, label):
    return LabeledRecord(device, station, t, label)


def cluster_records(label, stations_times, devices=4):
    out = []
    for station, (arr, dep) in stations_times.items():
        for i in range(devices):
            t = arr + round(i * (dep - arr) / max(1, devices - 1)) if dep > arr else arr
            out.append(lrec(f"c{label}_{i}", station, t, label))
    return out


def make_train(train_id, stops, direction=1):
    return TrainTimetable(train_id, direction,
                          {s: StationTimes(a, d, o) for s, (a, d, o) in stops.items()})


class TestDerive:
    def test_envelope_min_max(self):
        records = [lrec(f"d{i}", 9, 500 + i * 12, 1) for i in range(6)]
        trains = derive_timetable(records + [lrec("x", 10, 700, 1)])
        st = trains[0].stops[9]
        assert (st.arrival, st.departure) == (500, 560)

    def test_boarding_station_reattached_from_trimmed_journeys(self):
        records = [lrec(f"d{i}", 9, 500 + i * 12, 1) for i in range(6)]
        records += [lrec(f"d{i}", 10, 640 + i * 5, 1) for i in range(3)]
        trimmed = Journey("d0", (Leg(2, 480, 480), Leg(9, 512, 548), Leg(10, 640, 640)), 1)
        trains = derive_timetable(records, level2=[(trimmed, 1)])
        assert 2 in trains[0].stops
        assert trains[0].stops[2].arrival <= 480

    def test_interior_gap_interpolated(self):
        records = [lrec("a", 3, 100, 1), lrec("b", 3, 100, 1),
                   lrec("a", 5, 300, 1), lrec("b", 5, 320, 1)]
        trains = derive_timetable(records)
        st4 = trains[0].stops[4]
        assert not st4.observed
        assert st4.arrival == st4.departure == 200

    def test_noise_and_thin_clusters_dropped(self):
        records = [lrec("a", 1, 100, -1), lrec("b", 2, 100, 3)]
        assert derive_timetable(records) == []

    def test_trains_ordered_and_renumbered_by_first_departure(self):
        records = cluster_records(5, {2: (900, 940), 3: (1050, 1080)})
        records += cluster_records(9, {2: (300, 340), 3: (450, 480)})
        trains = derive_timetable(records)
        assert [t.train_id for t in trains] == [1, 2]
        assert trains[0].stops[2].arrival == 300

    def test_record_order_invariance(self, rng):
        records = cluster_records(1, {2: (300, 340), 3: (450, 480), 4: (600, 640)})
        shuffled = list(records)
        rng.shuffle(shuffled)
        a = derive_timetable(records)
        b = derive_timetable(shuffled)
        assert [t.stops for t in a] == [t.stops for t in b]

    def test_descending_direction_detected(self):
        records = cluster_records(1, {7: (100, 140), 6: (250, 280), 5: (400, 430)})
        trains = derive_timetable(records)
        assert trains[0].direction == -1
        trains[0].check()

    def test_disordered_envelope_entry_discarded(self):
        records = cluster_records(1, {2: (300, 340), 3: (450, 480), 4: (600, 640)})
        records.append(lrec("late", 3, 5000, 1))  # pushes dep@3 past dep@4
        trains = derive_timetable(records)
        assert len(trains) == 1
        trains[0].check()


class TestInterpolate:
    def test_linear_midpoint(self):
        tt = make_train(1, {3: (80, 100, True), 5: (300, 330, True)})
        out = interpolate_missing(tt)
        assert out.stops[4] == StationTimes(200, 200, False)

    def test_fully_observed_unchanged(self):
        tt = make_train(1, {3: (80, 100, True), 4: (200, 220, True)})
        out = interpolate_missing(tt)
        assert out.stops == tt.stops

    def test_piecewise_not_globally_linear(self):
        tt = make_train(1, {0: (0, 10, True), 2: (400, 420, True), 4: (500, 520, True)})
        out = interpolate_missing(tt)
        assert out.stops[1].arrival == round((10 + 400) / 2)
        assert out.stops[3].arrival == round((420 + 500) / 2)
        assert out.stops[1].arrival != out.stops[3].arrival

    def test_observed_entries_never_altered(self):
        tt = make_train(1, {3: (80, 100, True), 6: (600, 630, True)})
        out = interpolate_missing(tt)
        assert out.stops[3] == tt.stops[3]
        assert out.stops[6] == tt.stops[6]

    def test_single_station_dropped(self):
        tt = make_train(1, {3: (80, 100, True)})
        assert interpolate_missing(tt) is None


class TestKpis:
    trains = [
        make_train(1, {5: (1000, 1050, True)}),
        make_train(2, {5: (1300, 1350, True)}),
        make_train(3, {5: (1600, 1660, True)}),
    ]

    def test_arrival_headways(self):
        hw = headways(self.trains, 5, "arrival")
        assert [h.seconds for h in hw] == [300, 300]

    def test_departure_to_next_arrival(self):
        hw = headways(self.trains, 5, "departure")
        assert [h.seconds for h in hw] == [250, 250]

    def test_single_train_empty(self):
        assert headways(self.trains[:1], 5) == []

    def test_telescoping_sum(self):
        hw = headways(self.trains, 5, "arrival")
        assert sum(h.seconds for h in hw) == 1600 - 1000

    def test_mode_identity_per_pair(self):
        arr = headways(self.trains, 5, "arrival")
        dep = headways(self.trains, 5, "departure")
        dwells = {d.train: d.seconds for d in dwell_times(self.trains, 5)}
        for a, d in zip(arr, dep):
            assert d.seconds == a.seconds - dwells[a.lead_train]

    def test_dwells(self):
        dw = dwell_times([make_train(1, {2: (500, 560, True)})], 2)
        assert dw[0].seconds == 60
        dw = dwell_times([make_train(1, {2: (500, 500, True)})], 2)
        assert dw[0].seconds == 0

    def test_interpolated_dwell_flagged(self):
        tt = make_train(1, {3: (80, 100, True), 5: (300, 330, True)})
        out = interpolate_missing(tt)
        dw = {d.train: d for d in dwell_times([out], 4)}
        assert dw[1].seconds == 0 and not dw[1].observed

    def test_mixed_directions_rejected(self):
        up = make_train(1, {5: (100, 120, True)}, direction=1)
        down = make_train(2, {5: (400, 420, True)}, direction=-1)
        with pytest.raises(ValueError):
            headways([up, down], 5)
        series = compute_kpis([up, down], 5)
        assert len(series.dwells) == 2


class TestIncidents:
    def series(self, values):
        entries = []
        t = 0
        for i, v in enumerate(values):
            entries.append(HeadwayEntry(i + 1, i + 2, v, t))
            t += v
        return KpiSeries(15, headways=entries)

    def test_constant_headways_no_flags(self):
        assert detect_incidents(self.series([300] * 20), 10, 3.5) == []

    def test_spike_flagged_with_robust_z(self):
        series = self.series([300] * 10 + [1800, 300, 300])
        flags = detect_incidents(series, 10, 3.5)
        assert len(flags) >= 1
        first = flags[0]
        assert first.value_seconds == 1800
        # trailing window is constant, so the z-score uses the 60 s floor
        assert first.zscore == pytest.approx((1800 - 300) / 60.0)
        assert first.time == series.headways[10].start_time

    def test_threshold_respected(self):
        series = self.series([300] * 10 + [480])
        assert detect_incidents(series, 10, 3.5) == []

    def test_short_series_unflagged(self):
        assert detect_incidents(self.series([300, 2000]), 10, 3.5) == []


class TestMergeDuplicates:
    def test_same_train_seen_twice_merges_to_union(self):
        a = make_train(1, {2: (100, 130, True), 3: (250, 280, True)})
        b = make_train(2, {2: (110, 135, True), 3: (255, 280, True), 4: (400, 430, True)})
        merged = merge_duplicate_trains([a, b], 60)
        assert len(merged) == 1
        assert merged[0].stops[2].arrival == 100
        assert merged[0].stops[4].departure == 430

    def test_distinct_trains_survive(self):
        a = make_train(1, {2: (100, 130, True), 3: (250, 280, True)})
        b = make_train(2, {2: (400, 430, True), 3: (550, 580, True)})
        assert len(merge_duplicate_trains([a, b], 60)) == 2

    def test_interpolated_disagreement_tolerated(self):
        a = TrainTimetable(1, 1, {
            2: StationTimes(100, 130, True),
            3: StationTimes(240, 240, False),
            4: StationTimes(400, 430, True),
        })
        b = make_train(2, {2: (105, 132, True), 3: (330, 360, True)})
        merged = merge_duplicate_trains([a, b], 60)
        assert len(merged) == 1

    def test_opposite_directions_never_merge(self):
        a = make_train(1, {2: (100, 130, True), 3: (250, 280, True)}, direction=1)
        b = make_train(2, {3: (100, 130, True), 2: (250, 280, True)}, direction=-1)
        assert len(merge_duplicate_trains([a, b], 60)) == 2


def test_timetable_csv_roundtrip(tmp_path):
    trains = [
        make_train(1, {2: (100, 130, True), 3: (240, 240, False), 4: (400, 430, True)}),
        make_train(2, {2: (700, 730, True), 3: (850, 880, True)}),
    ]
    buf = io.StringIO()
    write_timetables(trains, buf)
    path = tmp_path / "tt.csv"
    path.write_text(buf.getvalue())
    back = read_timetables(path)
    assert [t.train_id for t in back] == [1, 2]
    assert back[0].stops == trains[0].stops
    assert back[1].direction == 1


def test_timetable_header_enforced(tmp_path):
    path = tmp_path / "tt.csv"
    path.write_text("nope\n")
    with pytest.raises(DataError):
        read_timetables(path)
