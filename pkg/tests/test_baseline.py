import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trainspot.baseline import (DbscanParams, LabeledRecord, baseline_cluster, dbscan_1d,
                                read_labeled, write_labeled)
from trainspot.errors import DataError
from trainspot.records import WifiRecord


class TestDbscan:
    def test_dense_chain_single_cluster(self):
        ts = np.arange(12, dtype=float)  # 1 s spacing
        labels = dbscan_1d(ts, DbscanParams(epsilon=6, min_samples=10))
        assert set(labels.tolist()) == {0}

    def test_far_singleton_is_noise(self):
        ts = np.array([float(t) for t in range(12)] + [10_000.0])
        labels = dbscan_1d(ts, DbscanParams(epsilon=6, min_samples=10))
        assert labels[-1] == -1
        assert set(labels[:-1].tolist()) == {0}

    def test_two_separated_groups(self):
        ts = np.array([0, 1, 2, 3, 1000, 1001, 1002, 1003], dtype=float)
        labels = dbscan_1d(ts, DbscanParams(epsilon=5, min_samples=3))
        assert set(labels[:4].tolist()) == {0}
        assert set(labels[4:].tolist()) == {1}

    def test_unsorted_rejected(self):
        with pytest.raises(DataError):
            dbscan_1d(np.array([3.0, 1.0]), DbscanParams(5, 2))

    def test_empty(self):
        assert dbscan_1d(np.array([]), DbscanParams(5, 2)).size == 0


@given(st.lists(st.integers(0, 2000), min_size=1, max_size=120),
       st.integers(1, 25), st.integers(1, 8))
def test_dbscan_matches_sklearn(values, eps, min_samples):
    sklearn_cluster = pytest.importorskip("sklearn.cluster")
    ts = np.array(sorted(values), dtype=float)
    params = DbscanParams(epsilon=float(eps), min_samples=min_samples)
    mine = dbscan_1d(ts, params)
    ref = sklearn_cluster.DBSCAN(eps=float(eps), min_samples=min_samples).fit(
        ts[:, None]).labels_
    # identical noise sets and identical partitions up to label names
    assert np.array_equal(mine == -1, ref == -1)
    mapping = {}
    for a, b in zip(mine.tolist(), ref.tolist()):
        if a == -1:
            continue
        assert mapping.setdefault(a, b) == b


def rec(device, station, t):
    return WifiRecord(device, station, t)


def train_records(devices, stations, base, hop=120, spread=3):
    """One train: each device sighted at every station, `spread` seconds apart."""
    out = []
    for k, station in enumerate(stations):
        for i, device in enumerate(devices):
            out.append(rec(device, station, base + k * hop + i * spread))
    return out


PARAMS = DbscanParams(epsilon=10, min_samples=3)


class TestBaselineCluster:
    def test_single_train_single_label(self):
        records = train_records([f"d{i}" for i in range(6)], range(4), base=1000)
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        labels = {r.label for r in labeled}
        assert labels == {0}

    def test_two_trains_two_labels(self):
        records = train_records([f"a{i}" for i in range(6)], range(4), base=1000)
        records += train_records([f"b{i}" for i in range(6)], range(4), base=3000)
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        assert len({r.label for r in labeled if r.label != -1}) == 2

    def test_station_dropout_invents_a_train(self):
        # full observation hole at the middle station severs the vote chain
        devices = [f"d{i}" for i in range(6)]
        records = train_records(devices, [0], base=1000)
        records += train_records(devices, [2], base=1240)  # station 1 unseen
        other = [f"x{i}" for i in range(6)]
        records += train_records(other, [0, 1, 2], base=4000)
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        broken = {r.label for r in labeled if r.device.startswith("d")}
        assert len(broken) == 2  # one physical train, two labels

    def test_empty_station_skipped_labels_propagate(self):
        # nothing at station 1 at all: station 2 links straight back to 0
        devices = [f"d{i}" for i in range(6)]
        records = train_records(devices, [0], base=1000)
        records += train_records(devices, [2], base=1240)
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        assert len({r.label for r in labeled}) == 1

    def test_noise_never_resurrected(self):
        records = train_records([f"d{i}" for i in range(6)], range(3), base=1000)
        records.append(rec("stray", 1, 50_000))
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        stray = [r for r in labeled if r.device == "stray"]
        assert stray[0].label == -1

    def test_prefix_rerun_equality(self):
        devices = [f"d{i}" for i in range(6)]
        records = train_records(devices, range(5), base=1000)
        full = baseline_cluster(records, PARAMS, 1, 1800)
        prefix_input = [r for r in records if r.station <= 2]
        prefix = baseline_cluster(prefix_input, PARAMS, 1, 1800)
        full_prefix = [r for r in full if r.station <= 2]
        assert full_prefix == prefix

    def test_majority_tie_prefers_older_label(self):
        # two earlier trains contribute equally many linked records
        a = [f"a{i}" for i in range(3)]
        b = [f"b{i}" for i in range(3)]
        records = train_records(a, [0], base=1000, spread=2)
        records += train_records(b, [0], base=1200, spread=2)
        # both groups reach station 1 inside one merged density cluster
        records += train_records(a + b, [1], base=1400, spread=2)
        labeled = baseline_cluster(records, PARAMS, 1, 1800)
        st1 = {r.label for r in labeled if r.station == 1}
        st0 = sorted({r.label for r in labeled if r.station == 0})
        assert st1 == {st0[0]}


def test_labeled_csv_roundtrip(tmp_path):
    rows = [LabeledRecord("d1", 3, 100, 0), LabeledRecord("d2", 4, 200, -1)]
    path = tmp_path / "labeled.csv"
    with open(path, "w") as fh:
        write_labeled(rows, fh)
    assert read_labeled(path) == rows
