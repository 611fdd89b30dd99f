"""Station-wise baseline: per-station 1-D density clustering of record
timestamps, linked across stations by majority vote.

Stations are processed in increasing order. At each station the record
timestamps are DBSCAN-clustered; each cluster is then relabeled to the
majority label its member devices carried at the nearest previously
labeled station (when the sighting gap falls inside the link window), or
given a fresh train label when no such majority exists. The method is
cheap but brittle: a station-wide observation gap breaks the vote chain
and manufactures spurious trains, which is exactly the failure mode the
journey-based spectral path avoids.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import IO, Iterable

import numpy as np

from .errors import DataError
from .records import WifiRecord

LABELED_HEADER = "device,station,timestamp,label"


@dataclass(frozen=True)
class DbscanParams:
    """Density parameters: neighborhood radius (seconds) and the core
    threshold. The radius is data-dependent; the defaults suit dense
    deployments and usually need a config override."""

    epsilon: float = 6.0
    min_samples: int = 10

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


@dataclass(frozen=True)
class LabeledRecord:
    """A record plus its cluster label (-1 = noise/outlier)."""

    device: str
    station: int
    timestamp: int
    label: int

    @classmethod
    def from_record(cls, record: WifiRecord, label: int) -> "LabeledRecord":
        return cls(record.device, record.station, record.timestamp, label)

    def with_label(self, label: int) -> "LabeledRecord":
        return replace(self, label=label)


def dbscan_1d(timestamps: np.ndarray, params: DbscanParams) -> np.ndarray:
    """DBSCAN specialised to sorted 1-D data.

    Core points have >= min_samples points within +-epsilon (the point
    itself included); consecutive core points within epsilon chain into
    one cluster; non-core points within epsilon of a core join the
    cluster of the leftmost such core; the rest are noise (-1).
    """
    ts = np.asarray(timestamps, dtype=float)
    n = len(ts)
    if n == 0:
        return np.empty(0, dtype=int)
    if np.any(np.diff(ts) < 0):
        raise DataError("dbscan_1d expects ascending timestamps")
    eps = params.epsilon

    counts = np.searchsorted(ts, ts + eps, side="right") - np.searchsorted(ts, ts - eps, side="left")
    core = counts >= params.min_samples

    labels = np.full(n, -1, dtype=int)
    cluster = -1
    prev_core_t = None
    for i in np.nonzero(core)[0]:
        if prev_core_t is None or ts[i] - prev_core_t > eps:
            cluster += 1
        labels[i] = cluster
        prev_core_t = ts[i]

    core_idx = np.nonzero(core)[0]
    if len(core_idx):
        core_ts = ts[core_idx]
        for i in np.nonzero(~core)[0]:
            pos = np.searchsorted(core_ts, ts[i] - eps, side="left")
            if pos < len(core_ts) and core_ts[pos] - ts[i] <= eps:
                labels[i] = labels[core_idx[pos]]
    return labels


def baseline_cluster(records: Iterable[WifiRecord], params: DbscanParams,
                     link_min_s: int = 1, link_max_s: int = 1800) -> list[LabeledRecord]:
    """Label records station by station with majority-vote train linking.

    A record links backwards when the same device was sighted at the
    nearest previously labeled station between ``link_min_s`` and
    ``link_max_s`` seconds earlier. Majority ties prefer the smaller
    (older) train label; a majority of unlinked records starts a new
    train. Records the clusterer marks as noise keep label -1 throughout.
    Output is ordered by (station, timestamp, device).
    """
    if link_min_s < 0 or link_max_s < link_min_s:
        raise ValueError("require 0 <= link_min_s <= link_max_s")
    by_station: dict[int, list[WifiRecord]] = {}
    for r in records:
        by_station.setdefault(r.station, []).append(r)

    out: list[LabeledRecord] = []
    prev_sightings: dict[str, list[tuple[int, int]]] = {}
    next_label = 0
    for station in sorted(by_station):
        recs = sorted(by_station[station], key=lambda r: (r.timestamp, r.device))
        raw = dbscan_1d(np.array([r.timestamp for r in recs], dtype=float), params)
        station_final: dict[int, int] = {}
        for cluster_id in sorted(set(raw[raw >= 0].tolist())):
            members = [recs[i] for i in np.nonzero(raw == cluster_id)[0]]
            # majority among records whose device was sighted at the previous
            # labeled station inside the link window; unlinked records abstain
            votes = []
            for rec in members:
                vote = None
                for t_prev, label_prev in prev_sightings.get(rec.device, ()):
                    gap = rec.timestamp - t_prev
                    if link_min_s <= gap <= link_max_s:
                        vote = label_prev  # latest qualifying sighting wins
                if vote is not None:
                    votes.append(vote)
            if votes:
                counts = Counter(votes)
                top = max(counts.values())
                final = min(lab for lab, c in counts.items() if c == top)
            else:
                final = next_label
                next_label += 1
            station_final[cluster_id] = final
        labeled = [
            LabeledRecord.from_record(rec, station_final.get(raw_label, -1))
            for rec, raw_label in zip(recs, raw.tolist())
        ]
        out.extend(labeled)
        sightings: dict[str, list[tuple[int, int]]] = {}
        for lr in labeled:
            if lr.label != -1:
                sightings.setdefault(lr.device, []).append((lr.timestamp, lr.label))
        if sightings:
            prev_sightings = sightings
    return out


# --- shared labeled-record CSV ----------------------------------------------

def write_labeled(records: Iterable[LabeledRecord], stream: IO[str]) -> None:
    stream.write(LABELED_HEADER + "\n")
    for r in records:
        stream.write(f"{r.device},{r.station},{r.timestamp},{r.label}\n")


def read_labeled(path) -> list[LabeledRecord]:
    out: list[LabeledRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != LABELED_HEADER:
            raise DataError(f"bad header {header!r}, expected {LABELED_HEADER!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            device, station, ts, label = line.split(",")
            out.append(LabeledRecord(device, int(station), int(ts), int(label)))
    return out
