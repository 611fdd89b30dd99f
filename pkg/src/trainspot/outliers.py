"""Post-clustering outlier removal.

Two failure modes need cleaning after records carry train labels:

* mis-segmented journeys leave records whose label disagrees with the
  records around them at a station — removed when the label differs
  from the majority of the k nearest same-station records;
* intrinsic probe-timing noise leaves records far from their own
  cluster's time center — removed by a robust deviation test using the
  median absolute deviation (sigma ~= 1.4826 * MAD for Gaussian data).

Both filters only ever drop records; surviving labels are untouched.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .baseline import LabeledRecord

MAD_SIGMA_FACTOR = 1.4826


@dataclass(frozen=True)
class OutlierParams:
    k_neighbors: int = 5
    sigma_cutoff: float = 3.5

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.sigma_cutoff <= 0:
            raise ValueError("sigma_cutoff must be > 0")


def mad(values: Sequence[float]) -> float:
    """Median absolute deviation from the median."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("mad of an empty sequence")
    return float(np.median(np.abs(arr - np.median(arr))))


def mad_sigma(values: Sequence[float]) -> float:
    """Robust standard-deviation estimate, 1.4826 * MAD."""
    return MAD_SIGMA_FACTOR * mad(values)


def knn_filter(records: Sequence[LabeledRecord], k: int = 5) -> list[LabeledRecord]:
    """Drop records whose label loses the vote of their k nearest
    same-station records (by time distance, the record itself excluded).

    Stations with fewer than k other records vote with what they have; a
    record with no co-located records, or a tied vote, is kept.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    by_station: dict[int, list[int]] = {}
    for idx, rec in enumerate(records):
        by_station.setdefault(rec.station, []).append(idx)

    drop = set()
    for station in sorted(by_station):
        idxs = sorted(by_station[station],
                      key=lambda i: (records[i].timestamp, records[i].device))
        n = len(idxs)
        ts = [records[i].timestamp for i in idxs]
        labs = [records[i].label for i in idxs]
        for pos in range(n):
            if n == 1:
                continue
            # merge-walk outwards; ties on |dt| take the earlier record
            left, right = pos - 1, pos + 1
            votes: Counter = Counter()
            for _ in range(min(k, n - 1)):
                d_left = ts[pos] - ts[left] if left >= 0 else None
                d_right = ts[right] - ts[pos] if right < n else None
                if d_right is None or (d_left is not None and d_left <= d_right):
                    votes[labs[left]] += 1
                    left -= 1
                else:
                    votes[labs[right]] += 1
                    right += 1
            top = max(votes.values())
            winners = [lab for lab, c in votes.items() if c == top]
            if len(winners) == 1 and winners[0] != labs[pos]:
                drop.add(idxs[pos])
    return [rec for idx, rec in enumerate(records) if idx not in drop]


def mad_filter(records: Sequence[LabeledRecord], sigma_cutoff: float = 3.5) -> list[LabeledRecord]:
    """Drop records deviating from their (station, cluster) median by at
    least ``sigma_cutoff`` robust sigmas.

    Noise records (label -1) pass through untouched; groups of one
    record are kept; a zero-spread group only sheds records that differ
    from its median at all.
    """
    if sigma_cutoff <= 0:
        raise ValueError("sigma_cutoff must be > 0")
    groups: dict[tuple[int, int], list[int]] = {}
    for idx, rec in enumerate(records):
        if rec.label != -1:
            groups.setdefault((rec.station, rec.label), []).append(idx)

    drop = set()
    for key in sorted(groups):
        idxs = groups[key]
        if len(idxs) < 2:
            continue
        ts = np.array([records[i].timestamp for i in idxs], dtype=float)
        center = float(np.median(ts))
        threshold = sigma_cutoff * mad_sigma(ts)
        dev = np.abs(ts - center)
        if threshold > 0:
            bad = dev >= threshold
        else:
            bad = dev > 0
        for i, is_bad in zip(idxs, bad.tolist()):
            if is_bad:
                drop.add(i)
    return [rec for idx, rec in enumerate(records) if idx not in drop]


def apply_filters(records: Sequence[LabeledRecord], params: OutlierParams,
                  order: Iterable[str] = ("knn", "mad")) -> list[LabeledRecord]:
    """Run the configured filters in order (default: label vote, then
    robust deviation, matching the two noise sources' narrative order)."""
    out = list(records)
    for name in order:
        if name == "knn":
            out = knn_filter(out, params.k_neighbors)
        elif name == "mad":
            out = mad_filter(out, params.sigma_cutoff)
        else:
            raise ValueError(f"unknown outlier filter {name!r}")
    return out
