"""Journey segmentation and cleaning.

A journey is a maximal stretch of one device's extremity stream that is
plausibly a single ride: consecutive sightings at one station no more
than ``intra_gap_s`` apart, any two sightings no more than
``inter_gap_s`` apart, and station indices monotone in one direction.
Segmentation is a greedy left-to-right scan, which approximates the
set-maximality ideal in linear time and is deterministic.

Three cleaning levels control how boarding/alighting platform noise is
handled before clustering:

* RAW        — keep everything;
* TRIM_ENDS  — keep only the last sighting at the boarding station and
               the first sighting at the alighting station;
* DROP_ENDS  — remove boarding and alighting stations entirely.

The standard recipe is hybrid: DROP_ENDS journeys identify trains,
TRIM_ENDS journeys supply the timestamps for the timetable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .records import ExtremityRecord


@dataclass(frozen=True)
class JourneyParams:
    """Segmentation gaps, in seconds.

    ``intra_gap_s`` caps the spread of same-station sightings inside one
    journey (roughly the largest credible silence of a probing device);
    ``inter_gap_s`` caps the spread across stations (roughly the longest
    credible ride including delays).
    """

    intra_gap_s: int = 480
    inter_gap_s: int = 1800

    def __post_init__(self):
        if not (0 < self.intra_gap_s <= self.inter_gap_s):
            raise ValueError("require 0 < intra_gap_s <= inter_gap_s")


class Leg(NamedTuple):
    """One station visit inside a journey."""

    station: int
    first: int
    last: int


class CleaningLevel(Enum):
    RAW = 1
    TRIM_ENDS = 2
    DROP_ENDS = 3


# largest credible time per skipped station when a journey jumps over
# unobserved stops; a silence slower than this is a break, not a ride
SKIP_HOP_GAP_S = 300


@dataclass(frozen=True)
class Journey:
    """Direction-monotone station visits of one device on (at most) one train.

    ``direction`` is +1/-1 for multi-station journeys and 0 when a single
    station leaves it undefined.
    """

    device: str
    legs: tuple[Leg, ...]
    direction: int

    def __post_init__(self):
        if not self.legs:
            raise ValueError("journey must have at least one leg")

    @property
    def stations(self) -> tuple[int, ...]:
        return tuple(leg.station for leg in self.legs)

    @property
    def start(self) -> int:
        return self.legs[0].first

    @property
    def end(self) -> int:
        return self.legs[-1].last

    @property
    def midtime(self) -> float:
        return 0.5 * (self.start + self.end)

    @property
    def boarding(self) -> int:
        return self.legs[0].station

    @property
    def alighting(self) -> int:
        return self.legs[-1].station

    def check(self, params: JourneyParams) -> None:
        """Assert the segmentation invariants; used by tests."""
        stations = self.stations
        if len(set(stations)) != len(stations):
            raise AssertionError("repeated station in journey")
        for leg in self.legs:
            if leg.last - leg.first > params.intra_gap_s:
                raise AssertionError("leg span exceeds intra gap")
        for i, a in enumerate(self.legs):
            for b in self.legs[i + 1:]:
                if b.last - a.first > params.inter_gap_s:
                    raise AssertionError("cross-leg span exceeds inter gap")
        if len(self.legs) > 1:
            diffs = np.diff(stations)
            if self.direction not in (-1, 1) or np.any(np.sign(diffs) != self.direction):
                raise AssertionError("stations not monotone in direction")


def extract_journeys(extremities: Sequence[ExtremityRecord],
                     params: JourneyParams) -> list[Journey]:
    """Segment one device's extremity stream into journeys.

    Greedy scan: a new journey starts whenever appending the next
    extremity would break a gap or monotonicity condition. Stays longer
    than ``intra_gap_s`` (e.g. a train held at a platform) are split into
    their two endpoint sightings first, since no single journey can
    contain both.
    """
    if not extremities:
        return []
    device = extremities[0].device
    items: list[tuple[int, int, int]] = []
    prev_first = None
    for e in extremities:
        if e.device != device:
            raise DataError("extract_journeys expects a single device")
        if prev_first is not None and e.first < prev_first:
            raise DataError("extremities must be sorted by first timestamp")
        prev_first = e.first
        if e.span > params.intra_gap_s:
            items.append((e.station, e.first, e.first))
            items.append((e.station, e.last, e.last))
        else:
            items.append((e.station, e.first, e.last))

    journeys: list[Journey] = []
    cur: list[Leg] = []
    direction = 0

    def flush():
        nonlocal cur, direction
        if cur:
            journeys.append(Journey(device, tuple(cur), direction))
        cur = []
        direction = 0

    for station, first, last in items:
        if not cur:
            cur.append(Leg(station, first, last))
            continue
        tail = cur[-1]
        if station == tail.station:
            merged_ok = last - tail.first <= params.intra_gap_s
            other_firsts = [leg.first for leg in cur if leg.station != station]
            if other_firsts and last - min(other_firsts) > params.inter_gap_s:
                merged_ok = False
            if merged_ok:
                cur[-1] = Leg(station, tail.first, last)
                continue
        else:
            step = 1 if station > tail.station else -1
            dir_ok = direction in (0, step)
            seen_ok = station not in {leg.station for leg in cur}
            span_ok = last - cur[0].first <= params.inter_gap_s
            # skipping stations is only credible at through-ride speed: a
            # long silence across a skip marks a new journey, not a ride
            hops = abs(station - tail.station)
            skip_ok = hops == 1 or first - tail.last <= hops * SKIP_HOP_GAP_S
            if dir_ok and seen_ok and span_ok and skip_ok:
                cur.append(Leg(station, first, last))
                if direction == 0:
                    direction = step
                continue
        flush()
        cur.append(Leg(station, first, last))
    flush()
    return journeys


def extract_all_journeys(extremities_by_device: dict[str, list[ExtremityRecord]],
                         params: JourneyParams) -> list[Journey]:
    """Extract journeys for every device, in sorted device order."""
    out: list[Journey] = []
    for device in sorted(extremities_by_device):
        out.extend(extract_journeys(extremities_by_device[device], params))
    return out


def apply_cleaning(journey: Journey, level: CleaningLevel) -> Journey | None:
    """Apply one cleaning level; returns None when nothing is left.

    TRIM_ENDS collapses the boarding leg to its last sighting and the
    alighting leg to its first (a single-leg journey collapses to its
    final sighting). DROP_ENDS removes both end legs, so journeys with
    two or fewer legs vanish.
    """
    if level is CleaningLevel.RAW:
        return journey
    legs = list(journey.legs)
    if level is CleaningLevel.TRIM_ENDS:
        b = legs[0]
        legs[0] = Leg(b.station, b.last, b.last)
        a = legs[-1]
        legs[-1] = Leg(a.station, a.first, a.first)
        return Journey(journey.device, tuple(legs), journey.direction)
    if level is CleaningLevel.DROP_ENDS:
        inner = legs[1:-1]
        if not inner:
            return None
        direction = journey.direction if len(inner) > 1 else 0
        return Journey(journey.device, tuple(inner), direction)
    raise ValueError(f"unknown cleaning level {level!r}")


def coverage_ratio_matrix(journeys: Iterable[Journey], line_length: int) -> np.ndarray:
    """Mean observed-station ratio by (boarding, alighting) pair.

    Entry (i, j) averages ``len(legs) / (|i - j| + 1)`` over journeys that
    board at i and alight at j. Cells with no journeys and the three main
    diagonals (trivially 1.0) are NaN-masked.
    """
    total = np.zeros((line_length, line_length))
    count = np.zeros((line_length, line_length))
    for j in journeys:
        i, k = j.boarding, j.alighting
        if i >= line_length or k >= line_length:
            raise DataError("journey station beyond line_length")
        total[i, k] += len(j.legs) / (abs(i - k) + 1)
        count[i, k] += 1
    with np.errstate(invalid="ignore"):
        ratio = np.where(count > 0, total / np.where(count > 0, count, 1), np.nan)
    idx = np.arange(line_length)
    band = np.abs(idx[:, None] - idx[None, :]) <= 1
    ratio[band] = np.nan
    return ratio


# --- JSON-lines dump format: one journey per line ---------------------------

def journey_to_json(journey: Journey, journey_id: int) -> str:
    payload = {
        "id": journey_id,
        "device": journey.device,
        "direction": journey.direction,
        "legs": [[leg.station, leg.first, leg.last] for leg in journey.legs],
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def write_journeys(journeys: Iterable[tuple[int, Journey]], stream: IO[str]) -> None:
    for journey_id, journey in journeys:
        stream.write(journey_to_json(journey, journey_id) + "\n")


def read_journeys(path) -> dict[int, Journey]:
    out: dict[int, Journey] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            payload = json.loads(line)
            legs = tuple(Leg(*leg) for leg in payload["legs"])
            out[int(payload["id"])] = Journey(payload["device"], legs, int(payload["direction"]))
    return out
