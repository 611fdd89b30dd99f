"""From labeled records to train timetables, KPIs and incident flags.

Each surviving cluster is one train; its arrival/departure at a station
are the min/max member timestamps there (the cluster envelope). Interior
stations the cluster never saw are filled by piecewise-linear
interpolation and flagged unobserved. Two headway conventions exist:
consecutive arrivals (default, what the operations plots use) and
departure-to-next-arrival; dwell is departure minus arrival. Incident
detection flags KPI values that sit far outside their trailing window
under a robust z-score.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .baseline import LabeledRecord
from .errors import DataError
from .journeys import Journey
from .outliers import mad

logger = logging.getLogger(__name__)

TIMETABLE_HEADER = "train_id,station,arrival,departure,observed"
KPI_HEADER = "station,kind,train_id,value_seconds"
INCIDENT_HEADER = "station,time,value_seconds,zscore"

HEADWAY_ARRIVAL = "arrival"
HEADWAY_DEPARTURE = "departure"


@dataclass(frozen=True)
class StationTimes:
    arrival: int
    departure: int
    observed: bool

    def __post_init__(self):
        if self.arrival > self.departure:
            raise ValueError("arrival after departure")

    @property
    def dwell(self) -> int:
        return self.departure - self.arrival


@dataclass
class TrainTimetable:
    """Arrival/departure per station for one train.

    Stations form a contiguous range; departures are strictly increasing
    along the travel direction.
    """

    train_id: int
    direction: int
    stops: dict[int, StationTimes]

    def stations(self) -> list[int]:
        return sorted(self.stops, reverse=self.direction < 0)

    @property
    def first_departure(self) -> int:
        return min(st.departure for st in self.stops.values())

    @property
    def start_time(self) -> int:
        return min(st.arrival for st in self.stops.values())

    def check(self) -> None:
        stations = self.stations()
        if stations != list(range(min(stations), max(stations) + 1))[:: 1 if self.direction >= 0 else -1]:
            raise AssertionError("stations not a contiguous range")
        deps = [self.stops[s].departure for s in stations]
        if any(b <= a for a, b in zip(deps, deps[1:])):
            raise AssertionError("departures not strictly increasing")


@dataclass(frozen=True)
class HeadwayEntry:
    lead_train: int
    trail_train: int
    seconds: int
    start_time: int  # when the gap opened, i.e. the leading train's arrival


@dataclass(frozen=True)
class DwellEntry:
    train: int
    seconds: int
    observed: bool


@dataclass
class KpiSeries:
    station: int
    headways: list[HeadwayEntry] = field(default_factory=list)
    dwells: list[DwellEntry] = field(default_factory=list)


@dataclass(frozen=True)
class IncidentFlag:
    station: int
    time: int
    value_seconds: int
    zscore: float


def _direction_of(stations: Sequence[int], times: Sequence[int]) -> int:
    """Travel direction from the time-order of station visits."""
    order = np.argsort(np.asarray(times), kind="stable")
    first, last = stations[order[0]], stations[order[-1]]
    if first == last:
        return 0
    return 1 if last > first else -1


def _monotone_station_set(stations: list[int], departures: dict[int, int],
                          direction: int) -> list[int]:
    """Longest subsequence of stations (in travel order) with strictly
    increasing departures; drops envelope entries that noise pushed out
    of order."""
    ordered = sorted(stations, reverse=direction < 0)
    deps = [departures[s] for s in ordered]
    n = len(deps)
    best_len = [1] * n
    prev = [-1] * n
    for i in range(n):
        for j in range(i):
            if deps[j] < deps[i] and best_len[j] + 1 > best_len[i]:
                best_len[i] = best_len[j] + 1
                prev[i] = j
    end = int(np.argmax(best_len))
    keep = []
    while end >= 0:
        keep.append(ordered[end])
        end = prev[end]
    return keep[::-1]


def _assemble_train(per_station: dict[int, tuple[int, int]],
                    min_stations: int) -> TrainTimetable | None:
    """Build a valid train from per-station observed (min, max) envelopes:
    pick the travel direction, discard out-of-order entries, interpolate
    interior gaps. None when too little survives."""
    if len(per_station) < min_stations:
        return None
    stations = sorted(per_station)
    arrivals = {s: per_station[s][0] for s in stations}
    departures = {s: per_station[s][1] for s in stations}
    direction = _direction_of(stations, [arrivals[s] for s in stations])
    if direction == 0:
        direction = 1
    keep = _monotone_station_set(stations, departures, direction)
    if len(keep) < min_stations:
        return None
    stops = {s: StationTimes(arrivals[s], departures[s], True) for s in keep}
    return interpolate_missing(TrainTimetable(0, direction, stops))


def derive_timetable(labeled: Sequence[LabeledRecord],
                     level2: Sequence[tuple[Journey, int]] | None = None,
                     min_stations: int = 2) -> list[TrainTimetable]:
    """Envelope every cluster into a train timetable.

    ``level2`` optionally reattaches end-station sightings that the
    cluster-identification cleaning removed: each (journey, label) pair
    contributes its trimmed boarding/alighting legs to the labeled pool
    before the envelope is taken. Clusters observed at fewer than
    ``min_stations`` stations are dropped; out-of-order envelope entries
    are discarded and interior gaps interpolated. Trains come back
    ordered (and numbered from 1) by first departure.
    """
    pool: list[LabeledRecord] = [r for r in labeled if r.label != -1]
    if level2:
        seen = {(r.device, r.station, r.timestamp, r.label) for r in pool}
        for journey, label in level2:
            if label == -1:
                continue
            for leg in (journey.legs[0], journey.legs[-1]):
                for ts in sorted({leg.first, leg.last}):
                    key = (journey.device, leg.station, ts, label)
                    if key not in seen:
                        seen.add(key)
                        pool.append(LabeledRecord(journey.device, leg.station, ts, label))

    by_label: dict[int, list[LabeledRecord]] = {}
    for r in pool:
        by_label.setdefault(r.label, []).append(r)

    trains: list[TrainTimetable] = []
    dropped = 0
    for label in sorted(by_label):
        members = by_label[label]
        per_station: dict[int, tuple[int, int]] = {}
        for r in members:
            lo, hi = per_station.get(r.station, (r.timestamp, r.timestamp))
            per_station[r.station] = (min(lo, r.timestamp), max(hi, r.timestamp))
        tt = _assemble_train(per_station, min_stations)
        if tt is None:
            dropped += 1
            continue
        trains.append(tt)
    if dropped:
        logger.warning("dropped %d clusters too thin or disordered for a timetable", dropped)

    trains.sort(key=lambda t: (t.first_departure, t.start_time, min(t.stops)))
    for i, t in enumerate(trains, start=1):
        t.train_id = i
    return trains


def interpolate_missing(tt: TrainTimetable) -> TrainTimetable | None:
    """Fill interior station gaps by linear interpolation in time.

    Interpolated entries get arrival == departure (the envelope carries
    no dwell information there) and observed=False. Observed entries are
    never altered. Returns None when fewer than two observed stations
    remain or the filled table cannot keep departures strictly monotone.
    """
    observed = {s: st for s, st in tt.stops.items() if st.observed}
    if len(observed) < 2:
        logger.warning("train %s has fewer than 2 observed stations", tt.train_id)
        return None
    direction = tt.direction
    stations = sorted(observed, reverse=direction < 0)
    stops: dict[int, StationTimes] = {stations[0]: observed[stations[0]]}
    for a, b in zip(stations, stations[1:]):
        lo_t = observed[a].departure
        hi_t = observed[b].arrival if observed[b].arrival > lo_t else observed[b].departure
        gap = abs(b - a)
        prev_t = lo_t
        for step in range(1, gap):
            s = a + step * direction
            frac = step / gap
            t = int(round(lo_t + frac * (hi_t - lo_t)))
            t = max(t, prev_t + 1)  # rounding on tight segments must not stall
            stops[s] = StationTimes(t, t, False)
            prev_t = t
        stops[b] = observed[b]
    deps = [stops[s].departure for s in sorted(stops, reverse=direction < 0)]
    if any(b2 <= a2 for a2, b2 in zip(deps, deps[1:])):
        logger.warning("train %s dropped: interpolation cannot keep departures monotone",
                       tt.train_id)
        return None
    return TrainTimetable(tt.train_id, direction, stops)


def headways(timetables: Sequence[TrainTimetable], station: int,
             mode: str = HEADWAY_ARRIVAL) -> list[HeadwayEntry]:
    """Consecutive-train separation at a station, for one direction.

    ``arrival`` mode: next arrival minus arrival. ``departure`` mode:
    next arrival minus this train's departure. Fewer than two trains
    serving the station yields an empty list.
    """
    if mode not in (HEADWAY_ARRIVAL, HEADWAY_DEPARTURE):
        raise ValueError(f"unknown headway mode {mode!r}")
    serving = [t for t in timetables if station in t.stops]
    if len({t.direction for t in serving}) > 1:
        raise ValueError("headways expects trains of a single direction")
    serving.sort(key=lambda t: (t.stops[station].arrival, t.train_id))
    out = []
    for lead, trail in zip(serving, serving[1:]):
        lead_st, trail_st = lead.stops[station], trail.stops[station]
        if mode == HEADWAY_ARRIVAL:
            sec = trail_st.arrival - lead_st.arrival
        else:
            sec = trail_st.arrival - lead_st.departure
        out.append(HeadwayEntry(lead.train_id, trail.train_id, sec, lead_st.arrival))
    return out


def dwell_times(timetables: Sequence[TrainTimetable], station: int) -> list[DwellEntry]:
    serving = [t for t in timetables if station in t.stops]
    serving.sort(key=lambda t: (t.stops[station].arrival, t.train_id))
    return [DwellEntry(t.train_id, t.stops[station].dwell, t.stops[station].observed)
            for t in serving]


def compute_kpis(timetables: Sequence[TrainTimetable], station: int,
                 mode: str = HEADWAY_ARRIVAL) -> KpiSeries:
    """KPI series at one station, per travel direction (concatenated in
    direction order for mixed fleets)."""
    series = KpiSeries(station)
    directions = sorted({t.direction for t in timetables if station in t.stops})
    for d in directions:
        group = [t for t in timetables if t.direction == d]
        series.headways.extend(headways(group, station, mode))
        series.dwells.extend(dwell_times(group, station))
    return series


def detect_incidents(series: KpiSeries, window: int = 10, threshold: float = 3.5,
                     floor_s: float = 60.0, kind: str = "headway") -> list[IncidentFlag]:
    """Flag KPI values far outside their trailing window.

    Each value is compared against the ``window`` values before it: the
    robust z-score |x - median| / max(1.4826 * MAD, floor) must stay
    below ``threshold``. The flag carries the time the anomalous gap
    opened, so a service hole is attributed to its onset rather than to
    the late arrival that ends it.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if kind == "headway":
        values = [e.seconds for e in series.headways]
        times = [e.start_time for e in series.headways]
    elif kind == "dwell":
        values = [e.seconds for e in series.dwells]
        times = [0] * len(values)
    else:
        raise ValueError(f"unknown KPI kind {kind!r}")
    flags: list[IncidentFlag] = []
    for i in range(window, len(values)):
        hist = values[i - window:i]
        center = float(np.median(hist))
        denom = max(1.4826 * mad(hist), floor_s)
        z = abs(values[i] - center) / denom
        if z >= threshold:
            flags.append(IncidentFlag(series.station, times[i], values[i], z))
    return flags


# --- dedup of trains reconstructed twice in overlapping windows -------------

def merge_duplicate_trains(trains: Sequence[TrainTimetable],
                           tolerance_s: int = 60) -> list[TrainTimetable]:
    """Collapse trains that are the same physical train seen by two
    overlapping processing windows.

    Two trains match when they travel the same direction, share at least
    one station, and agree on arrival and departure within the tolerance
    at every shared station — compared on stations observed by both when
    any exist (interpolated entries carry their own error), on all shared
    stations otherwise. Matches are replaced by the union of their
    observed envelopes, re-interpolated; if the union cannot form a valid
    train, the sighting with more observed stations survives. Train ids
    are reassigned by first departure.
    """
    ordered = sorted(trains, key=lambda t: (t.first_departure, t.start_time, min(t.stops)))
    kept: list[TrainTimetable] = []
    for cand in ordered:
        merged = False
        for i, ref in enumerate(kept):
            if ref.direction != cand.direction:
                continue
            shared = set(ref.stops) & set(cand.stops)
            if not shared:
                continue
            both_observed = [s for s in shared
                             if ref.stops[s].observed and cand.stops[s].observed]
            compare = both_observed or sorted(shared)
            close = all(
                abs(ref.stops[s].arrival - cand.stops[s].arrival) <= tolerance_s
                and abs(ref.stops[s].departure - cand.stops[s].departure) <= tolerance_s
                for s in compare
            )
            if close:
                kept[i] = _union_train(ref, cand)
                merged = True
                break
        if not merged:
            kept.append(cand)
    kept.sort(key=lambda t: (t.first_departure, t.start_time, min(t.stops)))
    for i, t in enumerate(kept, start=1):
        t.train_id = i
    return kept


def _union_train(a: TrainTimetable, b: TrainTimetable) -> TrainTimetable:
    per_station: dict[int, tuple[int, int]] = {}
    for t in (a, b):
        for s, st in t.stops.items():
            if not st.observed:
                continue
            lo, hi = per_station.get(s, (st.arrival, st.departure))
            per_station[s] = (min(lo, st.arrival), max(hi, st.departure))
    union = _assemble_train(per_station, min_stations=2)
    if union is not None:
        return union
    def richness(t: TrainTimetable):
        return (sum(st.observed for st in t.stops.values()), len(t.stops))
    return b if richness(b) > richness(a) else a


# --- CSV formats -------------------------------------------------------------

def write_timetables(trains: Iterable[TrainTimetable], stream: IO[str]) -> None:
    stream.write(TIMETABLE_HEADER + "\n")
    for t in trains:
        for s in t.stations():
            st = t.stops[s]
            stream.write(f"{t.train_id},{s},{st.arrival},{st.departure},{int(st.observed)}\n")


def read_timetables(path) -> list[TrainTimetable]:
    rows: dict[int, dict[int, StationTimes]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TIMETABLE_HEADER:
            raise DataError(f"bad header {header!r}, expected {TIMETABLE_HEADER!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            tid, station, arr, dep, obs = line.split(",")
            rows.setdefault(int(tid), {})[int(station)] = StationTimes(
                int(arr), int(dep), bool(int(obs))
            )
    trains = []
    for tid in sorted(rows):
        stops = rows[tid]
        stations = sorted(stops)
        arrivals = [stops[s].arrival for s in stations]
        direction = _direction_of(stations, arrivals)
        trains.append(TrainTimetable(tid, direction if direction else 1, stops))
    return trains


def write_kpis(timetables: Sequence[TrainTimetable], stream: IO[str],
               mode: str = HEADWAY_ARRIVAL) -> None:
    """KPI rows for every served station: headway rows carry the leading
    train's id (the gap behind that train), dwell rows the dwelling train."""
    stream.write(KPI_HEADER + "\n")
    stations = sorted({s for t in timetables for s in t.stops})
    for station in stations:
        series = compute_kpis(timetables, station, mode)
        for h in series.headways:
            stream.write(f"{station},headway,{h.lead_train},{h.seconds}\n")
        for d in series.dwells:
            stream.write(f"{station},dwell,{d.train},{d.seconds}\n")


def write_incidents(flags: Iterable[IncidentFlag], stream: IO[str]) -> None:
    stream.write(INCIDENT_HEADER + "\n")
    for f in flags:
        stream.write(f"{f.station},{f.time},{f.value_seconds},{f.zscore:.6g}\n")
