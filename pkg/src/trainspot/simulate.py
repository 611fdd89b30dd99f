"""Synthetic trace generator with exact ground truth.

Trains are dispatched with jittered headways and move down the line
under jittered dwell/run times, never closer than a minimum separation;
a suspension holds trains at the previous platform until the window
clears, queueing followers behind. Passengers get an origin/destination,
wait on the boarding platform, ride, and linger briefly after alighting;
their devices emit probe requests as a renewal process that is only
audible while they are inside a station, and every probe is recorded
independently with the configured detection probability. Dropout events
silence a station entirely for an interval. Spoofed devices contribute a
single one-off probe each.

During a suspension, half the held through-passengers give up, leave at
the last served station, ride a replacement bus past the closed station
and board the next train beyond it, which produces journeys with a
station gap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .records import WifiRecord, sort_records
from .scenario import ScenarioConfig
from .timetable import StationTimes, TrainTimetable

logger = logging.getLogger(__name__)

MIN_SEPARATION_S = 60       # closest two trains may follow at one station
AUDIBLE_PAD_S = 15          # station APs hear devices this long into the tunnel
REROUTE_MIN_HOLD_S = 300    # holds longer than this trigger bus rerouting
REROUTE_PROB = 0.5
BUS_RIDE_S = 600


@dataclass
class SimResult:
    records: list[WifiRecord]
    truth: list[TrainTimetable]


@dataclass
class _Schedule:
    arrivals: np.ndarray    # (trains, stations) int seconds
    departures: np.ndarray
    holds: np.ndarray       # seconds each arrival was pushed back


def _build_schedule(cfg: ScenarioConfig, rng: np.random.Generator) -> _Schedule:
    s = cfg.line_length
    dispatches = []
    t = int(round(cfg.headway_mean_s))
    while t <= cfg.horizon_s:
        dispatches.append(t)
        t += max(1, int(round(rng.normal(cfg.headway_mean_s, cfg.headway_std_s))))
    n = len(dispatches)
    if n == 0:
        raise ValueError("horizon too short for a single dispatch")

    arr = np.zeros((n, s), dtype=np.int64)
    dep = np.zeros((n, s), dtype=np.int64)
    holds = np.zeros((n, s), dtype=np.int64)
    for i in range(n):
        dwells = np.maximum(5, np.round(rng.normal(cfg.dwell_mean_s, cfg.dwell_std_s, s))).astype(np.int64)
        runs = np.maximum(10, np.round(rng.normal(cfg.runtime_mean_s, cfg.runtime_std_s, s - 1))).astype(np.int64)
        a = dispatches[i]
        if i > 0:
            a = max(a, dep[i - 1, 0] + MIN_SEPARATION_S)
        arr[i, 0] = a
        d = a + dwells[0]
        if i > 0:
            d = max(d, dep[i - 1, 0] + MIN_SEPARATION_S)
        dep[i, 0] = d
        for k in range(1, s):
            tentative = dep[i, k - 1] + runs[k - 1]
            a = tentative
            if i > 0:
                a = max(a, dep[i - 1, k] + MIN_SEPARATION_S)
            for ev in cfg.suspension_events:
                if ev.station == k and ev.covers(a):
                    a = ev.end
                    if i > 0:
                        a = max(a, dep[i - 1, k] + MIN_SEPARATION_S)
            if a > tentative:
                holds[i, k] = a - tentative
                dep[i, k - 1] = a - runs[k - 1]  # train waits at the previous platform
            arr[i, k] = a
            d = a + dwells[k]
            if i > 0:
                d = max(d, dep[i - 1, k] + MIN_SEPARATION_S)
            dep[i, k] = d
    return _Schedule(arr, dep, holds)


def _truth_timetables(sched: _Schedule) -> list[TrainTimetable]:
    trains = []
    n, s = sched.arrivals.shape
    for i in range(n):
        stops = {
            k: StationTimes(int(sched.arrivals[i, k]), int(sched.departures[i, k]), True)
            for k in range(s)
        }
        trains.append(TrainTimetable(i + 1, 1, stops))
    return trains


def _passenger_presence(cfg: ScenarioConfig, sched: _Schedule, train: int,
                        origin: int, dest: int, wait: int, linger: int,
                        rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Station presence intervals (station, start, end) for one passenger,
    covering platform wait, the ride, the post-alight linger, and any
    mid-journey bus reroute around a suspended station."""
    arr, dep = sched.arrivals, sched.departures
    intervals: list[tuple[int, int, int]] = []

    reroute_at = -1
    for ev in cfg.suspension_events:
        s = ev.station
        if origin < s < dest and sched.holds[train, s] >= REROUTE_MIN_HOLD_S:
            if rng.random() < REROUTE_PROB:
                reroute_at = s
            break

    pad = AUDIBLE_PAD_S  # aboard, the device stays audible slightly past the platform
    if reroute_at < 0:
        intervals.append((origin, max(0, int(arr[train, origin]) - wait),
                          int(dep[train, origin]) + pad))
        for k in range(origin + 1, dest):
            intervals.append((k, max(0, int(arr[train, k]) - pad), int(dep[train, k]) + pad))
        intervals.append((dest, max(0, int(arr[train, dest]) - pad),
                          int(arr[train, dest]) + linger))
        return intervals

    s = reroute_at
    alight = min(int(dep[train, s - 1]),
                 int(arr[train, s - 1]) + int(rng.integers(60, 301)))
    alight = max(alight, int(arr[train, s - 1]))
    if origin == s - 1:
        intervals.append((origin, max(0, int(arr[train, origin]) - wait), alight))
    else:
        intervals.append((origin, max(0, int(arr[train, origin]) - wait),
                          int(dep[train, origin]) + pad))
        for k in range(origin + 1, s - 1):
            intervals.append((k, max(0, int(arr[train, k]) - pad), int(dep[train, k]) + pad))
        intervals.append((s - 1, max(0, int(arr[train, s - 1]) - pad), alight))
    bus_arrival = alight + BUS_RIDE_S
    onward = -1
    for j in range(sched.arrivals.shape[0]):
        if dep[j, s + 1] >= bus_arrival:
            onward = j
            break
    if onward < 0:
        return intervals
    if dest == s + 1:
        intervals.append((dest, bus_arrival, bus_arrival + linger))
        return intervals
    intervals.append((s + 1, bus_arrival, int(dep[onward, s + 1]) + pad))
    for k in range(s + 2, dest):
        intervals.append((k, max(0, int(arr[onward, k]) - pad), int(dep[onward, k]) + pad))
    intervals.append((dest, max(0, int(arr[onward, dest]) - pad),
                      int(arr[onward, dest]) + linger))
    return intervals


def _dropped_out(cfg: ScenarioConfig, station: int, t: float) -> bool:
    for ev in cfg.dropout_events:
        if ev.station == station and ev.covers(t):
            return True
    return False


def _emit_probes(cfg: ScenarioConfig, device: str,
                 intervals: list[tuple[int, int, int]],
                 rng: np.random.Generator, out: list[WifiRecord]) -> None:
    if not intervals:
        return
    mu = math.log(cfg.probe_median_s)
    t = float(intervals[0][1])
    end = max(iv[2] for iv in intervals)
    pos = 0
    while t <= end:
        while pos < len(intervals) and t > intervals[pos][2]:
            pos += 1
        if pos < len(intervals):
            station, start, stop = intervals[pos]
            if start <= t <= stop and not _dropped_out(cfg, station, t):
                if cfg.detection_prob >= 1.0 or rng.random() < cfg.detection_prob:
                    out.append(WifiRecord(device, station, int(math.floor(t))))
        if cfg.probe_sigma_log == 0:
            t += cfg.probe_median_s
        else:
            t += rng.lognormal(mu, cfg.probe_sigma_log)


def simulate(cfg: ScenarioConfig) -> SimResult:
    """Generate one scenario: probe records plus the exact timetable."""
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    sched = _build_schedule(cfg, rng)
    truth = _truth_timetables(sched)
    n_trains, n_stations = sched.arrivals.shape

    records: list[WifiRecord] = []
    total_passengers = 0
    for i in range(n_trains):
        n_pax = int(rng.poisson(cfg.passengers_per_train_mean))
        total_passengers += n_pax
        for p in range(n_pax):
            origin = int(rng.integers(0, n_stations - 1))
            dest = int(rng.integers(origin + 1, n_stations))
            wait = max(0, int(round(rng.normal(cfg.platform_wait_mean_s,
                                               cfg.platform_wait_std_s))))
            linger = max(0, int(round(rng.normal(cfg.platform_wait_mean_s / 2,
                                                 cfg.platform_wait_std_s / 2))))
            device = f"t{i:03d}p{p:03d}"
            intervals = _passenger_presence(cfg, sched, i, origin, dest, wait, linger, rng)
            _emit_probes(cfg, device, intervals, rng, records)

    n_spoofed = int(round(cfg.spoofed_device_rate * total_passengers))
    end_of_service = int(sched.departures.max())
    for j in range(n_spoofed):
        station = int(rng.integers(0, n_stations))
        t = int(rng.integers(0, end_of_service + 1))
        if _dropped_out(cfg, station, t):
            continue
        if cfg.detection_prob >= 1.0 or rng.random() < cfg.detection_prob:
            records.append(WifiRecord(f"x{j:04d}", station, t))

    logger.info("simulated %d trains, %d passengers, %d records",
                n_trains, total_passengers, len(records))
    return SimResult(sort_records(records), truth)
