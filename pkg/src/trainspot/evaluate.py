"""Evaluation of an estimated timetable against ground truth.

Trains cannot overtake on one line, so matching is order-preserving:
at each station both arrival lists are sorted and compared position by
position — but only when the two lists have the same length. A "hit" is
an arrival within the tolerance (default one minute); hit rate and
arrival RMSE (in minutes) are undefined whenever the train counts
disagree, which is itself the headline failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .timetable import TrainTimetable


@dataclass
class StationEval:
    station: int
    n_trains_truth: int
    n_trains_est: int
    n_hits: int | None = None
    hit_rate: float | None = None
    rmse_minutes: float | None = None

    @property
    def counts_match(self) -> bool:
        return self.n_trains_truth == self.n_trains_est and self.n_trains_truth > 0


@dataclass
class EvalReport:
    n_trains_truth: int
    n_trains_est: int
    tolerance_s: int
    stations: dict[int, StationEval] = field(default_factory=dict)
    n_hits: int | None = None
    hit_rate: float | None = None
    rmse_minutes: float | None = None

    def to_json(self) -> str:
        payload = {
            "n_trains_truth": self.n_trains_truth,
            "n_trains_est": self.n_trains_est,
            "tolerance_s": self.tolerance_s,
            "n_hits": self.n_hits,
            "hit_rate": self.hit_rate,
            "rmse_minutes": self.rmse_minutes,
            "stations": {
                str(s): {
                    "n_trains_truth": ev.n_trains_truth,
                    "n_trains_est": ev.n_trains_est,
                    "n_hits": ev.n_hits,
                    "hit_rate": ev.hit_rate,
                    "rmse_minutes": ev.rmse_minutes,
                }
                for s, ev in sorted(self.stations.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _station_eval(est: Sequence[TrainTimetable], truth: Sequence[TrainTimetable],
                  station: int, tolerance_s: int) -> StationEval:
    e_arr = sorted(t.stops[station].arrival for t in est if station in t.stops)
    t_arr = sorted(t.stops[station].arrival for t in truth if station in t.stops)
    ev = StationEval(station, len(t_arr), len(e_arr))
    if not ev.counts_match:
        return ev
    diffs = [e - t for e, t in zip(e_arr, t_arr)]
    ev.n_hits = sum(1 for d in diffs if abs(d) <= tolerance_s)
    ev.hit_rate = ev.n_hits / len(diffs)
    ev.rmse_minutes = math.sqrt(sum((d / 60.0) ** 2 for d in diffs) / len(diffs))
    return ev


def evaluate(est: Sequence[TrainTimetable], truth: Sequence[TrainTimetable],
             station: int | None = None, tolerance_s: int = 60) -> EvalReport:
    """Evaluate at one station, or at every truth station when None.

    The report's top-level hit rate / RMSE pool the per-station results
    over stations where the counts match; they stay undefined when no
    station is comparable.
    """
    if station is not None:
        stations = [station]
    else:
        stations = sorted({s for t in truth for s in t.stops})
    report = EvalReport(len(truth), len(est), tolerance_s)
    sq_sum = 0.0
    n_matched = 0
    n_hits = 0
    for s in stations:
        ev = _station_eval(est, truth, s, tolerance_s)
        report.stations[s] = ev
        if ev.counts_match:
            n_matched += ev.n_trains_truth
            n_hits += ev.n_hits
            sq_sum += (ev.rmse_minutes ** 2) * ev.n_trains_truth
    if n_matched:
        report.n_hits = n_hits
        report.hit_rate = n_hits / n_matched
        report.rmse_minutes = math.sqrt(sq_sum / n_matched)
    return report
