"""End-to-end orchestration: records -> journeys -> labels -> timetable.

The spectral path clusters end-stripped journey vectors per travel
direction, then expands every labeled journey's end-trimmed legs back
into records (restoring boarding/alighting stations before the outlier
filters see them, so platform noise is cleaned too). The baseline path
labels the raw records directly. Both paths share the outlier filters,
the envelope timetable, the KPI/incident computations, and the
windowing: long runs are cut into overlapping windows, clustered
independently, and trains reconstructed twice in an overlap are merged
by their station/time signature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baseline import DbscanParams, LabeledRecord, baseline_cluster
from .config import PipelineConfig
from .errors import DataError
from .journeys import (CleaningLevel, Journey, JourneyParams, apply_cleaning,
                       extract_all_journeys)
from .outliers import OutlierParams, apply_filters
from .records import WifiRecord, dedup_records, group_by_device, reduce_extremities, sort_records
from .similarity import SimilarityParams, build_graph, vectorize
from .spectral import Clustering, connected_components, ncut, spectral_cluster
from .timetable import (IncidentFlag, TrainTimetable, compute_kpis, derive_timetable,
                        detect_incidents, merge_duplicate_trains)

logger = logging.getLogger(__name__)


@dataclass
class JourneySet:
    """Aligned cleaning levels of the extracted journeys, keyed by id."""

    raw: dict[int, Journey] = field(default_factory=dict)
    trimmed: dict[int, Journey] = field(default_factory=dict)
    stripped: dict[int, Journey] = field(default_factory=dict)


def prepare_journeys(records: list[WifiRecord], cfg: PipelineConfig) -> JourneySet:
    """Dedup, reduce, segment and clean one trace."""
    params = JourneyParams(cfg.intra_gap_s, cfg.inter_gap_s)
    clean = dedup_records(sort_records(records))
    extremities = {
        device: reduce_extremities(recs)
        for device, recs in group_by_device(clean).items()
    }
    out = JourneySet()
    for jid, journey in enumerate(extract_all_journeys(extremities, params)):
        out.raw[jid] = journey
        trimmed = apply_cleaning(journey, CleaningLevel.TRIM_ENDS)
        if trimmed is not None:
            out.trimmed[jid] = trimmed
        stripped = apply_cleaning(journey, CleaningLevel.DROP_ENDS)
        if stripped is not None:
            out.stripped[jid] = stripped
    return out


def _station_set(records: list[WifiRecord], cfg: PipelineConfig) -> tuple[int, ...]:
    if cfg.line_length:
        stations = range(cfg.line_length)
    else:
        if not records:
            raise DataError("cannot infer the line without records")
        stations = range(max(r.station for r in records) + 1)
    excluded = set(cfg.exclude_stations)
    return tuple(s for s in stations if s not in excluded)


def _windows(records: list[WifiRecord], cfg: PipelineConfig) -> list[tuple[int, int]]:
    if not records:
        return []
    t_max = max(r.timestamp for r in records)
    if cfg.window_s == 0 or cfg.window_s > t_max:
        return [(0, t_max + 1)]
    step = cfg.window_s - cfg.overlap_s
    out = []
    start = 0
    while True:
        out.append((start, start + cfg.window_s))
        if start + cfg.window_s > t_max:
            break
        start += step
    return out


def _child_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass
class ClusterOutcome:
    labeled: list[LabeledRecord]
    journey_labels: dict[int, int] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def spectral_label(journeys: JourneySet, cfg: PipelineConfig,
                   stations: tuple[int, ...]) -> ClusterOutcome:
    """Cluster end-stripped journeys and expand labels to trimmed records.

    Journeys are grouped per window (by their mid-time) and per travel
    direction; each group is clustered independently with its own
    deterministic child seed, and labels are offset to stay globally
    unique. A window only keeps the clusters whose time center lies in
    its core region (half the overlap away from interior boundaries), so
    a train near a boundary is owned by the window that saw it whole; a
    small slack band lets both neighbours keep a borderline cluster and
    the train-level dedup collapse the twins. Journeys whose stripped
    form has fewer than two legs carry no usable inter-station signal
    and stay unlabeled.
    """
    usable = {
        jid: j for jid, j in journeys.stripped.items()
        if len([leg for leg in j.legs if leg.station in stations]) >= 2
    }
    all_records = [
        WifiRecord(j.device, leg.station, leg.last)
        for j in journeys.raw.values() for leg in j.legs
    ]
    label_offset = 0
    assignments: list[tuple[int, int]] = []
    claimed: set[int] = set()
    diagnostics: dict = {"windows": 0, "groups": []}
    windows = _windows(all_records, cfg)
    half = cfg.overlap_s // 2
    # generous slack: border clusters get kept by both windows and the
    # train-level dedup collapses the twins, which beats losing a train
    # whose cluster center jitters across the core boundary
    slack = max(cfg.dedup_tolerance_s, cfg.overlap_s // 6)
    for w_index, (w_start, w_end) in enumerate(windows):
        keep_lo = w_start if w_index == 0 else w_start + half - slack
        keep_hi = w_end if w_index == len(windows) - 1 else w_end - half + slack
        window_ids = [
            jid for jid in sorted(usable)
            if w_start <= usable[jid].midtime < w_end
        ]
        diagnostics["windows"] += 1
        for direction in (1, -1):
            ids = [jid for jid in window_ids if usable[jid].direction == direction]
            if not ids:
                continue
            vectors = [vectorize(usable[jid], stations) for jid in ids]
            params = SimilarityParams(cfg.metric, cfg.tolerance_s, cfg.bandwidth_sq_s)
            graph = build_graph(vectors, params, time_cutoff=cfg.time_cutoff_s)
            clustering = spectral_cluster(
                graph,
                cfg.n_clusters or None,
                seed=_child_seed(cfg.seed, w_index, direction % 3),
                k_min=cfg.k_min,
                k_max=cfg.k_max or None,
                restarts=cfg.kmeans_restarts,
                max_iter=cfg.kmeans_max_iter,
            )
            kept = 0
            for c in range(1, clustering.k + 1):
                members = [jid for jid, lab in zip(ids, clustering.labels.tolist())
                           if lab == c]
                if not members:
                    continue
                center = float(np.median([usable[jid].midtime for jid in members]))
                if keep_lo <= center < keep_hi:
                    kept += 1
                    # first window wins for journeys seen by two kept twins;
                    # the residue of the later twin merges at the train level
                    assignments.extend(
                        (jid, label_offset + c) for jid in members
                        if jid not in claimed
                    )
                    claimed.update(members)
            diagnostics["groups"].append({
                "window": [w_start, w_end],
                "direction": direction,
                "n_vectors": len(ids),
                "k": clustering.k,
                "kept_clusters": kept,
                "sparsity": graph.sparsity(),
                "ncut": _safe_ncut(graph, clustering),
            })
            label_offset += clustering.k
    labeled = expand_journey_labels(journeys, assignments)
    journey_labels: dict[int, int] = {jid: -1 for jid in journeys.raw}
    for jid, label in assignments:
        if journey_labels[jid] == -1:
            journey_labels[jid] = label
    return ClusterOutcome(labeled, journey_labels, diagnostics)


def _safe_ncut(graph, clustering: Clustering) -> float | None:
    try:
        return ncut(graph, clustering)
    except DataError:
        return None


def expand_journey_labels(journeys: JourneySet,
                          assignments) -> list[LabeledRecord]:
    """Turn labeled journeys into labeled records using their end-trimmed
    legs: interior sightings keep both extremities, boarding keeps its
    final sighting, alighting its first. ``assignments`` is an iterable
    of (journey id, label) pairs (dicts also accepted); a journey kept by
    two windows emits its records once per label."""
    if isinstance(assignments, dict):
        assignments = sorted(assignments.items())
    out: list[LabeledRecord] = []
    for jid, label in sorted(assignments):
        if label == -1:
            continue
        trimmed = journeys.trimmed.get(jid)
        if trimmed is None:
            continue
        for leg in trimmed.legs:
            for ts in sorted({leg.first, leg.last}):
                out.append(LabeledRecord(trimmed.device, leg.station, ts, label))
    return sorted(out, key=lambda r: (r.station, r.timestamp, r.device, r.label))


def baseline_label(records: list[WifiRecord], cfg: PipelineConfig) -> ClusterOutcome:
    """Label raw records with the station-wise baseline.

    Runs on the full span: the per-station density clustering and the
    sequential vote chain have no problem size to bound, and chopping the
    timeline would cut every train crossing a boundary in two (the
    windows exist for the dense eigensolve of the spectral path).
    """
    clean = dedup_records(sort_records(records))
    params = DbscanParams(cfg.dbscan_eps, cfg.dbscan_min_samples)
    labeled = baseline_cluster(clean, params, cfg.link_min_s, cfg.link_max_s)
    return ClusterOutcome(sorted(labeled, key=lambda r: (r.station, r.timestamp, r.device, r.label)))


@dataclass
class PipelineResult:
    journeys: JourneySet
    labeled: list[LabeledRecord]
    filtered: list[LabeledRecord]
    trains: list[TrainTimetable]
    incidents: list[IncidentFlag]
    diagnostics: dict = field(default_factory=dict)


def finalize(labeled: list[LabeledRecord], cfg: PipelineConfig) -> tuple[
        list[LabeledRecord], list[TrainTimetable], list[IncidentFlag]]:
    """Shared tail of both methods: outlier filters, envelope timetable,
    window dedup, incident flags."""
    params = OutlierParams(cfg.knn_neighbors, cfg.mad_sigma_cutoff)
    filtered = apply_filters(labeled, params, cfg.filters())
    trains = derive_timetable(filtered, min_stations=cfg.min_train_stations)
    trains = merge_duplicate_trains(trains, cfg.dedup_tolerance_s)
    incidents: list[IncidentFlag] = []
    for station in sorted({s for t in trains for s in t.stops}):
        series = compute_kpis(trains, station, cfg.headway_mode)
        incidents.extend(detect_incidents(
            series, cfg.incident_window, cfg.incident_threshold, cfg.incident_floor_s
        ))
    incidents.sort(key=lambda f: (f.station, f.time))
    return filtered, trains, incidents


def run_pipeline(records: list[WifiRecord], cfg: PipelineConfig,
                 method: str = "spectral") -> PipelineResult:
    cfg.validate()
    journeys = prepare_journeys(records, cfg)
    if method == "spectral":
        stations = _station_set(records, cfg)
        outcome = spectral_label(journeys, cfg, stations)
    elif method == "baseline":
        outcome = baseline_label(records, cfg)
    else:
        raise DataError(f"unknown clustering method {method!r}")
    filtered, trains, incidents = finalize(outcome.labeled, cfg)
    logger.info("%s pipeline: %d labeled records -> %d trains, %d incident flags",
                method, len(outcome.labeled), len(trains), len(incidents))
    return PipelineResult(journeys, outcome.labeled, filtered, trains, incidents,
                          outcome.diagnostics)
