"""Command-line interface.

Subcommands mirror the pipeline stages so that chaining them is
byte-identical to one ``pipeline`` run with the same config and seed:

  simulate   scenario -> records.csv + truth.csv
  journeys   records.csv -> journeys_level{1,2,3}.jsonl
  cluster    journeys (+records for the baseline) -> labeled.csv
  timetable  labeled.csv -> filtered.csv, timetable.csv, kpi.csv, incidents.csv
  evaluate   timetable.csv + truth.csv -> report.json
  spectrum   journeys -> spectrum.csv (index,eigenvalue)
  pipeline   all of the above in one go

Exit codes: 0 ok, 2 bad configuration, 3 bad data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from ._accel import ACTIVE_BACKEND
from .baseline import read_labeled, write_labeled
from .config import PipelineConfig, apply_overrides, read_config
from .errors import ConfigError, DataError
from .journeys import write_journeys
from .pipeline import (JourneySet, baseline_label, finalize, prepare_journeys,
                       run_pipeline, spectral_label, _station_set)
from .records import read_records, write_records
from .scenario import PRESETS, preset, read_scenario, write_scenario
from .evaluate import evaluate
from .similarity import SimilarityParams, build_graph, vectorize
from .simulate import simulate
from .spectral import LaplacianPair, generalized_eigs, spectrum_csv
from .timetable import read_timetables, write_incidents, write_kpis, write_timetables

logger = logging.getLogger(__name__)

JOURNEY_FILES = {
    "raw": "journeys_level1.jsonl",
    "trimmed": "journeys_level2.jsonl",
    "stripped": "journeys_level3.jsonl",
}


def _load_config(args) -> PipelineConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides: dict[str, str] = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "k", None) is not None:
        overrides["n_clusters"] = str(args.k)
    cfg = apply_overrides(cfg, overrides)
    return cfg


def _write_manifest(outdir: Path, cfg: PipelineConfig) -> None:
    import numpy
    import scipy

    try:
        import numba
        numba_version = numba.__version__
    except ImportError:
        numba_version = None
    payload = {
        "config_sha256": cfg.sha256(),
        "trainspot": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba_version,
        "backend": ACTIVE_BACKEND,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _outdir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario_from_args(args):
    if args.scenario:
        cfg = read_scenario(args.scenario)
    else:
        cfg = preset(args.preset, args.seed)
    if args.seed is not None and args.scenario:
        from dataclasses import replace
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


def _write_journey_files(outdir: Path, journeys: JourneySet) -> None:
    for attr, name in JOURNEY_FILES.items():
        table = getattr(journeys, attr)
        with open(outdir / name, "w", encoding="utf-8", newline="\n") as fh:
            write_journeys(sorted(table.items()), fh)


def _read_journey_files(indir: Path) -> JourneySet:
    from .journeys import read_journeys

    out = JourneySet()
    for attr, name in JOURNEY_FILES.items():
        path = indir / name
        if not path.exists():
            raise DataError(f"missing journey dump {path}")
        setattr(out, attr, read_journeys(path))
    return out


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    outdir = _outdir(args)
    result = simulate(scenario)
    write_records(result.records, outdir / "records.csv")
    with open(outdir / "truth.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_timetables(result.truth, fh)
    write_scenario(scenario, outdir / "scenario.txt")
    print(f"simulate: {len(result.truth)} trains, {len(result.records)} records -> {outdir}")
    return 0


def cmd_journeys(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args)
    parsed = read_records(args.records)
    if parsed.skipped:
        logger.warning("skipped %d malformed lines", parsed.skipped)
    journeys = prepare_journeys(parsed.records, cfg)
    _write_journey_files(outdir, journeys)
    _write_manifest(outdir, cfg)
    print(f"journeys: {len(journeys.raw)} journeys "
          f"({len(journeys.stripped)} usable for clustering) -> {outdir}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args)
    if args.method == "spectral":
        journeys = _read_journey_files(Path(args.journeys_dir))
        records = read_records(args.records).records if args.records else [
            rec for j in journeys.raw.values()
            for rec in _journey_records(j)
        ]
        stations = _station_set(records, cfg)
        outcome = spectral_label(journeys, cfg, stations)
    elif args.method == "baseline":
        if not args.records:
            raise DataError("baseline clustering needs --records")
        outcome = baseline_label(read_records(args.records).records, cfg)
    else:
        raise ConfigError(f"unknown method {args.method!r}")
    with open(outdir / "labeled.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_labeled(outcome.labeled, fh)
    _write_manifest(outdir, cfg)
    n_trains = len({r.label for r in outcome.labeled if r.label != -1})
    print(f"cluster[{args.method}]: {len(outcome.labeled)} labeled records, "
          f"{n_trains} clusters -> {outdir}")
    return 0


def _journey_records(journey):
    from .records import WifiRecord

    for leg in journey.legs:
        yield WifiRecord(journey.device, leg.station, leg.last)


def cmd_timetable(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args)
    labeled = read_labeled(args.labeled)
    filtered, trains, incidents = finalize(labeled, cfg)
    with open(outdir / "filtered.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_labeled(filtered, fh)
    with open(outdir / "timetable.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_timetables(trains, fh)
    with open(outdir / "kpi.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_kpis(trains, fh, cfg.headway_mode)
    with open(outdir / "incidents.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_incidents(incidents, fh)
    _write_manifest(outdir, cfg)
    print(f"timetable: {len(trains)} trains, {len(incidents)} incident flags -> {outdir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    est = read_timetables(args.est)
    truth = read_timetables(args.truth)
    report = evaluate(est, truth, args.station, cfg.eval_tolerance_s)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    rate = "n/a" if report.hit_rate is None else f"{report.hit_rate:.3f}"
    print(f"evaluate: trains est={report.n_trains_est} truth={report.n_trains_truth} "
          f"hit_rate={rate} -> {out}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    journeys = _read_journey_files(Path(args.journeys_dir))
    usable = {jid: j for jid, j in journeys.stripped.items() if len(j.legs) >= 2}
    if not usable:
        raise DataError("no journeys usable for clustering")
    directions = [usable[jid].direction for jid in sorted(usable)]
    majority = max(sorted(set(directions)), key=directions.count)
    ids = [jid for jid in sorted(usable) if usable[jid].direction == majority]
    records = [rec for j in journeys.raw.values() for rec in _journey_records(j)]
    stations = _station_set(records, cfg)
    vectors = [vectorize(usable[jid], stations) for jid in ids]
    params = SimilarityParams(cfg.metric, cfg.tolerance_s, cfg.bandwidth_sq_s)
    graph = build_graph(vectors, params, time_cutoff=cfg.time_cutoff_s)
    weights = graph.weights
    active = weights.sum(axis=1) > 0
    pair = LaplacianPair(weights[active][:, active])
    m = min(int(args.count), int(active.sum()))
    spec = generalized_eigs(pair, m)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        spectrum_csv(spec.eigenvalues, fh)
    print(f"spectrum: {m} eigenvalues of {int(active.sum())} vertices -> {out}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(args)
    truth = None
    if args.records:
        parsed = read_records(args.records)
        if parsed.skipped:
            logger.warning("skipped %d malformed lines", parsed.skipped)
        records = parsed.records
    else:
        scenario = _scenario_from_args(args)
        sim = simulate(scenario)
        records = sim.records
        truth = sim.truth
        write_records(records, outdir / "records.csv")
        with open(outdir / "truth.csv", "w", encoding="utf-8", newline="\n") as fh:
            write_timetables(truth, fh)
        write_scenario(scenario, outdir / "scenario.txt")
    if truth is None and args.truth:
        truth = read_timetables(args.truth)

    result = run_pipeline(records, cfg, args.method)
    _write_journey_files(outdir, result.journeys)
    with open(outdir / "labeled.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_labeled(result.labeled, fh)
    with open(outdir / "filtered.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_labeled(result.filtered, fh)
    with open(outdir / "timetable.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_timetables(result.trains, fh)
    with open(outdir / "kpi.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_kpis(result.trains, fh, cfg.headway_mode)
    with open(outdir / "incidents.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_incidents(result.incidents, fh)
    if truth is not None:
        report = evaluate(result.trains, truth, None, cfg.eval_tolerance_s)
        (outdir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _write_manifest(outdir, cfg)
    print(f"pipeline[{args.method}]: {len(result.trains)} trains, "
          f"{len(result.incidents)} incident flags -> {outdir}")
    return 0


def _add_common(p: argparse.ArgumentParser, seed=True) -> None:
    p.add_argument("--config", help="pipeline config file (key = value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="override the run seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainspot",
        description="Reconstruct train timetables from passive WiFi probe traces.",
    )
    parser.add_argument("--version", action="version", version=f"trainspot {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--preset", choices=sorted(PRESETS), default="toy")
    p.add_argument("--scenario", help="scenario config file (overrides --preset)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("journeys", help="segment records into journeys (3 cleaning levels)")
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_journeys)

    p = sub.add_parser("cluster", help="label records with train clusters")
    p.add_argument("--method", choices=("spectral", "baseline"), default="spectral")
    p.add_argument("--journeys-dir", help="directory with journeys_level*.jsonl (spectral)")
    p.add_argument("--records", help="raw records CSV (baseline, or to fix the line length)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=None, help="fixed cluster count (default: eigengap)")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("timetable", help="labeled records -> timetable, KPIs, incidents")
    p.add_argument("--labeled", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_timetable)

    p = sub.add_parser("evaluate", help="compare estimated and true timetables")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--station", type=int, default=None)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("spectrum", help="dump the Laplacian spectrum for eigengap plots")
    p.add_argument("--journeys-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=60)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--method", choices=("spectral", "baseline"), default="spectral")
    p.add_argument("--records", help="input records CSV (otherwise simulate a preset)")
    p.add_argument("--truth", help="truth timetable CSV for the final report")
    p.add_argument("--preset", choices=sorted(PRESETS), default="toy")
    p.add_argument("--scenario", help="scenario config file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
