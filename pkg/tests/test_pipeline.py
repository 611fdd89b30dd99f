import dataclasses

import numpy as np
import pytest

from trainspot.config import PipelineConfig, apply_overrides, config_from_text
from trainspot.errors import ConfigError, DataError
from trainspot.pipeline import (_windows, baseline_label, expand_journey_labels,
                                prepare_journeys, run_pipeline, spectral_label,
                                _station_set)
from trainspot.records import WifiRecord
from trainspot.scenario import dropout_preset, toy_preset
from trainspot.simulate import simulate
from trainspot.evaluate import evaluate


def small_scenario(seed=7, **overrides):
    fields = dict(horizon_s=1900, passengers_per_train_mean=90.0)
    fields.update(overrides)
    return simulate(dataclasses.replace(toy_preset(seed=seed), **fields))


class TestConfig:
    def test_defaults_validate(self):
        PipelineConfig().validate()

    def test_text_roundtrip_and_overrides(self):
        cfg = config_from_text("metric = soft\ntolerance_s = 45\nseed = 9\n")
        assert cfg.metric == "soft" and cfg.tolerance_s == 45.0 and cfg.seed == 9

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_text("nope = 1\n")

    def test_invariants_enforced(self):
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"intra_gap_s": "0"})
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"overlap_s": "6000"})
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"metric": "fuzzy"})

    def test_hash_tracks_content(self):
        a = PipelineConfig()
        b = apply_overrides(a, {"seed": "1"})
        assert a.sha256() != b.sha256()
        assert a.sha256() == PipelineConfig().sha256()


class TestWindows:
    def recs(self, t_max):
        return [WifiRecord("d", 0, 0), WifiRecord("d", 0, t_max)]

    def test_single_window_when_disabled(self):
        cfg = PipelineConfig(window_s=0)
        assert _windows(self.recs(99_999), cfg) == [(0, 100_000)]

    def test_single_window_when_data_fits(self):
        cfg = PipelineConfig(window_s=5400, overlap_s=900)
        assert _windows(self.recs(5000), cfg) == [(0, 5001)]

    def test_overlapping_cover(self):
        cfg = PipelineConfig(window_s=5400, overlap_s=900)
        wins = _windows(self.recs(12_000), cfg)
        assert wins == [(0, 5400), (4500, 9900), (9000, 14400)]
        assert all(a2 < b1 for (_, b1), (a2, _) in zip(wins, wins[1:]))


class TestSpectralPipeline:
    def test_counts_match_truth(self):
        sim = small_scenario()
        res = run_pipeline(sim.records, PipelineConfig(window_s=0), "spectral")
        assert len(res.trains) == len(sim.truth)
        report = evaluate(res.trains, sim.truth)
        assert report.hit_rate is not None and report.hit_rate > 0.8

    def test_windowed_run_matches_single_window(self):
        # short line so a train's whole footprint fits inside the overlap
        sim = small_scenario(seed=9, horizon_s=4200, line_length=6)
        single = run_pipeline(sim.records, PipelineConfig(window_s=0), "spectral")
        windowed = run_pipeline(
            sim.records, PipelineConfig(window_s=3000, overlap_s=1500), "spectral"
        )
        assert len(single.trains) == len(windowed.trains) == len(sim.truth)

    def test_deterministic(self):
        sim = small_scenario()
        cfg = PipelineConfig(window_s=0)
        a = run_pipeline(sim.records, cfg, "spectral")
        b = run_pipeline(sim.records, cfg, "spectral")
        assert a.labeled == b.labeled
        assert [t.stops for t in a.trains] == [t.stops for t in b.trains]

    def test_unknown_method_rejected(self):
        with pytest.raises(DataError):
            run_pipeline(small_scenario().records, PipelineConfig(), "psychic")

    def test_single_leg_journeys_stay_unlabeled(self):
        sim = small_scenario()
        cfg = PipelineConfig(window_s=0)
        journeys = prepare_journeys(sim.records, cfg)
        outcome = spectral_label(journeys, cfg, _station_set(sim.records, cfg))
        for jid, label in outcome.journey_labels.items():
            stripped = journeys.stripped.get(jid)
            if stripped is None or len(stripped.legs) < 2:
                assert label == -1

    def test_expand_uses_trimmed_legs(self):
        sim = small_scenario()
        cfg = PipelineConfig(window_s=0)
        journeys = prepare_journeys(sim.records, cfg)
        outcome = spectral_label(journeys, cfg, _station_set(sim.records, cfg))
        labeled_by_key = {(r.device, r.station, r.timestamp) for r in outcome.labeled}
        for jid, label in outcome.journey_labels.items():
            if label == -1:
                continue
            trimmed = journeys.trimmed[jid]
            for leg in trimmed.legs:
                assert (trimmed.device, leg.station, leg.first) in labeled_by_key
                assert (trimmed.device, leg.station, leg.last) in labeled_by_key


class TestBaselineParity:
    def test_identical_counts_on_clean_data(self):
        # headway is far above the density radius here
        cfg = dataclasses.replace(dropout_preset(seed=1), dropout_events=())
        sim = simulate(cfg)
        pcfg = PipelineConfig(window_s=0, dbscan_eps=10.0, dbscan_min_samples=12)
        base = run_pipeline(sim.records, pcfg, "baseline")
        spec = run_pipeline(sim.records, pcfg, "spectral")
        assert len(base.trains) == len(spec.trains) == len(sim.truth)

    def test_baseline_deterministic(self):
        cfg = dataclasses.replace(dropout_preset(seed=2), dropout_events=())
        sim = simulate(cfg)
        pcfg = PipelineConfig(window_s=0, dbscan_eps=10.0, dbscan_min_samples=12)
        a = baseline_label(sim.records, pcfg)
        b = baseline_label(sim.records, pcfg)
        assert a.labeled == b.labeled
