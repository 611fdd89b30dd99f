"""Pipeline configuration: one flat key-value file drives every stage.

The same ``key = value`` format as scenario files. Any key can be
overridden on the command line with ``--set key=value``. A sha256 of the
canonical serialization goes into the run manifest so outputs can be
reproduced exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    # journey segmentation
    intra_gap_s: int = 480
    inter_gap_s: int = 1800
    line_length: int = 0            # 0 = infer from the data
    exclude_stations: tuple[int, ...] = ()
    # similarity
    metric: str = "hard"
    tolerance_s: float = 30.0
    bandwidth_sq_s: float = 30.0
    time_cutoff_s: float = 1800.0
    # spectral clustering
    n_clusters: int = 0             # 0 = eigengap selection
    k_min: int = 2
    k_max: int = 0                  # 0 = min(60, n/10)
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    # station-wise baseline
    dbscan_eps: float = 6.0         # data-dependent; override per deployment
    dbscan_min_samples: int = 10
    link_min_s: int = 1
    link_max_s: int = 1800
    # outlier removal
    knn_neighbors: int = 5
    mad_sigma_cutoff: float = 3.5
    filter_order: str = "knn,mad"
    # windowing / merge
    window_s: int = 5400
    overlap_s: int = 900
    dedup_tolerance_s: int = 60
    min_train_stations: int = 2
    # KPIs / incidents
    headway_mode: str = "arrival"
    incident_window: int = 10
    incident_threshold: float = 3.5
    incident_floor_s: float = 60.0
    # evaluation
    eval_tolerance_s: int = 60
    # randomness
    seed: int = 0

    def validate(self) -> None:
        if not (0 < self.intra_gap_s <= self.inter_gap_s):
            raise ConfigError("require 0 < intra_gap_s <= inter_gap_s")
        if self.metric not in ("hard", "soft"):
            raise ConfigError("metric must be 'hard' or 'soft'")
        if self.tolerance_s <= 0 or self.bandwidth_sq_s <= 0:
            raise ConfigError("similarity scales must be > 0")
        if self.time_cutoff_s <= 0:
            raise ConfigError("time_cutoff_s must be > 0")
        if self.n_clusters < 0:
            raise ConfigError("n_clusters must be >= 0 (0 = eigengap)")
        if self.k_min < 1 or (self.k_max and self.k_max < self.k_min):
            raise ConfigError("require 1 <= k_min <= k_max")
        if self.kmeans_restarts < 1 or self.kmeans_max_iter < 1:
            raise ConfigError("k-means restarts and iterations must be >= 1")
        if self.dbscan_eps <= 0 or self.dbscan_min_samples < 1:
            raise ConfigError("dbscan parameters out of range")
        if not (0 <= self.link_min_s <= self.link_max_s):
            raise ConfigError("require 0 <= link_min_s <= link_max_s")
        if self.knn_neighbors < 1:
            raise ConfigError("knn_neighbors must be >= 1")
        if self.mad_sigma_cutoff <= 0:
            raise ConfigError("mad_sigma_cutoff must be > 0")
        for name in self.filter_order.split(","):
            if name.strip() not in ("knn", "mad", ""):
                raise ConfigError(f"unknown outlier filter {name.strip()!r}")
        if self.window_s < 0 or self.overlap_s < 0:
            raise ConfigError("window_s and overlap_s must be >= 0")
        if self.window_s and self.overlap_s >= self.window_s:
            raise ConfigError("overlap_s must be smaller than window_s")
        if self.dedup_tolerance_s < 0:
            raise ConfigError("dedup_tolerance_s must be >= 0")
        if self.min_train_stations < 2:
            raise ConfigError("min_train_stations must be >= 2")
        if self.headway_mode not in ("arrival", "departure"):
            raise ConfigError("headway_mode must be 'arrival' or 'departure'")
        if self.incident_window < 1:
            raise ConfigError("incident_window must be >= 1")
        if self.incident_threshold <= 0 or self.incident_floor_s <= 0:
            raise ConfigError("incident threshold/floor must be > 0")
        if self.eval_tolerance_s <= 0:
            raise ConfigError("eval_tolerance_s must be > 0")
        if any(s < 0 for s in self.exclude_stations):
            raise ConfigError("exclude_stations must be >= 0")

    def filters(self) -> tuple[str, ...]:
        return tuple(n.strip() for n in self.filter_order.split(",") if n.strip())

    def canonical(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if f.name == "exclude_stations":
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def config_from_text(text: str) -> PipelineConfig:
    overrides: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        overrides[key] = value
    return apply_overrides(PipelineConfig(), overrides)


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    by_name = {f.name: f for f in fields(PipelineConfig)}
    kwargs = {}
    for key, value in overrides.items():
        if key not in by_name:
            raise ConfigError(f"unknown pipeline key {key!r}")
        anno = str(by_name[key].type)
        try:
            if key == "exclude_stations":
                kwargs[key] = tuple(int(v) for v in value.split(",") if v.strip()) if value else ()
            elif anno.startswith("int"):
                kwargs[key] = int(value)
            elif anno.startswith("float"):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}")
    out = replace(cfg, **kwargs)
    out.validate()
    return out


def read_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read())
