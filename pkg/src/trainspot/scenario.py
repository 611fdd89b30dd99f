"""Synthetic scenario configuration.

A scenario describes one line, a dispatch schedule with jitter, a
passenger population, the probe-request noise model, and optional
station-level failures (full observation dropout) or service
suspensions. Configs round-trip through a plain key-value text file
(``key = value`` per line; repeat ``dropout``/``suspension`` keys to
list events).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class StationEvent:
    """A (station, [start, end)) interval."""

    station: int
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError("event interval must have start < end")
        if self.station < 0:
            raise ConfigError("event station must be >= 0")

    def covers(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class ScenarioConfig:
    line_length: int = 16
    horizon_s: int = 5400                 # dispatch cutoff; trains run to completion
    headway_mean_s: float = 180.0
    headway_std_s: float = 15.0
    dwell_mean_s: float = 40.0
    dwell_std_s: float = 8.0
    runtime_mean_s: float = 105.0         # per inter-station link
    runtime_std_s: float = 10.0
    passengers_per_train_mean: float = 90.0
    probe_median_s: float = 60.0          # log-normal inter-probe median
    probe_sigma_log: float = 1.0
    detection_prob: float = 0.6           # per emitted probe
    platform_wait_mean_s: float = 150.0
    platform_wait_std_s: float = 50.0
    spoofed_device_rate: float = 0.0      # one-record devices per passenger
    dropout_events: tuple[StationEvent, ...] = field(default_factory=tuple)
    suspension_events: tuple[StationEvent, ...] = field(default_factory=tuple)
    rng_seed: int = 0

    def validate(self) -> None:
        if self.line_length < 2:
            raise ConfigError("line_length must be >= 2")
        if self.horizon_s <= 0:
            raise ConfigError("horizon_s must be > 0")
        for name in ("headway_mean_s", "dwell_mean_s", "runtime_mean_s",
                     "probe_median_s", "passengers_per_train_mean"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("headway_std_s", "dwell_std_s", "runtime_std_s",
                     "probe_sigma_log", "platform_wait_mean_s", "platform_wait_std_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("detection_prob", "spoofed_device_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.headway_mean_s <= self.dwell_mean_s:
            raise ConfigError(
                "infeasible schedule: headway_mean_s must exceed dwell_mean_s"
            )
        for ev in self.dropout_events + self.suspension_events:
            if ev.station >= self.line_length:
                raise ConfigError("event station beyond the line")


_EVENT_KEYS = {"dropout": "dropout_events", "suspension": "suspension_events"}


def scenario_to_text(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in ("dropout_events", "suspension_events"):
            key = "dropout" if f.name == "dropout_events" else "suspension"
            for ev in value:
                lines.append(f"{key} = {ev.station},{ev.start},{ev.end}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> ScenarioConfig:
    field_types = {f.name: f.type for f in fields(ScenarioConfig)}
    kwargs: dict = {"dropout_events": [], "suspension_events": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _EVENT_KEYS:
            try:
                station, start, end = (int(x) for x in value.split(","))
            except ValueError:
                raise ConfigError(f"line {lineno}: event needs 'station,start,end'")
            kwargs[_EVENT_KEYS[key]].append(StationEvent(station, start, end))
        elif key in field_types:
            anno = str(field_types[key])
            try:
                kwargs[key] = int(value) if "int" in anno else float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value {value!r} for {key}")
        else:
            raise ConfigError(f"line {lineno}: unknown scenario key {key!r}")
    kwargs["dropout_events"] = tuple(kwargs["dropout_events"])
    kwargs["suspension_events"] = tuple(kwargs["suspension_events"])
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def read_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_text(fh.read())


def write_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(scenario_to_text(cfg))


# --- presets used by the demos and the acceptance suite ----------------------

def toy_preset(seed: int = 7) -> ScenarioConfig:
    """Small off-peak window: ~21 trains over 16 stations, moderate probe
    rates. The eigengap demo scenario."""
    return ScenarioConfig(
        line_length=16, horizon_s=3780,
        headway_mean_s=180.0, headway_std_s=12.0,
        dwell_mean_s=42.0, dwell_std_s=6.0,
        runtime_mean_s=100.0, runtime_std_s=8.0,
        passengers_per_train_mean=110.0,
        probe_median_s=35.0, probe_sigma_log=0.7,
        detection_prob=0.6,
        platform_wait_mean_s=140.0, platform_wait_std_s=45.0,
        spoofed_device_rate=0.05,
        rng_seed=seed,
    )


def peak_preset(seed: int = 0, passengers: float = 180.0) -> ScenarioConfig:
    """Peak-hour window: ~43 trains at ~125 s headway, sparse probing."""
    return ScenarioConfig(
        line_length=16, horizon_s=5400,
        headway_mean_s=125.0, headway_std_s=7.0,
        dwell_mean_s=45.0, dwell_std_s=6.0,
        runtime_mean_s=100.0, runtime_std_s=8.0,
        passengers_per_train_mean=passengers,
        probe_median_s=90.0, probe_sigma_log=0.7,
        detection_prob=0.6,
        platform_wait_mean_s=150.0, platform_wait_std_s=50.0,
        spoofed_device_rate=0.05,
        rng_seed=seed,
    )


def coverage_preset(seed: int = 11) -> ScenarioConfig:
    """Probe density tuned so a device is recorded at roughly 60% of the
    stations it passes (15-station line): mostly-idle devices probing
    every few minutes, with unhurried platform waits anchoring the
    journey endpoints."""
    return ScenarioConfig(
        line_length=15, horizon_s=3600,
        headway_mean_s=200.0, headway_std_s=15.0,
        dwell_mean_s=45.0, dwell_std_s=6.0,
        runtime_mean_s=100.0, runtime_std_s=8.0,
        passengers_per_train_mean=120.0,
        probe_median_s=95.0, probe_sigma_log=0.6,
        detection_prob=0.6,
        platform_wait_mean_s=300.0, platform_wait_std_s=55.0,
        rng_seed=seed,
    )


def dropout_preset(seed: int = 0) -> ScenarioConfig:
    """Clean mid-frequency service with a full observation dropout at one
    interior station for part of the run."""
    return ScenarioConfig(
        line_length=12, horizon_s=4500,
        headway_mean_s=300.0, headway_std_s=20.0,
        dwell_mean_s=40.0, dwell_std_s=6.0,
        runtime_mean_s=100.0, runtime_std_s=8.0,
        passengers_per_train_mean=240.0,
        probe_median_s=40.0, probe_sigma_log=0.7,
        detection_prob=0.85,
        platform_wait_mean_s=90.0, platform_wait_std_s=30.0,
        dropout_events=(StationEvent(5, 1200, 2600),),
        rng_seed=seed,
    )


def incident_preset(seed: int = 3, suspended: bool = True) -> ScenarioConfig:
    """Three-hour run with a 30-minute suspension at station 15 (and its
    no-incident twin for false-positive checks)."""
    events = (StationEvent(15, 5700, 7500),) if suspended else ()
    return ScenarioConfig(
        line_length=18, horizon_s=10800,
        headway_mean_s=240.0, headway_std_s=18.0,
        dwell_mean_s=40.0, dwell_std_s=6.0,
        runtime_mean_s=95.0, runtime_std_s=8.0,
        passengers_per_train_mean=130.0,
        probe_median_s=35.0, probe_sigma_log=0.8,
        detection_prob=0.85,
        platform_wait_mean_s=150.0, platform_wait_std_s=45.0,
        spoofed_device_rate=0.03,
        suspension_events=events,
        rng_seed=seed,
    )


PRESETS = {
    "toy": toy_preset,
    "peak": peak_preset,
    "coverage": coverage_preset,
    "dropout": dropout_preset,
    "incident": incident_preset,
    "incident-clear": lambda seed=3: incident_preset(seed, suspended=False),
}


def preset(name: str, seed: int | None = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[name]() if seed is None else PRESETS[name](seed)
    return cfg
