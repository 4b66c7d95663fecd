"""Scenario configuration.

Config files are INI text with one section per module::

    [constellation]
    preset = telesat

    [scenario]
    scheme = susco
    num_intervals = 20
    rng_seed = 7

Every key is optional and falls back to the dataclass default.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .auction import UtilityWeights
from .baselines import SchemeChoice
from .constellation import ConstellationConfig, LatencyParams, preset

BUNDLED_DISHES = Path(__file__).with_name("data") / "dishes.csv"


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class BatteryParams:
    capacity: float = 2.0e6  # J
    chemistry_constant: float = 1.0
    max_lifespan: float = 1000.0
    initial_level: tuple[float, float] = (0.3, 1.0)
    initial_lifespan: tuple[float, float] = (0.3, 1.0)  # fraction of max_lifespan
    epsilon: float = 0.08  # J/Mb
    solar_charge_rate: float = 600.0  # W
    idle_draw: float = 400.0  # W


@dataclass(frozen=True)
class ScenarioConfig:
    constellation: ConstellationConfig = field(default_factory=lambda: preset("starlink"))
    preset_name: str = "starlink"
    dish_catalog: str = ""  # empty: bundled catalog
    scheme: SchemeChoice = SchemeChoice.SUSCO
    num_intervals: int = 100
    interval_length: float = 60.0
    source_rate: float = 300.0  # Mb/s per source
    num_sources: int = 10
    tasks_per_source: tuple[int, int] = (1, 8)
    delay_range: tuple[float, float] = (50.0, 200.0)  # ms
    bandwidth_range: tuple[float, float] = (50.0, 200.0)  # Mb/s
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    max_group_size: int = 2  # N
    top_m: int = 10  # M
    alpha: float = 0.09  # per GB
    beta_price: float = 0.17  # per second
    budget_factor: float = 2.0
    fallback_budget: float = 1.0
    dish_window: float = 5.0  # s of receive time a dish offers one task
    reliable_failure_rate: float | None = None  # None: keep catalog values
    unreliable_fraction: float = 0.0
    unreliable_failure_rate: float = 0.5
    isl_load_max: float = 0.8
    battery: BatteryParams = field(default_factory=BatteryParams)
    latency: LatencyParams = field(default_factory=LatencyParams)
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_intervals < 0:
            raise ConfigError("num_intervals must be >= 0")
        if self.interval_length <= 0:
            raise ConfigError("interval_length must be positive")
        if self.source_rate < 0 or self.num_sources < 0:
            raise ConfigError("source_rate and num_sources must be >= 0")
        lo, hi = self.tasks_per_source
        if not 1 <= lo <= hi:
            raise ConfigError("tasks_per_source must satisfy 1 <= low <= high")
        for name in ("delay_range", "bandwidth_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < low <= high")
        if self.max_group_size < 1 or self.top_m < 1:
            raise ConfigError("max_group_size and top_m must be >= 1")
        if self.budget_factor <= 0 or self.fallback_budget <= 0:
            raise ConfigError("budget_factor and fallback_budget must be positive")
        if self.dish_window <= 0:
            raise ConfigError("dish_window must be positive")
        if not 0.0 <= self.unreliable_fraction <= 1.0:
            raise ConfigError("unreliable_fraction must be in [0, 1]")
        for rate in (self.unreliable_failure_rate, self.reliable_failure_rate):
            if rate is not None and not 0.0 <= rate <= 1.0:
                raise ConfigError("failure rates must be in [0, 1]")
        if not 0.0 <= self.isl_load_max < 1.0:
            raise ConfigError("isl_load_max must be in [0, 1)")

    @property
    def catalog_path(self) -> Path:
        return Path(self.dish_catalog) if self.dish_catalog else BUNDLED_DISHES

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _pair(text: str, cast=float) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(f"expected two values, got {text!r}")
    return cast(parts[0]), cast(parts[1])


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, tuple):
        return _pair(value, type(default[0]))
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float) or default is None:
        return None if value.strip().lower() in ("", "none") else float(value)
    if isinstance(default, SchemeChoice):
        return SchemeChoice(value.strip().lower())
    return value.strip()


def _apply(obj, section: configparser.SectionProxy, where: str):
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"[{where}] unknown key {key!r}")
        try:
            changes[key] = _coerce(raw, getattr(obj, key))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{where}] bad value for {key}: {raw!r} ({exc})") from None
    return dataclasses.replace(obj, **changes)


def load_config(path) -> ScenarioConfig:
    """Read a scenario file; relative catalog paths resolve against the file's folder."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    allowed = {"constellation", "scenario", "tasks", "auction", "power", "latency", "dishes"}
    unknown = set(parser.sections()) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    try:
        return _build(parser, path.parent)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _build(parser: configparser.ConfigParser, base: Path) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if parser.has_section("constellation"):
        sec = dict(parser["constellation"])
        name = sec.pop("preset", cfg.preset_name).strip().lower()
        const = preset(name)
        if sec:
            const = _apply(const, _Section(sec), "constellation")
        cfg = cfg.replace(constellation=const, preset_name=name)
    flat = {}
    for section in ("scenario", "tasks", "auction", "dishes"):
        if parser.has_section(section):
            flat.update(parser[section])
    weights = [flat.pop(k) for k in ("w1", "w2", "w3") if k in flat]
    if weights:
        if len(weights) != 3:
            raise ConfigError("give all of w1, w2, w3")
        cfg = cfg.replace(weights=UtilityWeights(*map(float, weights)))
    if flat:
        cfg = _apply(cfg, _Section(flat), "scenario")
    if parser.has_section("power"):
        cfg = cfg.replace(battery=_apply(cfg.battery, parser["power"], "power"))
    if parser.has_section("latency"):
        cfg = cfg.replace(latency=_apply(cfg.latency, parser["latency"], "latency"))
    if cfg.dish_catalog and not Path(cfg.dish_catalog).is_absolute():
        cfg = cfg.replace(dish_catalog=str(base / cfg.dish_catalog))
    return cfg


class _Section(dict):
    def items(self):  # mimic SectionProxy.items()
        return super().items()


def dump_config(cfg: ScenarioConfig) -> str:
    """Render a config as INI text that :func:`load_config` reads back."""
    def fmt(v):
        if isinstance(v, tuple):
            return f"{v[0]}, {v[1]}"
        if isinstance(v, SchemeChoice):
            return v.value
        return "none" if v is None else str(v)

    out = configparser.ConfigParser()
    c = cfg.constellation
    out["constellation"] = {"preset": cfg.preset_name, **{f.name: fmt(getattr(c, f.name)) for f in fields(c)}}
    skip = {"constellation", "preset_name", "weights", "battery", "latency"}
    scen = {f.name: fmt(getattr(cfg, f.name)) for f in fields(cfg) if f.name not in skip}
    scen.update(w1=str(cfg.weights.w1), w2=str(cfg.weights.w2), w3=str(cfg.weights.w3))
    out["scenario"] = scen
    out["power"] = {f.name: fmt(getattr(cfg.battery, f.name)) for f in fields(cfg.battery)}
    out["latency"] = {f.name: fmt(getattr(cfg.latency, f.name)) for f in fields(cfg.latency)}
    import io
    buf = io.StringIO()
    out.write(buf)
    return buf.getvalue()
