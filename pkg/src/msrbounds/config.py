"""Scenario configuration: TOML loading, validation and serialization.

Every field has a default mirroring the reference setup (25 radars at
500 m spacing, 33 dBm, 2.4 GHz, 50 MHz chirps, ...), so an empty file is a
complete configuration.  Keys are addressed as ``section.field`` both in
error messages and in sweep specifications, e.g. ``sync.bandwidth``.

Units are SI unless the field name says otherwise (``*_dbm``, ``*_db``).
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import db_to_linear, dbm_to_watts
from .errors import ConfigurationError
from .geometry import RadarNode, build_layout, nodes_from_positions
from .radar_link import LfmPulseTrain, LinkBudget
from .sync_model import CLOCK_RULES, PATH_LOSS_MODELS, SyncLinkConfig

MODES = ("synced", "ideal", "monostatic")
VELOCITY_SAMPLING = ("isotropic", "component")


@dataclass(frozen=True)
class LayoutSection:
    n_nodes: int = 25
    spacing: float = 500.0
    height: float = 10.0
    # Explicit [x, y, z] per node, leader first; overrides the grid when given.
    positions: tuple = ()


@dataclass(frozen=True)
class RadarSection:
    tx_power_dbm: float = 33.0
    tx_gain_db: float = 10.0
    rx_gain_db: float = 10.0
    rcs: float = 0.1
    noise_figure_db: float = 4.0
    array_gain: float = 16.0
    carrier: float = 2.4e9
    bandwidth: float = 50e6
    pulse_duration: float = 100e-6
    pri: float = 1e-3
    pulses: int = 20
    # 0 means "equal to the sweep bandwidth".
    noise_bandwidth: float = 0.0


@dataclass(frozen=True)
class SyncSection:
    tx_power_dbm: float = 33.0
    tx_gain_db: float = 1.0
    rx_gain_db: float = 1.0
    carrier: float = 2.4e9
    bandwidth: float = 50e6
    time_bandwidth: float = 1.0
    noise_figure_db: float = 4.0
    rician_k: float = 3.0
    rms_delay_spread: float = 100e-9
    max_doppler: float = 0.1
    tone_separation: float = 10e6
    # 0 means carrier / tone_separation.
    pll_factor: float = 0.0
    tone_observation: float = 1e-3
    channel_resolution: float = 10e-9
    path_loss: str = "uma"
    clock_rule: str = "std"
    outage_threshold: float = 1e-6
    # tone power (relative to mean) below which frequency sync is in outage
    tone_outage_threshold: float = 1e-2
    realizations: int = 200


@dataclass(frozen=True)
class TargetSection:
    x: tuple = (-1000.0, 1000.0)
    y: tuple = (-1000.0, 1000.0)
    z: tuple = (50.0, 100.0)
    speed: tuple = (0.0, 20.0)
    velocity_sampling: str = "isotropic"
    count: int = 1000


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    mode: str = "synced"
    diagonal_fim: bool = False
    prior_scale: float = 1.0
    sigma_t_floor: float = 0.0
    sigma_f_floor: float = 0.0


_SECTIONS = {
    "layout": LayoutSection,
    "radar": RadarSection,
    "sync": SyncSection,
    "targets": TargetSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class ScenarioConfig:
    layout: LayoutSection = field(default_factory=LayoutSection)
    radar: RadarSection = field(default_factory=RadarSection)
    sync: SyncSection = field(default_factory=SyncSection)
    targets: TargetSection = field(default_factory=TargetSection)
    run: RunSection = field(default_factory=RunSection)
    # name -> tuple of values; kept in insertion order
    sweep: tuple = ()

    def __post_init__(self):
        validate(self)

    # -- domain objects ----------------------------------------------------

    def nodes(self) -> list[RadarNode]:
        r = self.radar
        g_t, g_r = db_to_linear(r.tx_gain_db), db_to_linear(r.rx_gain_db)
        if self.layout.positions:
            return nodes_from_positions(self.layout.positions, g_t, g_r)
        return build_layout(self.layout.n_nodes, self.layout.spacing, self.layout.height, g_t, g_r)

    def waveform(self) -> LfmPulseTrain:
        r = self.radar
        return LfmPulseTrain(r.bandwidth, r.pulse_duration, r.pri, r.pulses, r.carrier)

    def link_budget(self) -> LinkBudget:
        r = self.radar
        return LinkBudget(
            tx_power=dbm_to_watts(r.tx_power_dbm),
            tx_gain=db_to_linear(r.tx_gain_db),
            rx_gain=db_to_linear(r.rx_gain_db),
            rcs=r.rcs,
            noise_figure=db_to_linear(r.noise_figure_db),
            array_gain=r.array_gain,
            bandwidth=r.noise_bandwidth or r.bandwidth,
        )

    def sync_link(self) -> SyncLinkConfig:
        s = self.sync
        return SyncLinkConfig(
            tx_power=dbm_to_watts(s.tx_power_dbm),
            tx_gain=db_to_linear(s.tx_gain_db),
            rx_gain=db_to_linear(s.rx_gain_db),
            f_c=s.carrier,
            bandwidth=s.bandwidth,
            time_bandwidth=s.time_bandwidth,
            noise_figure=db_to_linear(s.noise_figure_db),
            rician_k=s.rician_k,
            rms_delay_spread=s.rms_delay_spread,
            max_doppler=s.max_doppler,
            tone_separation=s.tone_separation,
            pll_factor=s.pll_factor or None,
            tone_observation=s.tone_observation,
            channel_resolution=s.channel_resolution,
            path_loss=s.path_loss,
            clock_rule=s.clock_rule,
            outage_threshold=s.outage_threshold,
            tone_outage_threshold=s.tone_outage_threshold,
        )

    # -- overrides -----------------------------------------------------------

    @property
    def sweep_axes(self) -> dict[str, tuple]:
        return dict(self.sweep)

    def get(self, name: str) -> Any:
        section, key = _split_name(name)
        return getattr(getattr(self, section), key)

    def with_overrides(self, overrides: dict[str, Any]) -> "ScenarioConfig":
        """Copy with ``{"section.field": value}`` replacements applied."""
        changes: dict[str, dict] = {}
        for name, value in overrides.items():
            section, key = _split_name(name)
            changes.setdefault(section, {})[key] = _coerce(name, _field_type(section, key), value)
        kwargs = {
            sec: dataclasses.replace(getattr(self, sec), **vals) for sec, vals in changes.items()
        }
        return dataclasses.replace(self, **kwargs)

    def with_sweep(self, axes: dict[str, list]) -> "ScenarioConfig":
        return dataclasses.replace(self, sweep=_normalize_sweep(axes))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for sec in _SECTIONS:
            d = {}
            for f in fields(_SECTIONS[sec]):
                value = getattr(getattr(self, sec), f.name)
                d[f.name] = [list(x) if isinstance(x, tuple) else x for x in value] if isinstance(value, tuple) else value
            out[sec] = d
        out["sweep"] = {name: list(values) for name, values in self.sweep}
        return out


def parameter_names() -> list[str]:
    return [f"{sec}.{f.name}" for sec, cls in _SECTIONS.items() for f in fields(cls)]


def _split_name(name: str) -> tuple[str, str]:
    section, _, key = name.partition(".")
    if section not in _SECTIONS or key not in {f.name for f in fields(_SECTIONS[section])}:
        raise ConfigurationError(f"unknown parameter {name!r}")
    return section, key


def _field_type(section: str, key: str):
    default = getattr(_SECTIONS[section](), key)
    return type(default)


def _coerce(name: str, typ, value):
    """Convert a parsed value to the field's type, naming the field on failure."""
    try:
        if typ is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
                return value.lower() in ("true", "1")
            raise TypeError
        if typ is int:
            if isinstance(value, bool):
                raise TypeError
            if isinstance(value, float) and value.is_integer():
                return int(value)
            if isinstance(value, str):
                f = float(value)
                if not f.is_integer():
                    raise TypeError
                return int(f)
            if isinstance(value, int):
                return value
            raise TypeError
        if typ is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if typ is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if typ is tuple:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else float(v) for v in value)
    except (TypeError, ValueError):
        pass
    raise ConfigurationError(f"{name}: expected {typ.__name__}, got {value!r}")


def _normalize_sweep(axes) -> tuple:
    out = []
    for name, values in dict(axes).items():
        section, key = _split_name(name)
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigurationError(f"sweep.{name}: needs a non-empty list of values")
        typ = _field_type(section, key)
        out.append((name, tuple(_coerce(f"sweep.{name}", typ, v) for v in values)))
    return tuple(out)


def _check(cond: bool, name: str, msg: str, value) -> None:
    if not cond:
        raise ConfigurationError(f"{name}: {msg} (got {value!r})")


def _check_range(name: str, rng) -> None:
    _check(len(rng) == 2 and rng[0] <= rng[1], name, "must be [min, max] with min <= max", list(rng))
    _check(all(math.isfinite(x) for x in rng), name, "must be finite", list(rng))


def validate(cfg: ScenarioConfig) -> None:
    """Domain checks; raises ConfigurationError naming the offending field."""
    lay, rad, syn, tgt, run = cfg.layout, cfg.radar, cfg.sync, cfg.targets, cfg.run
    if lay.positions:
        for i, p in enumerate(lay.positions):
            _check(len(p) == 3, f"layout.positions[{i}]", "must be [x, y, z]", p)
    else:
        s = math.isqrt(lay.n_nodes) if lay.n_nodes > 0 else 0
        _check(lay.n_nodes >= 1 and s * s == lay.n_nodes and s % 2 == 1,
               "layout.n_nodes", "must be an odd perfect square", lay.n_nodes)
        _check(lay.spacing > 0, "layout.spacing", "must be > 0", lay.spacing)
    _check(math.isfinite(lay.height), "layout.height", "must be finite", lay.height)

    for name in ("rcs", "array_gain", "carrier", "bandwidth", "pulse_duration", "pri"):
        v = getattr(rad, name)
        _check(v > 0 and math.isfinite(v), f"radar.{name}", "must be > 0", v)
    _check(rad.pri >= rad.pulse_duration, "radar.pri", "must be >= radar.pulse_duration", rad.pri)
    # P = 1 makes the delay-Doppler FIM rank one: no radar would be usable.
    _check(rad.pulses >= 2, "radar.pulses", "must be >= 2", rad.pulses)
    _check(rad.noise_bandwidth >= 0, "radar.noise_bandwidth", "must be >= 0 (0 = bandwidth)", rad.noise_bandwidth)
    for name in ("tx_power_dbm", "tx_gain_db", "rx_gain_db", "noise_figure_db"):
        _check(math.isfinite(getattr(rad, name)), f"radar.{name}", "must be finite", getattr(rad, name))

    for name in ("carrier", "bandwidth", "time_bandwidth", "tone_separation",
                 "tone_observation", "channel_resolution", "outage_threshold"):
        v = getattr(syn, name)
        _check(v > 0 and math.isfinite(v), f"sync.{name}", "must be > 0", v)
    for name in ("tx_power_dbm", "tx_gain_db", "rx_gain_db", "noise_figure_db"):
        _check(math.isfinite(getattr(syn, name)), f"sync.{name}", "must be finite", getattr(syn, name))
    _check(syn.rician_k >= 0, "sync.rician_k", "must be >= 0", syn.rician_k)
    _check(syn.rms_delay_spread >= 0 and math.isfinite(syn.rms_delay_spread),
           "sync.rms_delay_spread", "must be >= 0", syn.rms_delay_spread)
    _check(syn.tone_outage_threshold >= 0, "sync.tone_outage_threshold", "must be >= 0",
           syn.tone_outage_threshold)
    _check(syn.max_doppler >= 0, "sync.max_doppler", "must be >= 0", syn.max_doppler)
    _check(syn.pll_factor >= 0, "sync.pll_factor", "must be >= 0 (0 = carrier / tone_separation)", syn.pll_factor)
    _check(syn.path_loss in PATH_LOSS_MODELS, "sync.path_loss", f"must be one of {PATH_LOSS_MODELS}", syn.path_loss)
    _check(syn.clock_rule in CLOCK_RULES, "sync.clock_rule", f"must be one of {CLOCK_RULES}", syn.clock_rule)
    _check(syn.realizations >= 1, "sync.realizations", "must be >= 1", syn.realizations)

    for name in ("x", "y", "z", "speed"):
        _check_range(f"targets.{name}", getattr(tgt, name))
    _check(tgt.speed[0] >= 0, "targets.speed", "must be non-negative", list(tgt.speed))
    _check(tgt.velocity_sampling in VELOCITY_SAMPLING, "targets.velocity_sampling",
           f"must be one of {VELOCITY_SAMPLING}", tgt.velocity_sampling)
    _check(tgt.count >= 1, "targets.count", "must be >= 1", tgt.count)

    _check(0 <= run.seed < 2**64, "run.seed", "must be an unsigned 64-bit integer", run.seed)
    _check(run.mode in MODES, "run.mode", f"must be one of {MODES}", run.mode)
    _check(run.prior_scale > 0, "run.prior_scale", "must be > 0", run.prior_scale)
    _check(run.sigma_t_floor >= 0, "run.sigma_t_floor", "must be >= 0", run.sigma_t_floor)
    _check(run.sigma_f_floor >= 0, "run.sigma_f_floor", "must be >= 0", run.sigma_f_floor)

    names = [n for n, _ in cfg.sweep]
    _check(len(set(names)) == len(names), "sweep", "duplicate axis", names)


def from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - set(_SECTIONS) - {"sweep"}
    if unknown:
        raise ConfigurationError(f"unknown section(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    for sec, cls in _SECTIONS.items():
        raw = data.get(sec, {})
        if not isinstance(raw, dict):
            raise ConfigurationError(f"[{sec}] must be a table")
        known = {f.name: f for f in fields(cls)}
        bad = set(raw) - set(known)
        if bad:
            raise ConfigurationError(
                f"unknown key(s) in [{sec}]: {', '.join(f'{sec}.{k}' for k in sorted(bad))}"
            )
        values = {k: _coerce(f"{sec}.{k}", _field_type(sec, k), v) for k, v in raw.items()}
        try:
            kwargs[sec] = cls(**values)
        except TypeError as exc:  # pragma: no cover - guarded above
            raise ConfigurationError(str(exc)) from exc
    sweep = data.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigurationError("[sweep] must be a table of name = [values]")
    kwargs["sweep"] = _normalize_sweep(sweep)
    return ScenarioConfig(**kwargs)


def loads_config(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"parse error: {exc}") from exc
    return from_dict(data)


def load_config(path) -> ScenarioConfig:
    """Read and validate a TOML scenario file; omitted fields take defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    try:
        return loads_config(text)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def dumps_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")
