"""INI run configuration: sections mirror the library's parameter types."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .geometry import GeometryConfig
from .simulator.topology import TOPOLOGY_MODES
from .throughput import AnalysisOptions, MacPhyParams

SWEEP_VARIABLES = ("n", "M", "d")
REGIMES = ("fd", "hd", "both")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 1_000_000
    seed: int = 0
    topology_mode: str = "sampled"
    replications: int = 20
    n_batches: int = 10
    comparator: str = "geometric"

    def __post_init__(self):
        if self.topology_mode not in TOPOLOGY_MODES:
            raise ConfigError(f"unknown topology_mode {self.topology_mode!r}")
        if self.comparator not in ("geometric", "realized"):
            raise ConfigError(f"unknown comparator {self.comparator!r}")
        if self.replications < 2:
            raise ConfigError("replications must be at least 2")


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "n"
    values: tuple = ()

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if self.values and self.variable in ("n", "M"):
            if any(int(v) != v or v < 1 for v in self.values):
                raise ConfigError(f"sweep over {self.variable} needs positive integers")


@dataclass(frozen=True)
class RunConfig:
    name: str = "table1"
    geometry: GeometryConfig = GeometryConfig(r=1.0, M=5, n=10)
    mac_phy: MacPhyParams = MacPhyParams()
    analysis: AnalysisOptions = AnalysisOptions()
    sim: SimSettings = SimSettings()
    sweep: SweepSpec = SweepSpec()
    regime: str = "fd"
    out: str | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "GeometryConfig": ("geometry", GeometryConfig),
    "MacPhyParams": ("mac_phy", MacPhyParams),
    "AnalysisOptions": ("analysis", AnalysisOptions),
    "SimConfig": ("sim", SimSettings),
}


def _coerce(text, default, name):
    text = text.strip()
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int) or (default is None and name == "rho"):
        if default is None and text.lower() in ("", "none", "auto"):
            return None
        try:
            return int(text)
        except ValueError:
            value = float(text)
            if value != int(value):
                raise ConfigError(f"{name} must be an integer, got {text!r}") from None
            return int(value)
    if isinstance(default, float):
        return float(text)
    return text


def parse_values(text):
    """``"5:50:5"`` (inclusive start:stop:step) or ``"1,2,5"``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"bad range {text!r}; expected start:stop[:step]")
        start, stop, step = parts
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [start + k * step for k in range(count)]
    else:
        values = [float(x) for x in text.split(",") if x.strip()]
    return tuple(int(v) if float(v).is_integer() else v for v in values)


def _section_to(obj_cls, items, section):
    defaults = {f.name: f.default for f in dataclasses.fields(obj_cls)}
    kwargs = {}
    for key, text in items:
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        kwargs[key] = _coerce(text, defaults[key], key)
    try:
        return obj_cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse INI text; absent sections keep the values of ``base``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = base or RunConfig()
    known = set(_SECTIONS) | {"scenario", "sweep"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
    changes = {}
    for section, (attr, cls) in _SECTIONS.items():
        if parser.has_section(section):
            merged = {f.name: getattr(getattr(cfg, attr), f.name) for f in dataclasses.fields(cls)}
            items = [(k, str(v)) for k, v in merged.items() if v is not None]
            items += list(parser.items(section))
            changes[attr] = _section_to(cls, items, section)
    if parser.has_section("scenario"):
        sc = parser["scenario"]
        unknown = set(sc) - {"name", "regime", "out"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in [scenario]")
        if "name" in sc:
            changes["name"] = sc["name"].strip()
        if "regime" in sc:
            changes["regime"] = sc["regime"].strip().lower()
        if "out" in sc:
            changes["out"] = sc["out"].strip() or None
    if parser.has_section("sweep"):
        sw = parser["sweep"]
        unknown = set(sw) - {"variable", "values"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in [sweep]")
        try:
            changes["sweep"] = SweepSpec(sw.get("variable", cfg.sweep.variable).strip(),
                                         parse_values(sw.get("values", "")))
        except ValueError as exc:
            raise ConfigError(f"[sweep]: {exc}") from None
    try:
        return cfg.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text, base)


def default_profile() -> RunConfig:
    """The shipped 802.11ac profile."""
    text = resources.files("fdwlan").joinpath("profiles/table1.ini").read_text()
    return loads(text)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps(cfg: RunConfig) -> str:
    """Serialize the effective configuration; ``loads(dumps(cfg)) == cfg``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["scenario"] = {"name": cfg.name, "regime": cfg.regime, "out": cfg.out or ""}
    for section, (attr, cls) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        parser[section] = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(cls)
                           if getattr(obj, f.name) is not None}
    parser["sweep"] = {"variable": cfg.sweep.variable,
                       "values": ",".join(_fmt(v) for v in cfg.sweep.values)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


__all__ = ["ConfigError", "RunConfig", "SimSettings", "SweepSpec", "load", "loads", "dumps",
           "default_profile", "parse_values"]
