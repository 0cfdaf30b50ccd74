"""Experiment configuration: an INI file with sections, defaults embedded.

All numeric fields are checked against their admissible ranges on load and
every failure names the offending ``section.key``.  ``dumps``/``loads``
round-trip losslessly (floats are written in their shortest exact form).
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ledger import WINDOW_PRESETS
from .profiles import GlobalConstants


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, tuple)):
        return ", ".join(_fmt(v) for v in x)
    return str(x)


@dataclass
class ExperimentConfig:
    # [profiles]
    V: float = 2.0
    delta: float = 0.005
    pole_fraction: float = 0.0
    flat_fraction: float = 0.5
    # [run]
    r_values: list = field(default_factory=lambda: [100.0, 200.0, 400.0])
    grid_N: int = 4000
    window_preset: str = "existence"
    margin: float = 10.0
    output_dir: str = "out"
    parallelism: int = 1
    # [eta]
    eta_r_values: list = field(default_factory=lambda: [100.0, 200.0, 400.0, 800.0])
    eta_N: int = 2000
    # [flow]
    flow_R_values: list = field(default_factory=lambda: [100.0, 200.0, 400.0])
    flow_N: int = 1000
    flow_r_min: float = 20.0
    # [perturb]
    perturb_order: int = 6
    perturb_modes: int = 20
    perturb_h: float = 2e-4

    SECTIONS = {
        "profiles": ("V", "delta", "pole_fraction", "flat_fraction"),
        "run": ("r_values", "grid_N", "window_preset", "margin", "output_dir", "parallelism"),
        "eta": ("eta_r_values", "eta_N"),
        "flow": ("flow_R_values", "flow_N", "flow_r_min"),
        "perturb": ("perturb_order", "perturb_modes", "perturb_h"),
    }

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------
    def validate(self) -> None:
        problems = []

        def need(ok, key, msg):
            if not ok:
                problems.append(f"{self._section_of(key)}.{key}: {msg}")

        need(self.V > 0, "V", f"must be positive (got {self.V})")
        need(0 < self.delta <= 0.01, "delta", f"must lie in (0, 1/100] (got {self.delta})")
        need(0 <= self.pole_fraction < 1, "pole_fraction", "must lie in [0, 1)")
        need(0 <= self.flat_fraction < 1, "flat_fraction", "must lie in [0, 1)")
        need(len(self.r_values) > 0 and all(r >= 20 for r in self.r_values), "r_values",
             f"needs at least one value, all >= 20 (got {self.r_values})")
        need(self.grid_N >= 200, "grid_N", f"must be >= 200 (got {self.grid_N})")
        need(self.window_preset in WINDOW_PRESETS, "window_preset",
             f"must be one of {WINDOW_PRESETS} (got {self.window_preset!r})")
        need(self.margin > 0, "margin", "must be positive")
        need(bool(self.output_dir), "output_dir", "must be non-empty")
        need(self.parallelism >= 1, "parallelism", "must be >= 1")
        need(len(self.eta_r_values) > 0 and all(r >= 20 for r in self.eta_r_values), "eta_r_values",
             "needs at least one value, all >= 20")
        need(self.eta_N >= 200, "eta_N", "must be >= 200")
        need(all(R > self.flow_r_min for R in self.flow_R_values), "flow_R_values",
             "every R must exceed flow_r_min")
        need(self.flow_N >= 200, "flow_N", "must be >= 200")
        need(self.flow_r_min >= 20, "flow_r_min", "must be >= 20")
        need(1 <= self.perturb_order <= 6, "perturb_order", "must lie in [1, 6]")
        need(self.perturb_modes >= 1, "perturb_modes", "must be >= 1")
        need(0 < self.perturb_h <= 1e-2, "perturb_h", "must lie in (0, 1e-2]")
        if not problems:
            try:
                self.constants(self.r_values[0])
            except ConfigError as exc:
                problems.append(f"profiles: {exc}")
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))

    @classmethod
    def _section_of(cls, key: str) -> str:
        for sec, keys in cls.SECTIONS.items():
            if key in keys:
                return sec
        return "?"

    def constants(self, r: float) -> GlobalConstants:
        return GlobalConstants(V=self.V, delta=self.delta, r=float(r),
                               pole_fraction=self.pole_fraction, flat_fraction=self.flat_fraction)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------------
    def dumps(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for sec, keys in self.SECTIONS.items():
            cp[sec] = {k: _fmt(getattr(self, k)) for k in keys}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {source}: {exc}") from exc
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for sec in cp.sections():
            if sec not in cls.SECTIONS:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            for key, raw in cp[sec].items():
                if key not in cls.SECTIONS[sec]:
                    raise ConfigError(f"{source}: unknown key {sec}.{key}")
                values[key] = _parse(sec, key, raw, types[key])
        return cls(**values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        return cls.loads(text, source=str(p))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def _parse(sec: str, key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ in ("float", float):
            return float(raw)
        if typ in ("int", int):
            return int(raw)
        if typ in ("list", list):
            return [float(v) for v in raw.replace(",", " ").split()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"{sec}.{key}: cannot parse {raw!r} ({exc})") from exc


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    return ExperimentConfig() if path is None else ExperimentConfig.load(path)
