"""Flat ``key = value`` experiment configuration.

One experiment per file. Blank lines and ``#`` comments are ignored. Keys
left out take process-specific defaults; the fully resolved configuration
is written next to every result.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

ISING_FLAVORS = ("LIN", "FQA", "FQ2", "UQA", "UQ2")
OSCILLATOR_FLAVORS = ("LIN", "FQA", "FQ2", "IIE")

# Default endpoints for each process are our own choice.
PROCESS_DEFAULTS = {
    "paramagnetic": {"gamma_i": 3.0, "gamma_f": 1.2, "tau": 3.0, "protocol": ("LIN", "FQA", "FQ2")},
    "crossing": {"gamma_i": 2.0, "gamma_f": 0.2, "tau": 50.0, "protocol": ("LIN", "UQA", "UQ2")},
    "expansion": {"omega_i": 1.0, "omega_f": 2.0, "tau": 3.0, "protocol": ("LIN", "FQA", "FQ2", "IIE")},
}
SYSTEM_PROCESSES = {"ising": ("paramagnetic", "crossing"), "oscillator": ("expansion",)}
ISING_ONLY = {"N", "J", "gamma_i", "gamma_f"}
OSCILLATOR_ONLY = {"m", "omega_i", "omega_f", "beta_i"}


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "ising"
    process: str = "paramagnetic"
    N: int = 100
    J: float = 1.0
    gamma_i: float | None = None
    gamma_f: float | None = None
    m: float = 1.0
    omega_i: float | None = None
    omega_f: float | None = None
    beta_i: float = 1.0
    tau: float | None = None
    tau_min: float = 1.0
    tau_max: float = 20.0
    tau_count: int = 20
    protocol: tuple = ()
    direction: str = "forward"
    steps: int | None = None
    out_dir: str = "results"
    scan_points: int = 201
    output_points: int = 501

    def resolved(self) -> "ExperimentConfig":
        """Fill process defaults and validate."""
        if self.system not in SYSTEM_PROCESSES:
            raise ConfigError(f"system must be one of {sorted(SYSTEM_PROCESSES)}, got {self.system!r}")
        if self.process not in SYSTEM_PROCESSES[self.system]:
            raise ConfigError(f"process {self.process!r} is not available for system {self.system!r}")
        updates = {}
        for key, value in PROCESS_DEFAULTS[self.process].items():
            if getattr(self, key) in (None, ()):
                updates[key] = value
        cfg = replace(self, **updates)
        cfg._validate()
        return cfg

    def _validate(self):
        def positive(name):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")

        for name in ("tau", "tau_min", "tau_max"):
            positive(name)
        if self.tau_max <= self.tau_min:
            raise ConfigError("tau_max must exceed tau_min")
        if self.tau_count < 2:
            raise ConfigError("tau_count must be at least 2")
        if self.scan_points < 2 or self.output_points < 2:
            raise ConfigError("scan_points and output_points must be at least 2")
        if self.steps is not None and self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        if self.direction not in ("forward", "backward"):
            raise ConfigError("direction must be forward or backward")
        allowed = ISING_FLAVORS if self.system == "ising" else OSCILLATOR_FLAVORS
        bad = [p for p in self.protocol if p not in allowed]
        if bad or not self.protocol:
            raise ConfigError(f"protocols {bad} not in {allowed}")
        if len(set(self.protocol)) != len(self.protocol):
            raise ConfigError("protocol list has duplicates")
        if self.system == "ising":
            if self.N < 2 or self.N % 2:
                raise ConfigError(f"N must be even and >= 2, got {self.N}")
            positive("J")
            for name in ("gamma_i", "gamma_f"):
                if not math.isfinite(getattr(self, name)):
                    raise ConfigError(f"{name} must be finite")
            if self.gamma_i == self.gamma_f:
                raise ConfigError("gamma_i and gamma_f coincide")
        else:
            for name in ("m", "omega_i", "omega_f"):
                positive(name)
            if not self.beta_i > 0:
                raise ConfigError("beta_i must be positive or inf")
            if self.omega_i == self.omega_f:
                raise ConfigError("omega_i and omega_f coincide")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if self.system == "ising" and f.name in OSCILLATOR_ONLY:
                continue
            if self.system == "oscillator" and f.name in ISING_ONLY:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(value)
            elif isinstance(value, float):
                value = repr(value)
            elif value is None:
                value = "auto"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Hash of the physics and numerics; the output location is excluded."""
        text = "".join(line + "\n" for line in self.to_text().splitlines() if not line.startswith("out_dir "))
        return hashlib.sha256(text.encode()).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if key == "protocol":
            return tuple(p.strip().upper() for p in raw.split(",") if p.strip())
        if raw.lower() == "auto" and "None" in kind:
            return None
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw.lower() if key in ("system", "process", "direction") else raw


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    system = values.get("system", "ising")
    foreign = ISING_ONLY if system == "oscillator" else OSCILLATOR_ONLY
    stray = sorted(foreign & values.keys())
    if stray:
        hint = " (the chain is simulated from its ground state only)" if "beta_i" in stray else ""
        raise ConfigError(f"keys {stray} do not apply to system {system!r}{hint}")
    return ExperimentConfig(**values).resolved()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
