"""Experiment configuration: JSON config files merged with command-line flags.

Config file schema (every key optional except ``command``)::

    {
      "command": "rs-solve" | "linear" | "simulate" | "interpolate" | "verify-ibp" | "concentration",
      "dist": {"kind": "rademacher" | "uniform" | "discrete", "atoms": [[v, w], ...], "nodes": 8},
      "t": 0.1, "h": 0.3, "x": 0.2, "lambda": 0.05, "q": 0.09,
      "q_from": "path/to/rs-solve.json",
      "n": [8, 12, 16],
      "samples": 400, "seed": 20240521, "steps": 20,
      "hermite_order": 61, "lipschitz_xmax": 4.0,
      "antithetic": true, "workers": 1,
      "out": "result.json", "csv": "table.csv"
    }

Flags given on the command line override the file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from skrs.gaussian import DEFAULT_HERMITE_ORDER, DEFAULT_LIPSCHITZ_XMAX
from skrs.spins import SpinDistribution, make_distribution

COMMANDS = ("rs-solve", "linear", "simulate", "interpolate", "verify-ibp", "concentration")
DEFAULT_SEED = 20240521


class ConfigError(ValueError):
    pass


@dataclass
class DistSpec:
    kind: str = "rademacher"
    atoms: list | None = None
    nodes: int | None = None

    def build(self) -> SpinDistribution:
        try:
            return make_distribution(self.kind, self.atoms, self.nodes)
        except ValueError as exc:
            raise ConfigError(f"invalid spin law: {exc}") from exc


@dataclass
class ExperimentConfig:
    command: str
    dist: DistSpec = field(default_factory=DistSpec)
    t: float = 0.0
    h: float = 0.0
    x: float = 0.0
    lam: float | None = None
    q: float | None = None
    q_from: str | None = None
    n: list[int] = field(default_factory=list)
    samples: int = 200
    seed: int = DEFAULT_SEED
    seed_defaulted: bool = False
    steps: int = 20
    hermite_order: int = DEFAULT_HERMITE_ORDER
    lipschitz_xmax: float = DEFAULT_LIPSCHITZ_XMAX
    antithetic: bool = True
    workers: int | None = None
    out: str | None = None
    csv: str | None = None

    def validate(self) -> ExperimentConfig:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("t", "h", "x"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if self.lam is not None and self.lam < 0.0:
            raise ConfigError("lambda must be >= 0")
        if self.q is not None and not 0.0 <= self.q <= 1.0:
            raise ConfigError("q must lie in [0, 1]")
        if any(k < 1 for k in self.n):
            raise ConfigError("every n must be >= 1")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2")
        if self.hermite_order < 1:
            raise ConfigError("hermite_order must be >= 1")
        if self.lipschitz_xmax <= 0.0:
            raise ConfigError("lipschitz_xmax must be > 0")
        if self.command in ("simulate", "verify-ibp", "concentration", "interpolate") and not self.n:
            raise ConfigError(f"{self.command} needs --n")
        if self.command == "concentration" and self.lam is None:
            raise ConfigError("concentration needs --lambda")
        self.dist.build()
        return self

    def echo(self) -> dict:
        """Config as a JSON-ready dict; feeding it back to :func:`from_mapping` reproduces the run."""
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        out.pop("seed_defaulted")
        out.pop("out")
        out.pop("csv")
        return out


def parse_n(value) -> list[int]:
    if value is None:
        return []
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        try:
            return [int(v) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"cannot parse n list {value!r}") from exc
    return [int(v) for v in value]


_FIELDS = {"t", "h", "x", "q", "q_from", "samples", "seed", "steps", "hermite_order",
           "lipschitz_xmax", "antithetic", "workers", "out", "csv"}


def from_mapping(data: dict) -> ExperimentConfig:
    data = dict(data)
    unknown = set(data) - _FIELDS - {"command", "dist", "lambda", "n"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "command" not in data:
        raise ConfigError("config needs a command")
    dist = data.get("dist") or {}
    if isinstance(dist, str):
        dist = {"kind": dist}
    cfg = ExperimentConfig(command=data["command"], dist=DistSpec(**dist))
    seed_given = data.get("seed") is not None
    for key in _FIELDS:
        if data.get(key) is not None:
            setattr(cfg, key, data[key])
    if data.get("lambda") is not None:
        cfg.lam = float(data["lambda"])
    cfg.n = parse_n(data.get("n"))
    cfg.seed_defaulted = not seed_given
    return cfg


def load_file(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def q_from_result(path: str | Path) -> float:
    """Read q_c from an rs-solve result document."""
    doc = load_file(path)
    try:
        return float(doc["report"]["q_c"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path} is not an rs-solve result") from exc
