"""Experiment configuration: one flat record mirroring the command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ParameterError
from ..reflect import ModelParams

KINDS = ("consistency", "normality", "sequential", "girsanov", "queue-demo")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "sequential"
    hurst: float = 0.7
    alpha: float = 1.0
    sigma: float = 1.0
    barrier: float = 0.0
    x0: float = 0.0
    horizon: float = 10.0
    steps: int = 100
    dt: float = 0.1  # step size for sequential runs and the MLE ladder
    reps: int = 100
    h_level: float = 50.0
    max_horizon: float = 800.0
    horizons: tuple = (25.0, 50.0, 100.0)
    queue_sizes: tuple = (10, 100, 1000)
    refine_paths: int = 200
    seed: int = 0
    workers: int = 1
    out: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ParameterError("reps must be a positive integer")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ParameterError("steps must be an integer >= 2")
        if not (self.horizon > 0 and self.dt > 0):
            raise ParameterError("horizon and dt must be positive")
        if self.kind == "sequential" and not (self.h_level > 0 and self.max_horizon > 0):
            raise ParameterError("sequential runs need h_level > 0 and max_horizon > 0")
        if self.format not in ("csv", "json"):
            raise ParameterError("format must be csv or json")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        object.__setattr__(self, "horizons", tuple(float(t) for t in self.horizons))
        object.__setattr__(self, "queue_sizes", tuple(int(n) for n in self.queue_sizes))
        if not self.horizons or min(self.horizons) <= 0:
            raise ParameterError("horizons must be positive")
        self.model  # validates the model fields

    @property
    def model(self) -> ModelParams:
        return ModelParams(self.alpha, self.sigma, self.barrier, self.x0, self.hurst)

    def echo(self) -> dict:
        d = asdict(self)
        d["horizons"] = list(self.horizons)
        d["queue_sizes"] = list(self.queue_sizes)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        d = asdict(self)
        d.update(changes)
        return ExperimentConfig(**d)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        keys = {k.replace("-", "_") for k in data}
        unknown = keys - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k.replace("-", "_"): v for k, v in data.items()})


def load_config_file(path: str | Path) -> dict:
    """Key/value JSON object; keys use the flag names (dashes or underscores)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}
