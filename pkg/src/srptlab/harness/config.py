"""JSON-backed experiment configuration."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ..dists import ArrivalSpec, ServiceDist, dist_from_dict, poisson_arrivals
from ..srpt_core import InitialConditionSpec, SizeLaw

SCHEMA_VERSION = 1


def _level(v) -> float:
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return math.inf
        return float(v)
    return float(v)


def _level_out(a: float):
    return "inf" if math.isinf(a) else a


@dataclass
class ExperimentConfig:
    service: dict = field(default_factory=lambda: {"kind": "pareto", "m": 1.0, "p": 2.0})
    # shape of the inter-arrival law; its rate is overwritten by the heavy-traffic rate
    arrivals: dict = field(default_factory=lambda: {"inter_arrival": {"kind": "exponential", "rate": 1.0}})
    initial: dict = field(default_factory=lambda: {"kind": "empty"})
    kappa: float = 0.0
    r_list: list = field(default_factory=lambda: [25.0, 50.0, 100.0])
    T: float = 1.0
    N: int = 100
    snapshot_times: list = field(default_factory=lambda: [1.0])
    levels: list = field(default_factory=lambda: [0.5, 1.0, 2.0, math.inf])
    master_seed: int = 0
    out_dir: str = "out"
    limit_draws: int = 10_000
    field_draws: int = 200
    limit_dt: float = 1e-3
    ks_tolerance: float = 0.15

    def __post_init__(self):
        self.r_list = [float(r) for r in self.r_list]
        self.levels = [_level(a) for a in self.levels]
        self.snapshot_times = [float(t) for t in self.snapshot_times]
        if self.r_list != sorted(self.r_list) or len(set(self.r_list)) != len(self.r_list):
            raise ValueError("r_list must be strictly ascending")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if any(t > self.T or t < 0 for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, T]")
        if any(a < 0 for a in self.levels):
            raise ValueError("levels must be nonnegative")
        self.service_dist()
        self.arrival_spec()
        self.initial_spec()

    def service_dist(self) -> ServiceDist:
        return dist_from_dict(self.service)

    def arrival_spec(self) -> ArrivalSpec:
        return ArrivalSpec.from_dict(self.arrivals) if self.arrivals else poisson_arrivals()

    def initial_spec(self) -> InitialConditionSpec:
        d = dict(self.initial)
        law = d.pop("size_law", None)
        if law is not None:
            d["size_law"] = SizeLaw(**law)
        return InitialConditionSpec(**d)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["levels"] = [_level_out(a) for a in self.levels]
        d["schema_version"] = SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
