"""Planner configuration: gain weights, sensors, robot limits and the mode switch."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from ..matching import MatchConfig
from ..mining import LEGACY, MODIFIED, MiningParams
from ..world import SensorModel

MODES = ("baseline", "pp-ae", "pp-oi")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GainParams:
    mu: float = 0.05
    zeta: float = 0.01
    delta: float = 0.2
    alpha_thr: float = 0.9
    kappa: float = 0.5
    # exploration is complete once no local-graph vertex sees this many unknown voxels
    ve_min: float = 50.0
    rho_thr: float = 0.3
    max_oi_explore_steps: int = 3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{f.name} must be finite and >= 0")
        if self.alpha_thr > 1 or self.delta > 1:
            raise ConfigError("alpha_thr and delta must be <= 1")


@dataclass(frozen=True)
class SensorConfig:
    hfov_deg: float
    vfov_deg: float
    max_range: float
    resolution_deg: float

    def model(self) -> SensorModel:
        return SensorModel(math.radians(self.hfov_deg), math.radians(self.vfov_deg),
                           self.max_range, math.radians(self.resolution_deg))


@dataclass(frozen=True)
class MiningConfig:
    beam_width: int = 3
    iteration_limit: int = 30
    regroup: str = MODIFIED
    node_budget: int = 1000
    leaf_budget: int = 40
    max_levels: int = 2

    def params(self, match: MatchConfig) -> MiningParams:
        if self.regroup not in (MODIFIED, LEGACY):
            raise ConfigError(f"unknown regrouping {self.regroup!r}")
        return MiningParams(self.beam_width, self.iteration_limit, match, self.regroup,
                            self.node_budget, self.leaf_budget)


@dataclass(frozen=True)
class PlannerConfig:
    mode: str = "baseline"
    seed: int = 0
    gains: GainParams = field(default_factory=GainParams)
    match: MatchConfig = field(default_factory=MatchConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    depth: SensorConfig = SensorConfig(360.0, 90.0, 3.0, 1.5)
    camera: SensorConfig = SensorConfig(90.0, 60.0, 3.0, 1.0)
    robot_radius: float = 0.3
    v_max: float = 2.0
    sense_period: float = 0.25
    dwell: float = 0.5
    # local exploration graph
    n_samples: int = 200
    local_box: tuple = (12.0, 12.0, 6.0)
    k_neighbors: int = 10
    si_max_samples: int = 500
    # detection
    h_min: int = 5
    n_thr: int = 3
    sigma_pose: float = 0.0
    # prediction
    phi: float = 1.0
    # safety caps
    max_steps_per_compartment: int = 80
    max_si_explore_steps: int = 4
    manhole_approach: float = 0.6
    compartments: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.v_max <= 0 or self.sense_period <= 0 or self.dwell < 0:
            raise ConfigError("v_max and sense_period must be positive, dwell >= 0")
        if self.n_samples < 1 or self.k_neighbors < 1:
            raise ConfigError("n_samples and k_neighbors must be >= 1")
        if len(self.local_box) != 3 or min(self.local_box) <= 0:
            raise ConfigError("local_box needs three positive extents")

    def with_mode(self, mode: str) -> "PlannerConfig":
        return replace(self, mode=mode)

    def with_seed(self, seed: int) -> "PlannerConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["local_box"] = list(self.local_box)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        try:
            if "gains" in d:
                d["gains"] = GainParams(**d["gains"])
            if "match" in d:
                d["match"] = MatchConfig.from_dict(d["match"])
            if "mining" in d:
                d["mining"] = MiningConfig(**d["mining"])
            for k in ("depth", "camera"):
                if k in d:
                    d[k] = SensorConfig(**d[k])
            if "local_box" in d:
                d["local_box"] = tuple(float(x) for x in d["local_box"])
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "PlannerConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

