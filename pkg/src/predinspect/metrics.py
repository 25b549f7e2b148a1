"""Mission metrics: simulated time per compartment, coverage, path length and the mode timeline."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field


class SchemaError(ValueError):
    pass


@dataclass
class CompartmentRecord:
    index: int
    modes: list = field(default_factory=list)
    time: float = 0.0
    path_length: float = 0.0
    paths: int = 0
    exploration_steps: int = 0
    coverage: float = 0.0
    mode_time: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        mode_time = {k: round(v, 9) for k, v in sorted(self.mode_time.items())}
        return {"index": self.index, "mode_time": mode_time, "modes": list(self.modes), "time": round(self.time, 9),
                "path_length": round(self.path_length, 9), "paths": self.paths,
                "exploration_steps": self.exploration_steps, "coverage": round(self.coverage, 9)}


@dataclass
class MissionMetrics:
    mode: str
    seed: int
    compartments: list = field(default_factory=list)
    coverage: float = 0.0
    path_length: float = 0.0
    transit_time: float = 0.0
    status: str = "done"
    timeline: list = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return sum(c.time for c in self.compartments) + self.transit_time

    def time_per_compartment(self, indices=None) -> float:
        cs = [c for c in self.compartments if indices is None or c.index in indices]
        return sum(c.time for c in cs) / len(cs) if cs else 0.0

    def as_dict(self) -> dict:
        return {"mode": self.mode, "seed": self.seed, "status": self.status,
                "coverage": round(self.coverage, 9), "path_length": round(self.path_length, 9),
                "transit_time": round(self.transit_time, 9), "total_time": round(self.total_time, 9),
                "compartments": [c.as_dict() for c in self.compartments],
                "timeline": [dict(t) for t in self.timeline]}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["compartment", "modes", "time_s", "path_length_m", "coverage_pct", "paths",
                    "exploration_steps"])
        for c in self.compartments:
            w.writerow([c.index, "+".join(c.modes), f"{c.time:.6f}", f"{c.path_length:.6f}",
                        f"{c.coverage:.6f}", c.paths, c.exploration_steps])
        return buf.getvalue()


def validate_metrics(d: dict) -> dict:
    """Light schema check of a metrics dictionary; raises SchemaError."""
    need = {"mode": str, "seed": int, "status": str, "coverage": (int, float),
            "path_length": (int, float), "compartments": list, "timeline": list}
    for k, t in need.items():
        if k not in d:
            raise SchemaError(f"metrics missing {k!r}")
        if not isinstance(d[k], t):
            raise SchemaError(f"metrics field {k!r} has type {type(d[k]).__name__}")
    if not 0 <= d["coverage"] <= 100:
        raise SchemaError("coverage out of [0, 100]")
    for i, c in enumerate(d["compartments"]):
        for k in ("index", "modes", "time", "path_length", "coverage"):
            if k not in c:
                raise SchemaError(f"compartments[{i}] missing {k!r}")
        if c["time"] < 0 or c["path_length"] < 0:
            raise SchemaError(f"compartments[{i}] has negative time or length")
        if not 0 <= c["coverage"] <= 100:
            raise SchemaError(f"compartments[{i}].coverage out of range")
    return d


__all__ = ["MissionMetrics", "CompartmentRecord", "validate_metrics", "SchemaError"]
