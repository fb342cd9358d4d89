"""Simulation and PCG configuration documents.

The reproducibility hash echoed into the events.log header covers only
inputs that can change simulation results: seed, scenario content, tick
limit, ticks per day, snapshot cadence, engine, and rules. Deployment-only
parameters (pod count, listen address, output/data directories, store
backing) are excluded: distributing the same run over more pods must produce
the same log, and therefore the same header.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .canon import digest_value


class ConfigError(Exception):
    pass


@dataclass
class SimulationConfig:
    scenario: Path
    master_seed: int
    pods: int = 1
    tick_limit: int = 100
    snapshot_cadence: int = 16
    engine: dict[str, Any] = field(default_factory=lambda: {"kind": "scripted"})
    rules: list[dict[str, Any]] = field(default_factory=list)
    ticks_per_day: int | None = None
    listen: str | None = None
    data_dir: Path | None = None
    out_dir: Path | None = None
    backing: str = "memory"
    transport: str = "inproc"

    def __post_init__(self) -> None:
        if self.pods < 1:
            raise ConfigError("pods must be >= 1")
        if self.tick_limit < 0:
            raise ConfigError("tick_limit must be >= 0")
        if self.snapshot_cadence < 1:
            raise ConfigError("snapshot_cadence must be >= 1")
        if self.engine.get("kind") not in ("scripted", "remote"):
            raise ConfigError(f"unknown engine kind {self.engine.get('kind')!r}")
        if self.backing not in ("memory", "file"):
            raise ConfigError(f"unknown backing {self.backing!r}")
        if self.transport not in ("inproc", "tcp"):
            raise ConfigError(f"unknown transport {self.transport!r}")

    @classmethod
    def load(cls, path: str | Path) -> "SimulationConfig":
        path = Path(path)
        doc = json.loads(path.read_text())
        return cls.from_doc(doc, base=path.parent)

    @classmethod
    def from_doc(cls, doc: dict[str, Any], base: Path | None = None) -> "SimulationConfig":
        base = base or Path.cwd()
        rules = doc.get("rules", [])
        if isinstance(rules, str):
            rules = json.loads((base / rules).read_text())
        return cls(
            scenario=(base / doc["scenario"]).resolve(),
            master_seed=int(doc["master_seed"]),
            pods=int(doc.get("pods", 1)),
            tick_limit=int(doc.get("tick_limit", 100)),
            snapshot_cadence=int(doc.get("snapshot_cadence", 16)),
            engine=dict(doc.get("engine", {"kind": "scripted"})),
            rules=list(rules),
            ticks_per_day=doc.get("ticks_per_day"),
            listen=doc.get("listen"),
            data_dir=(base / doc["data_dir"]).resolve() if doc.get("data_dir") else None,
            out_dir=(base / doc["out_dir"]).resolve() if doc.get("out_dir") else None,
            backing=doc.get("backing", "memory"),
            transport=doc.get("transport", "inproc"),
        )

    def reproducibility_doc(self, scenario_hash: str) -> dict[str, Any]:
        return {
            "scenario_hash": scenario_hash,
            "master_seed": self.master_seed,
            "tick_limit": self.tick_limit,
            "snapshot_cadence": self.snapshot_cadence,
            "engine": self.engine,
            "rules": self.rules,
            "ticks_per_day": self.ticks_per_day,
        }

    def config_hash(self, scenario_hash: str) -> str:
        return digest_value(self.reproducibility_doc(scenario_hash))


@dataclass
class PcgConfig:
    population: int
    profile_fields: dict[str, dict[str, Any]]
    state_fields: dict[str, dict[str, Any]] = field(default_factory=dict)
    relations: dict[str, Any] = field(default_factory=dict)
    spawn_region: str | None = None

    def __post_init__(self) -> None:
        if self.population < 0:
            raise ConfigError("population must be >= 0")
        for fname, spec in self.profile_fields.items():
            if spec.get("kind") == "stratified":
                total = sum(spec["mix"].values())
                if abs(total - 1.0) > 1e-9:
                    raise ConfigError(f"{fname}: categorical mix must sum to 1, got {total}")
        degree = self.relations.get("mean_degree", 0)
        if degree < 0:
            raise ConfigError("mean_degree must be >= 0")
        if self.population > 1 and degree > self.population - 1:
            raise ConfigError(
                f"mean degree {degree} is infeasible for population {self.population}: "
                f"each agent can have at most {self.population - 1} neighbors"
            )

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "PcgConfig":
        return cls(
            population=int(doc["population"]),
            profile_fields=dict(doc.get("profile_fields", {})),
            state_fields=dict(doc.get("state_fields", {})),
            relations=dict(doc.get("relations", {})),
            spawn_region=doc.get("spawn_region"),
        )
