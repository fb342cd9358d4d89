"""Scenario packages: plugins plus config, loaded from a scenario directory.

A scenario directory holds five documents::

    scenario/<name>/
      manifest.json    plugin bindings, routine, roles, relation types
      catalog.json     behavior catalog (data executed by core action plugins)
      constants.json   every behavioral constant, with defaults
      map.json         author-supplied static objects and regions
      pcg.json         procedural generation config for initial data

The manifest names a builder (``module:function``) that wires scenario plugin
instances to injected adapters. Core modules are never modified per scenario;
both shipped scenarios bind the same Communication plugin class.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..actions import ActionPlugin, CatalogActionsPlugin, CommunicationPlugin, ToolsPlugin
from ..agents import AgentPlugin
from ..canon import sha256_hex
from ..cognition import RemoteEngine, ScriptedEngine
from ..environment import EnvironmentPlugin, RelationPlugin, SpacePlugin
from ..persistence import StoreRegistry
from ..plugins import InvokePlugin, PlanPlugin, ProfilePlugin, ReflectPlugin, StatePlugin

_FILES = ("manifest.json", "catalog.json", "constants.json", "map.json", "pcg.json")


class ScenarioError(Exception):
    pass


@dataclass
class ScenarioPackage:
    name: str
    root: Path
    manifest: dict[str, Any]
    catalog: list[dict[str, Any]]
    constants: dict[str, Any]
    map_doc: dict[str, Any]
    pcg: dict[str, Any]

    @property
    def ticks_per_day(self) -> int:
        return int(self.manifest["ticks_per_day"])

    @property
    def routine(self) -> tuple[str, ...]:
        return tuple(self.manifest["routine"])

    @property
    def roles(self) -> set[str]:
        return set(self.manifest.get("roles", []))

    @property
    def relation_types(self) -> list[str]:
        return list(self.manifest.get("relation_types", []))

    def scenario_hash(self) -> str:
        parts = []
        for fname in _FILES:
            parts.append(fname + "\n" + (self.root / fname).read_text())
        return sha256_hex("\n".join(parts))

    def validate(self) -> None:
        shape = self.manifest.get("catalog_shape")
        if shape:
            for owner, expected in shape.items():
                got = sum(1 for e in self.catalog if e["owner"] == owner)
                if got != expected:
                    raise ScenarioError(
                        f"{self.name}: catalog must hold {expected} {owner} behaviors, found {got}"
                    )
        names = [e["name"] for e in self.catalog]
        if len(names) != len(set(names)):
            raise ScenarioError(f"{self.name}: duplicate behavior names in catalog")


def load_scenario(path: str | Path) -> ScenarioPackage:
    root = Path(path)
    if not (root / "manifest.json").exists():
        raise ScenarioError(f"no scenario manifest under {root}")
    docs = {fname: json.loads((root / fname).read_text()) for fname in _FILES}
    package = ScenarioPackage(
        name=docs["manifest.json"]["name"],
        root=root,
        manifest=docs["manifest.json"],
        catalog=docs["catalog.json"],
        constants=docs["constants.json"],
        map_doc=docs["map.json"],
        pcg=docs["pcg.json"],
    )
    package.validate()
    return package


def resolve(path: str) -> Any:
    module_name, _, attr = path.partition(":")
    module = __import__(module_name, fromlist=[attr])
    return getattr(module, attr)


def classify_behavior(action_name: str, catalog: list[dict[str, Any]]) -> str:
    """Catalog category of an action; idle is reserved, unknowns are flagged."""
    if action_name == "idle":
        return "idle"
    for entry in catalog:
        if entry["name"] == action_name:
            return entry.get("category", "uncategorized")
    return "uncategorized"


@dataclass
class ScenarioRuntime:
    """Everything a booted simulation needs from a scenario."""

    package: ScenarioPackage
    plugin_registry: dict[str, AgentPlugin]
    bindings: dict[str, str]
    env_plugins: list[EnvironmentPlugin]
    action_plugins: list[ActionPlugin]
    profile_plugin: ProfilePlugin
    state_plugin: StatePlugin
    communication: CommunicationPlugin | None
    engine: Any


def make_engine(package: ScenarioPackage, engine_cfg: dict[str, Any]) -> Any:
    kind = engine_cfg.get("kind", "scripted")
    if kind == "scripted":
        table_factory = resolve(package.manifest["utility_table"])
        return ScriptedEngine(table_factory(package.constants))
    if kind == "remote":
        return RemoteEngine(
            endpoint=engine_cfg["endpoint"],
            model=engine_cfg.get("model", "default"),
            timeout=float(engine_cfg.get("timeout", 30.0)),
        )
    raise ScenarioError(f"unknown engine kind {kind!r}")


def build_runtime(
    package: ScenarioPackage,
    stores: StoreRegistry,
    engine_cfg: dict[str, Any],
    include_world: bool = True,
) -> ScenarioRuntime:
    builder = resolve(package.manifest["builder"])
    return builder(package, stores, make_engine(package, engine_cfg), include_world)


def standard_plugins(
    package: ScenarioPackage,
    stores: StoreRegistry,
    engine: Any,
    state_plugin: StatePlugin,
    reflect_plugin: ReflectPlugin,
    perceive_factory: Any,
    include_world: bool = True,
) -> ScenarioRuntime:
    """Common wiring shared by scenario builders: env, actions, cognition chain.

    Remote pod workers host only the cognitive chain (include_world=False);
    environment and action plugins live on the coordinator alone.
    """
    env_plugins: list[EnvironmentPlugin] = []
    action_plugins: list[ActionPlugin] = []
    communication = None
    if include_world:
        space = SpacePlugin(stores.open_adapter("space", "global", "main"), package.map_doc)
        relation = RelationPlugin(
            stores.open_adapter("relation", "global", "main"), package.relation_types
        )
        communication = CommunicationPlugin(
            stores.open_adapter("communication", "global", "conversations"), package.catalog
        )
        other = CatalogActionsPlugin(
            stores.open_adapter("other-actions", "global", "main"), package.catalog
        )
        env_plugins = [space, relation]
        action_plugins = [communication, other, ToolsPlugin()]
    profile = ProfilePlugin(stores.open_adapter("profile", "global", "main"))
    plan = PlanPlugin(engine, state_plugin, reflect_plugin)
    registry: dict[str, AgentPlugin] = {
        "profile": profile,
        "state": state_plugin,
        "perceive": perceive_factory(profile),
        "plan": plan,
        "invoke": InvokePlugin(),
        "reflect": reflect_plugin,
    }
    bindings = {
        "Profile": "profile",
        "State": "state",
        "Perceive": "perceive",
        "Plan": "plan",
        "Invoke": "invoke",
        "Reflect": "reflect",
    }
    return ScenarioRuntime(
        package=package,
        plugin_registry=registry,
        bindings=bindings,
        env_plugins=env_plugins,
        action_plugins=action_plugins,
        profile_plugin=profile,
        state_plugin=state_plugin,
        communication=communication,
        engine=engine,
    )
