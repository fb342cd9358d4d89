"""Shared fixtures: a minimal hand-wired kernel world for unit tests."""
from __future__ import annotations

from typing import Any

import pytest

from socsim.actions import ActionFacade, CatalogActionsPlugin, CommunicationPlugin, ToolsPlugin
from socsim.agents import AgentManager, AgentSpec
from socsim.controller import Controller, RuleSet, RuntimeHooks
from socsim.environment import Environment, RelationPlugin, SpacePlugin
from socsim.persistence import StoreRegistry
from socsim.plugins import (
    InvokePlugin,
    PerceivePlugin,
    PlanPlugin,
    ProfilePlugin,
    ReflectPlugin,
    StatePlugin,
)
from socsim.rng import RngStream
from socsim.services import System

DEFAULT_MAP = {
    "width": 8,
    "height": 8,
    "cell_capacity": None,
    "regions": {"west": [0, 0, 3, 7], "east": [4, 0, 7, 7]},
    "static_objects": [
        {"name": "hopper", "cell": [1, 1], "attributes": {"kind": "food_hopper"}},
        {"name": "bottle", "cell": [6, 6], "attributes": {"kind": "water"}},
    ],
}


class World:
    """Single-pod wiring used by unit tests; mirrors the Simulation boot order."""

    def __init__(
        self,
        tmp_path,
        map_doc: dict[str, Any] | None = None,
        catalog: list[dict[str, Any]] | None = None,
        relation_types: list[str] | None = None,
        engine=None,
        seed: int = 11,
        ticks_per_day: int = 24,
    ):
        self.stores = StoreRegistry(tmp_path)
        self.system = System.bootstrap(ticks_per_day, tmp_path / "events.log")
        self.environment = Environment()
        self.space = SpacePlugin(
            self.stores.open_adapter("space", "global", "main"), map_doc or DEFAULT_MAP
        )
        self.relation = RelationPlugin(
            self.stores.open_adapter("relation", "global", "main"),
            relation_types or ["friend", "kin", "mating", "affiliative", "dominance"],
        )
        self.environment.register(self.space)
        self.environment.register(self.relation)

        self.actions = ActionFacade()
        self.communication = CommunicationPlugin(
            self.stores.open_adapter("communication", "global", "conversations"), catalog or []
        )
        self.other = CatalogActionsPlugin(
            self.stores.open_adapter("other-actions", "global", "main"), catalog or []
        )
        self.tools = ToolsPlugin()
        for plugin in (self.communication, self.other, self.tools):
            self.actions.register_plugin(plugin)

        self.profile_plugin = ProfilePlugin(self.stores.open_adapter("profile", "global", "main"))
        self.state_plugin = StatePlugin(
            self.stores.open_adapter("state", "global", "main"),
            bounds={"hunger": (0, 100), "energy": (0, 100), "valence": (0, 1)},
        )
        self.reflect_plugin = ReflectPlugin(
            self.stores.open_adapter("reflect", "global", "main"), every_ticks=0
        )
        self.perceive_plugin = PerceivePlugin(radius=3)
        self.invoke_plugin = InvokePlugin()
        self.engine = engine
        self.plan_plugin = PlanPlugin(engine, self.state_plugin, self.reflect_plugin) if engine else None

        self.rules = RuleSet()
        self.hooks = RuntimeHooks(
            profile_of=self.profile_plugin.load,
            state_of=self.state_plugin.get,
            apply_state_delta=self.state_plugin.apply,
            active_agents=lambda: self.manager.active_ids() if self.manager else [],
            remove_agent=lambda aid, cause: self.manager.remove_agent(aid, cause),
            spawn_agents=lambda specs: [],
            rng_of=self.rng_of,
            restore_snapshot=lambda sid: 0,
            declared_roles=lambda: {"student", "faculty", "mouse"},
            declared_regions=lambda: set(self.space.regions),
        )
        self.controller = Controller(
            "p00000000", self.system, self.environment, self.actions, self.rules, self.hooks
        )
        self.system.timer.register_pod("p00000000")

        self.plugin_registry = {
            "profile": self.profile_plugin,
            "state": self.state_plugin,
            "perceive": self.perceive_plugin,
            "invoke": self.invoke_plugin,
            "reflect": self.reflect_plugin,
        }
        if self.plan_plugin:
            self.plugin_registry["plan"] = self.plan_plugin
        self.manager = AgentManager("p00000000", self.controller, self.plugin_registry, seed)
        self._streams: dict[str, RngStream] = {}

    def rng_of(self, aid: str) -> RngStream:
        if self.manager and self.manager.has_agent(aid):
            return self.manager.rng_of(aid)
        if aid not in self._streams:
            self._streams[aid] = RngStream.derive(11, aid)
        return self._streams[aid]

    def default_bindings(self) -> dict[str, str]:
        bindings = {
            "Profile": "profile",
            "State": "state",
            "Perceive": "perceive",
            "Invoke": "invoke",
            "Reflect": "reflect",
        }
        if self.plan_plugin:
            bindings["Plan"] = "plan"
        return bindings

    def add_agent(self, n: int, cell=(2, 2), profile=None, state=None, routine=None) -> str:
        from socsim.kernel import agent_id

        bindings = self.default_bindings()
        routine = tuple(routine or (["Perceive", "Plan", "Invoke", "State", "Reflect"] if self.plan_plugin else ["Perceive", "State", "Reflect"]))
        spec = AgentSpec(
            id=agent_id(n),
            profile=profile or {"gender": "F", "birth_tick": 0},
            initial_state=state or {"hunger": 20.0, "energy": 80.0, "valence": 0.5},
            routine=routine,
            bindings=bindings,
            meta={"cell": list(cell)},
        )
        self.manager.register_agent(spec)
        return spec.id

    def commit(self, tick: int = 0):
        self.manager.commit_removals(tick)
        self.manager.commit_activations(tick)

    def flush(self):
        return self.system.recorder.flush_barrier()


@pytest.fixture
def world(tmp_path):
    return World(tmp_path)
