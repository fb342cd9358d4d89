"""Campus-mini scenario: a desk-scale campus society on the unmodified core.

Four roles (students, faculty, administrators, staff in the 160/20/10/10
mix), ten locations, twelve relation types, five dynamic state attributes
(health, energy, happiness, stress, social_need), and the classic five-step
routine. Exists to demonstrate reuse: it binds the same Communication plugin
class and the same cognitive plugin chain as the mouse scenario, differing
only in data and in its State/Reflect logic.
"""
from __future__ import annotations

from typing import Any

from ..agents import AgentContext
from ..cognition import PlanCandidate, PromptContext
from ..plugins import PerceivePlugin, ReflectPlugin, StatePlugin
from . import ScenarioPackage, ScenarioRuntime, standard_plugins

ROLE_ACTIONS = {
    "student": ("attend_class", "study"),
    "faculty": ("teach", "research"),
    "administrator": ("admin_task",),
    "staff": ("service_shift",),
}


class CampusStatePlugin(StatePlugin):
    """Single State step: drains plus action consequences in one pass."""

    def __init__(self, adapter, constants: dict[str, Any]):
        bounds = {k: tuple(v) for k, v in constants["state_bounds"].items()}
        super().__init__(adapter, bounds)
        self.constants = constants
        self._by_name: dict[str, dict[str, Any]] = {}

    def attach_catalog(self, catalog: list[dict[str, Any]]) -> None:
        self._by_name = {e["name"]: e for e in catalog}

    def execute(self, ctx: AgentContext) -> None:
        state = self.get(ctx.agent)
        if not state:
            return None
        drains = self.constants["drains"]
        self.adjust(state, "energy", -drains["energy_per_tick"])
        self.adjust(state, "social_need", drains["social_need_per_tick"])
        self.adjust(state, "stress", drains["stress_drift_per_tick"])
        if ctx.cache.has("invoked_results"):
            for result in ctx.cache.read("invoked_results")["results"]:
                entry = self._by_name.get(result["name"])
                if entry is None:
                    continue
                params = entry.get("params", {})
                self.adjust(state, "energy", -float(params.get("energy_cost", 0.5)))
                if result["status"] == "ok" and result["detail"] in ("done", "mated"):
                    for fname, amount in params.get("self_effects", {}).items():
                        self.adjust(state, fname, float(amount))
        if state["stress"] > 80:
            self.adjust(state, "health", -drains["overload_health_per_tick"])
        elif state["energy"] > 30:
            self.adjust(state, "health", drains["recovery_per_tick"])
        self.put(ctx.agent, state)
        return None


class CampusReflectPlugin(ReflectPlugin):
    """Daily summaries only; campus agents have no lifecycle events."""


def make_utility_table(constants: dict[str, Any]):
    u = constants["utility"]

    def table(ctx: PromptContext) -> list[PlanCandidate]:
        s = ctx.state
        role = ctx.profile.get("role", "student")
        scores: list[tuple[str, float]] = [
            ("eat_meal()", u["eat"] * (1.0 - s.get("energy", 50) / 100.0) * (1.0 if 10 <= ctx.hour <= 20 else 0.4)),
            ("sleep()", u["sleep"] * (1.0 if ctx.hour >= 22 or ctx.hour < 7 else 0.05)),
            ("rest()", u["rest"] * (1.0 - s.get("energy", 50) / 100.0)),
            ("relax()", u["relax"] * s.get("stress", 0) / 100.0),
            ("exercise()", u["exercise"] * (s.get("health", 100) < 70)),
            ("stroll()", u["stroll"]),
        ]
        for action in ROLE_ACTIONS.get(role, ()):
            scores.append((f"{action}()", u["duty"] * (1.0 if 8 <= ctx.hour <= 18 else 0.1)))
        need = s.get("social_need", 0) / 100.0
        peer = next((e for e in ctx.perception.get("nearby", []) if e["kind"] == "agent"), None)
        if peer is not None and need > 0.2:
            scores.append((f"chat(target={peer['id']})", u["chat"] * need))
        return [PlanCandidate(text, w) for text, w in scores if w > 0]

    return table


def build(package: ScenarioPackage, stores, engine, include_world: bool = True) -> ScenarioRuntime:
    constants = package.constants
    state = CampusStatePlugin(stores.open_adapter("state", "global", "main"), constants)
    state.attach_catalog(package.catalog)
    reflect = CampusReflectPlugin(
        stores.open_adapter("reflect", "global", "main"), every_ticks=package.ticks_per_day
    )
    return standard_plugins(
        package,
        stores,
        engine,
        state,
        reflect,
        lambda profile: PerceivePlugin(radius=int(constants.get("perceive_radius", 3))),
        include_world=include_world,
    )
