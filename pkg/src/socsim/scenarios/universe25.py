"""Universe 25 (mouse utopia) scenario: lifecycle, estrous cycle, 20 behaviors.

Mice carry an immutable profile (gender, birth tick, generation, parents) and
a bounded mutable state across physio-social, psychological, and lifecycle
facets. The six-step routine runs State twice: the post-perceive pass applies
stimulus responses (crowding stress, passive drains, stage transitions) and
the post-invoke pass resolves action consequences (costs and gains).

Reproduction is two-phase: a successful mate action marks the mother pregnant
with a configured gestation delay; her Reflect step spawns the litter when it
falls due, so pups activate at the tick barrier like any other registration.
Reflect also enforces survival checks: starvation at zero health, natural
mortality once the 20-day threshold is crossed.

All constants live in the scenario's constants document; the headline
thresholds are days 1 / 4 / 15 / 20 and a 2.5-day estrous period.
"""
from __future__ import annotations

from typing import Any

from ..actions import ActionContext, ActionResult, CommunicationPlugin
from ..agents import AgentContext, AgentSpec
from ..cognition import PlanCandidate, PromptContext
from ..plugins import PerceivePlugin, ReflectPlugin, StatePlugin
from . import ScenarioPackage, ScenarioRuntime, standard_plugins

STAGES = ("pup", "juvenile", "adult", "senescent", "death-eligible")

DEFAULT_LIFECYCLE = {
    "independence_days": 1.0,
    "adult_days": 4.0,
    "senescent_days": 15.0,
    "mortality_days": 20.0,
}


def age_days(profile: dict[str, Any], tick: int, ticks_per_day: int) -> float:
    born = int(profile.get("birth_tick", 0))
    return float(profile.get("init_age_days", 0.0)) + (tick - born) / ticks_per_day


def lifecycle_stage(age: float, lifecycle: dict[str, float] | None = None) -> str:
    lc = lifecycle or DEFAULT_LIFECYCLE
    if age < lc["independence_days"]:
        return "pup"
    if age < lc["adult_days"]:
        return "juvenile"
    if age < lc["senescent_days"]:
        return "adult"
    if age < lc["mortality_days"]:
        return "senescent"
    return "death-eligible"


def estrous_receptive(
    gender: str,
    age: float,
    estrous: dict[str, float] | None = None,
    lifecycle: dict[str, float] | None = None,
) -> bool:
    """Receptive during the first window of each cycle, anchored at adulthood."""
    lc = lifecycle or DEFAULT_LIFECYCLE
    if gender != "F" or lifecycle_stage(age, lc) != "adult":
        return False
    cfg = estrous or {"period_days": 2.5, "window_days": 0.5}
    phase = (age - lc["adult_days"]) % cfg["period_days"]
    return phase < cfg["window_days"]


def receptive_window_count(days: float, period_days: float = 2.5) -> int:
    """Closed form: windows beginning within a span of ``days`` from adulthood."""
    import math

    return math.ceil(days / period_days) if days > 0 else 0


def crowding_stress_delta(neighbor_count: int, crowding: dict[str, float]) -> float:
    return max(0.0, crowding["rate"] * (neighbor_count - crowding["comfort_threshold"]))


class MousePerceivePlugin(PerceivePlugin):
    """Adds scent cues: nearby mice carry gender, stage, and receptivity."""

    def __init__(self, profile_plugin, state_plugin: StatePlugin, constants: dict[str, Any]):
        super().__init__(radius=int(constants.get("perceive_radius", 3)))
        self._profile = profile_plugin
        self._state = state_plugin
        self._constants = constants

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        perception = super().execute(ctx)
        tpd = self._constants["ticks_per_day"]
        for entity in perception["nearby"]:
            if entity["kind"] != "agent":
                continue
            profile = self._profile.load(entity["id"]) or {}
            state = self._state.get(entity["id"])
            age = age_days(profile, ctx.tick, tpd)
            entity["gender"] = profile.get("gender", "?")
            entity["stage"] = lifecycle_stage(age, self._constants["lifecycle"])
            entity["receptive"] = bool(state.get("receptive", False))
        return perception


class MouseStatePlugin(StatePlugin):
    """Two-phase state dynamics for the six-step routine."""

    def __init__(self, adapter, constants: dict[str, Any]):
        bounds = {k: tuple(v) for k, v in constants["state_bounds"].items()}
        super().__init__(adapter, bounds)
        self.constants = constants
        self._by_name = {}

    def attach_catalog(self, catalog: list[dict[str, Any]]) -> None:
        self._by_name = {e["name"]: e for e in catalog}

    def execute(self, ctx: AgentContext) -> None:
        state = self.get(ctx.agent)
        if not state:
            return None
        if ctx.cache.has("invoked_results"):
            self._consequences(ctx, state)
        else:
            self._stimulus(ctx, state)
        self.put(ctx.agent, state)
        return None

    # -- post-perceive: stimulus responses and passive dynamics ------------------

    def _stimulus(self, ctx: AgentContext, state: dict[str, Any]) -> None:
        c = self.constants
        tpd = c["ticks_per_day"]
        age = age_days(ctx.profile, ctx.tick, tpd)
        stage = lifecycle_stage(age, c["lifecycle"])
        self._transition_stage(ctx, state, stage)

        drains = c["drains"]
        nursing = stage == "pup"
        factor = drains["pup_nursing_factor"] if nursing else 1.0
        self.adjust(state, "hunger", drains["hunger_per_tick"] * factor)
        self.adjust(state, "thirst", drains["thirst_per_tick"] * factor)

        crowd = c["crowding"]
        nearby = ctx.cache.read("perception")["nearby"]
        neighbor_count = sum(
            1 for e in nearby if e["kind"] == "agent" and e["distance"] <= crowd["radius"]
        )
        delta = crowding_stress_delta(neighbor_count, crowd)
        self.adjust(state, "acute_stress", delta - crowd["relax_per_tick"])
        if state["acute_stress"] > crowd["acute_high"]:
            self.adjust(state, "chronic_stress", crowd["chronic_rate_per_day"] / tpd)
        else:
            self.adjust(state, "chronic_stress", -crowd["chronic_recovery_per_day"] / tpd)
        if state["chronic_stress"] > 0.8:
            self.adjust(state, "learned_helplessness", crowd["helplessness_rate_per_day"] / tpd)
        self.adjust(state, "aggression_urge", (state["acute_stress"] - 0.3) * 0.02)

        if state["hunger"] >= 99.5 or state["thirst"] >= 99.5:
            self.adjust(state, "health", -drains["starvation_health_per_tick"])
        elif state["hunger"] < 60 and state["thirst"] < 60:
            self.adjust(state, "health", drains["health_regen_per_tick"])
        if stage in ("senescent", "death-eligible"):
            self.adjust(state, "health", -drains["senescent_health_per_day"] / tpd)
        if stage == "pup":
            mother = ctx.profile.get("mother", "")
            if not mother or not ctx.port.is_active(mother):
                self.adjust(state, "health", -drains["orphan_pup_health_per_tick"])

        state["receptive"] = estrous_receptive(
            ctx.profile.get("gender", "?"), age, c["estrous"], c["lifecycle"]
        )

    def _transition_stage(self, ctx: AgentContext, state: dict[str, Any], stage: str) -> None:
        previous = state.get("stage", "pup")
        if stage == previous:
            return
        state["stage"] = stage
        ctx.port.record("stage", to=stage, prev=previous)
        if stage == "adult" and state.get("social_role", "none") == "none":
            fraction = self.constants["role_assignment"]["dominant_fraction"]
            state["social_role"] = "dominant" if ctx.rng.random() < fraction else "subordinate"

    # -- post-invoke: action consequences -----------------------------------------

    def _consequences(self, ctx: AgentContext, state: dict[str, Any]) -> None:
        results = ctx.cache.read("invoked_results")["results"]
        for result in results:
            entry = self._by_name.get(result["name"])
            if entry is None:
                continue
            params = entry.get("params", {})
            self.adjust(state, "energy", -float(params.get("energy_cost", 1.0)))
            if result["status"] == "ok" and result["detail"] in ("done", "mated"):
                for fname, amount in params.get("self_effects", {}).items():
                    self.adjust(state, fname, float(amount))


class MouseReflectPlugin(ReflectPlugin):
    """Survival checks, gestation resolution, periodic reflection notes."""

    def __init__(self, adapter, constants: dict[str, Any], state_plugin: MouseStatePlugin):
        super().__init__(adapter, every_ticks=constants["ticks_per_day"])
        self.constants = constants
        self._state = state_plugin
        self.routine: tuple[str, ...] = ()
        self.bindings: dict[str, str] = {}

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        state = self._state.get(ctx.agent)
        tick = ctx.tick
        if state.get("pregnant_due") and tick >= int(state["pregnant_due"]):
            self._deliver_litter(ctx, state)
        c = self.constants
        age = age_days(ctx.profile, tick, c["ticks_per_day"])
        stage = lifecycle_stage(age, c["lifecycle"])
        if state.get("health", 100) <= 0:
            ctx.port.remove_self("starvation")
        elif stage == "death-eligible":
            ctx.port.remove_self("natural")
        return super().execute(ctx)

    def _deliver_litter(self, ctx: AgentContext, state: dict[str, Any]) -> None:
        c = self.constants
        rep = c["reproduction"]
        litter = ctx.rng.randint(rep["litter_min"], rep["litter_max"])
        generation = 1 + max(
            int(ctx.profile.get("generation", 0)), int(state.get("pregnant_father_generation", 0))
        )
        cell = ctx.port.try_env("space", "position_of", agent=ctx.agent) or [0, 0]
        specs = []
        for _ in range(litter):
            gender = "F" if ctx.rng.random() < 0.5 else "M"
            specs.append(
                AgentSpec(
                    id="",
                    profile={
                        "gender": gender,
                        "birth_tick": ctx.tick,
                        "generation": generation,
                        "mother": ctx.agent,
                        "father": state.get("pregnant_father", ""),
                        "init_age_days": 0.0,
                        "colony": ctx.profile.get("colony", "c1"),
                    },
                    initial_state=dict(c["pup_state"]),
                    routine=self.routine,
                    bindings=dict(self.bindings),
                    meta={"cell": list(cell), "origin": "birth"},
                )
            )
        ctx.port.spawn(specs)
        state["pregnant_due"] = 0
        state["pregnant_father"] = ""
        state["pregnant_father_generation"] = 0
        self._state.adjust(state, "maternal_motivation", 0.2)
        self._state.put(ctx.agent, state)


def handle_mate(ctx: ActionContext, target: str, plugin: CommunicationPlugin) -> ActionResult:
    """Mate interaction: biological preconditions, then pregnancy on contact."""
    hooks = ctx.controller.hooks
    params = (ctx.entry or {}).get("params", {})
    tpd = ctx.controller.system.timer.ticks_per_day
    lc = params.get("lifecycle", DEFAULT_LIFECYCLE)
    father_profile = hooks.profile_of(ctx.caller) or {}
    mother_profile = hooks.profile_of(target) or {}
    mother_state = hooks.state_of(target) or {}
    father_state = hooks.state_of(ctx.caller) or {}
    if father_profile.get("gender") != "M" or mother_profile.get("gender") != "F":
        return ActionResult("failed", "pair-mismatch")
    father_age = age_days(father_profile, ctx.tick, tpd)
    mother_age = age_days(mother_profile, ctx.tick, tpd)
    if lifecycle_stage(father_age, lc) != "adult" or lifecycle_stage(mother_age, lc) != "adult":
        return ActionResult("failed", "not-adult")
    if not estrous_receptive("F", mother_age, params.get("estrous"), lc):
        return ActionResult("failed", "not-receptive")
    if mother_state.get("pregnant_due"):
        return ActionResult("failed", "pregnant")
    health_min = float(params.get("health_min", 30))
    if mother_state.get("health", 0) < health_min or father_state.get("health", 0) < health_min:
        return ActionResult("failed", "unhealthy")
    result = plugin.perform_interaction(ctx, target)
    if result.status != "ok" or result.detail != "done":
        return result
    gestation = int(params.get("gestation_ticks", 24))
    deltas = result.state_deltas + (
        ("state", f"{target}/pregnant_due", {"op": "set", "value": ctx.tick + gestation}),
        ("state", f"{target}/pregnant_father", {"op": "set", "value": ctx.caller}),
        (
            "state",
            f"{target}/pregnant_father_generation",
            {"op": "set", "value": int(father_profile.get("generation", 0))},
        ),
    )
    return ActionResult("ok", "mated", state_deltas=deltas)


# ---------------------------------------------------------------------------
# Scripted-engine utility table
# ---------------------------------------------------------------------------


def _nearest(perception: dict[str, Any], predicate) -> dict[str, Any] | None:
    for entity in perception.get("nearby", []):
        if entity["kind"] == "agent" and predicate(entity):
            return entity
    return None


def make_utility_table(constants: dict[str, Any]):
    u = constants["utility"]
    lc = constants["lifecycle"]
    tpd = constants["ticks_per_day"]

    def table(ctx: PromptContext) -> list[PlanCandidate]:
        s, profile, perc = ctx.state, ctx.profile, ctx.perception
        age = age_days(profile, ctx.tick, tpd)
        stage = lifecycle_stage(age, lc)
        gender = profile.get("gender", "?")
        scores: list[tuple[str, float]] = []

        if stage == "pup":
            mother = profile.get("mother", "")
            near_mother = _nearest(perc, lambda e: e["id"] == mother)
            if near_mother is not None:
                scores.append((f"huddle(target={mother})", 0.6))
            scores.append(("sleep()", 0.4))
            scores.append(("idle()", 0.2))
            return [PlanCandidate(t, w) for t, w in scores]

        hunger, thirst, energy = s.get("hunger", 0), s.get("thirst", 0), s.get("energy", 100)
        scores.append(("eat()", u["eat"] * (hunger / 100.0) ** 1.5))
        scores.append(("drink()", u["drink"] * (thirst / 100.0) ** 1.5))
        scores.append(("sleep()", u["sleep"] * ((100.0 - energy) / 100.0) ** 2))
        scores.append(("rest()", u["rest"] * (100.0 - energy) / 100.0))
        if hunger >= u["hunger_urgent"]:
            scores[0] = ("eat()", scores[0][1] + 1.0)
        if thirst >= u["hunger_urgent"]:
            scores[1] = ("drink()", scores[1][1] + 1.0)

        helpless = s.get("learned_helplessness", 0.0)
        chronic = s.get("chronic_stress", 0.0)
        acute = s.get("acute_stress", 0.0)
        withdrawn = helpless > 0.5
        scores.append(("withdraw()", u["withdraw"] * helpless * chronic))
        scores.append(("freeze()", u["freeze"] * max(0.0, acute - 0.8)))
        scores.append(("wander_aimless()", u["wander"] * chronic * helpless))
        scores.append(("self_groom()", u["selfgroom"] + 0.3 * chronic))

        if withdrawn:
            return [PlanCandidate(t, w) for t, w in scores]

        prosocial = s.get("prosociality", 0.5)
        peer = _nearest(perc, lambda e: e["stage"] not in ("pup",))
        if peer is not None:
            scores.append((f"groom_other(target={peer['id']})", u["groom"] * prosocial))
            scores.append((f"sniff_greet(target={peer['id']})", u["sniff"]))
            if stage == "juvenile" and peer["stage"] == "juvenile":
                scores.append((f"play(target={peer['id']})", u["play"]))
            aggression = s.get("aggression_urge", 0.0)
            if gender == "M" and aggression > 0.4:
                scores.append((f"fight(target={peer['id']})", u["fight"] * aggression))
                scores.append((f"threat_display(target={peer['id']})", u["threat"] * aggression))

        if stage == "adult" and gender == "M":
            female = _nearest(perc, lambda e: e.get("receptive") and e.get("gender") == "F")
            if female is not None:
                if female["distance"] <= 1:
                    scores.append((f"mate(target={female['id']})", u["mate"]))
                else:
                    scores.append((f"court(target={female['id']})", u["court"]))
        if gender == "F" and s.get("pregnant_due"):
            scores.append(("build_nest()", u["nest"]))
        if s.get("receptive"):
            scores.append(("build_nest()", u["nest"] * 0.6))

        if stage in ("juvenile", "adult"):
            scores.append(("explore()", u["explore"]))
        if s.get("social_role") == "dominant":
            scores.append(("patrol_territory()", u["patrol"]))
            scores.append(("mark_territory()", u["mark"]))

        merged: dict[str, float] = {}
        for text, weight in scores:
            merged[text] = max(merged.get(text, 0.0), weight)
        return [PlanCandidate(t, w) for t, w in merged.items()]

    return table


def build(package: ScenarioPackage, stores, engine, include_world: bool = True) -> ScenarioRuntime:
    constants = package.constants
    state = MouseStatePlugin(stores.open_adapter("state", "global", "main"), constants)
    state.attach_catalog(package.catalog)
    reflect = MouseReflectPlugin(stores.open_adapter("reflect", "global", "main"), constants, state)
    runtime = standard_plugins(
        package,
        stores,
        engine,
        state,
        reflect,
        lambda profile: MousePerceivePlugin(profile, state, constants),
        include_world=include_world,
    )
    reflect.routine = package.routine
    reflect.bindings = dict(runtime.bindings)
    return runtime
