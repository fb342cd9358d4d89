"""AgentManager and the Agent composite: an ordered chain of components.

Each component hosts one hot-swappable plugin (Profile, State, Perceive,
Plan, Invoke, Reflect). An agent's routine is an ordered list of component
names validated statically: steps must be bound, Perceive precedes Plan
precedes Invoke, and no step appears more than twice (State appears twice in
the six-step mouse cycle). Components communicate through a typed cache that
is cleared at routine start and never leaks across agents or ticks.

Births and deaths commit at the tick barrier: an agent removed mid-tick still
completes its current routine and is absent from the next tick; a registered
agent activates at the next barrier. Plugin faults are contained per agent:
a fault aborts that agent's routine with a fault event and the tick continues
for everyone else.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .canon import digest_value
from .controller import Controller, ControllerPort
from .kernel import EventRecord
from .rng import RngStream


class AgentError(Exception):
    pass


class RoutineError(AgentError):
    pass


class RoutineOrderFault(AgentError):
    pass


class PluginOutputFault(AgentError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    id: str
    profile: dict[str, Any]
    initial_state: dict[str, Any]
    routine: tuple[str, ...]
    bindings: dict[str, str]
    meta: dict[str, Any] = field(default_factory=dict)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "profile": self.profile,
            "initial_state": self.initial_state,
            "routine": list(self.routine),
            "bindings": self.bindings,
            "meta": self.meta,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "AgentSpec":
        return cls(
            id=doc["id"],
            profile=dict(doc["profile"]),
            initial_state=dict(doc["initial_state"]),
            routine=tuple(doc["routine"]),
            bindings=dict(doc["bindings"]),
            meta=dict(doc.get("meta", {})),
        )


_ORDERED_STEPS = ("Perceive", "Plan", "Invoke")


def validate_routine(routine: tuple[str, ...] | list[str], bound_components: set[str]) -> None:
    """Static routine checks; raises RoutineError on violation."""
    if not routine:
        raise RoutineError("routine must not be empty")
    for step in routine:
        if step not in bound_components:
            raise RoutineError(f"unknown routine step {step!r}")
        if list(routine).count(step) > 2:
            raise RoutineError(f"step {step!r} appears more than twice")
    present = [s for s in _ORDERED_STEPS if s in routine]
    indices = [routine.index(s) for s in present]
    if indices != sorted(indices):
        raise RoutineError("routine must order Perceive before Plan before Invoke")
    if "Invoke" in routine and "Plan" not in routine:
        raise RoutineError("Invoke requires Plan")
    if "Plan" in routine and "Perceive" not in routine:
        raise RoutineError("Plan requires Perceive")


_SLOT_CHECKS: dict[str, Callable[[Any], bool]] = {
    "str": lambda v: isinstance(v, str),
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "list": lambda v: isinstance(v, (list, tuple)),
    "dict": lambda v: isinstance(v, dict),
    "any": lambda v: True,
}


class ComponentCache:
    """Typed inter-component slots for one routine pass of one agent."""

    def __init__(self) -> None:
        self._slots: dict[str, Any] = {}

    def write(self, slot: str, value: Any, schema: dict[str, str] | None = None) -> None:
        if schema is not None:
            if not isinstance(value, dict):
                raise PluginOutputFault(f"slot {slot!r} must be a record")
            for fname, ftype in schema.items():
                if fname not in value:
                    raise PluginOutputFault(f"slot {slot!r} missing field {fname!r}")
                if not _SLOT_CHECKS.get(ftype, _SLOT_CHECKS["any"])(value[fname]):
                    raise PluginOutputFault(f"slot {slot!r} field {fname!r} is not a {ftype}")
        self._slots[slot] = value

    def read(self, slot: str) -> Any:
        return self._slots[slot]

    def has(self, slot: str) -> bool:
        return slot in self._slots

    def slots(self) -> dict[str, Any]:
        return dict(self._slots)


@dataclass
class AgentContext:
    """Per-routine-pass view handed to every plugin execute call."""

    agent: str
    tick: int
    port: ControllerPort
    cache: ComponentCache
    rng: RngStream
    profile: dict[str, Any]


class AgentPlugin:
    """Abstract plugin base; every concrete plugin defines execute()."""

    component = "Base"
    output_slot: str | None = None
    output_schema: dict[str, str] | None = None
    requires: tuple[str, ...] = ()

    def execute(self, ctx: AgentContext) -> Any:
        raise NotImplementedError


class Agent:
    """Composite of components; behavior emerges from sequential execution."""

    def __init__(self, spec: AgentSpec):
        self.spec = spec
        self.id = spec.id
        self.routine: tuple[str, ...] = tuple(spec.routine)
        self.bindings = dict(spec.bindings)
        self._next_routine: tuple[str, ...] | None = None

    def stage_routine(self, routine: tuple[str, ...]) -> bool:
        """Stage a validated routine to take effect at the next tick."""
        if routine == self.routine and self._next_routine is None:
            return False
        self._next_routine = routine
        return True

    def apply_staged(self) -> bool:
        if self._next_routine is not None:
            self.routine = self._next_routine
            self._next_routine = None
            return True
        return False


class AgentManager:
    """Per-pod agent host: iterates agents, contains faults, defers commits."""

    def __init__(
        self,
        pod: str,
        controller: Controller,
        plugins: dict[str, AgentPlugin],
        master_seed: int | str,
        on_ledger_update: Callable[[str, bool], None] | None = None,
    ):
        self.pod = pod
        self.controller = controller
        self.plugins = plugins  # plugin_id -> instance
        self.master_seed = master_seed
        self._agents: dict[str, Agent] = {}
        self._streams: dict[str, RngStream] = {}
        self._pending_specs: list[AgentSpec] = []
        self._pending_removals: list[tuple[str, str]] = []
        self._on_ledger_update = on_ledger_update or (lambda aid, alive: None)
        self.on_routine_committed: Callable[[str, tuple[str, ...]], None] = lambda aid, r: None

    # -- registration --------------------------------------------------------

    def register_agent(self, spec: AgentSpec) -> str:
        if spec.id in self._agents or any(s.id == spec.id for s in self._pending_specs):
            raise AgentError(f"duplicate agent id {spec.id}")
        for component, plugin_id in spec.bindings.items():
            if plugin_id not in self.plugins:
                raise AgentError(f"unknown plugin binding {component}->{plugin_id}")
            if self.plugins[plugin_id].component != component:
                raise AgentError(f"plugin {plugin_id} does not host component {component}")
        for required in ("Profile", "State"):
            if required not in spec.bindings:
                raise AgentError(f"bindings must include the {required} component")
        validate_routine(spec.routine, set(spec.bindings))
        self._pending_specs.append(spec)
        return spec.id

    def remove_agent(self, agent: str, cause: str = "despawn") -> None:
        if agent not in self._agents:
            raise AgentError(f"unknown agent {agent}")
        if not any(a == agent for a, _ in self._pending_removals):
            self._pending_removals.append((agent, cause))

    def set_routine(self, agent: str, routine: list[str] | tuple[str, ...]) -> bool:
        target = self._agents.get(agent)
        if target is None:
            raise AgentError(f"unknown agent {agent}")
        routine = tuple(routine)
        validate_routine(routine, set(target.bindings))
        changed = target.stage_routine(routine)
        if changed:
            self.controller.system.recorder.record(
                EventRecord.make(
                    self.controller.executing_tick,
                    "config-change",
                    agent,
                    what="routine",
                    steps=",".join(routine),
                )
            )
        return True

    # -- accessors -------------------------------------------------------------

    def active_ids(self) -> list[str]:
        return sorted(self._agents)

    def agent_count(self) -> int:
        return len(self._agents)

    def has_agent(self, agent: str) -> bool:
        return agent in self._agents

    def agent(self, agent: str) -> Agent:
        return self._agents[agent]

    def rng_of(self, agent: str) -> RngStream:
        if agent not in self._streams:
            self._streams[agent] = RngStream.derive(self.master_seed, agent)
        return self._streams[agent]

    def rng_states(self) -> dict[str, Any]:
        return {aid: s.state_doc() for aid, s in sorted(self._streams.items())}

    def restore_rng(self, states: dict[str, Any]) -> None:
        self._streams = {aid: RngStream.from_doc(doc) for aid, doc in states.items()}

    # -- execution ----------------------------------------------------------------

    def run_tick(self, tick: int) -> int:
        """Execute every local agent once, in canonical id order."""
        executed = 0
        for aid in self.active_ids():
            self.execute_agent(aid, tick)
            executed += 1
        return executed

    def execute_agent(self, aid: str, tick: int) -> None:
        agent = self._agents[aid]
        rng = self.rng_of(aid)
        rng.begin_tick(tick)
        port = ControllerPort(self.controller, aid)
        cache = ComponentCache()
        profile_plugin = self.plugins[agent.bindings["Profile"]]
        profile = profile_plugin.load(aid) if hasattr(profile_plugin, "load") else {}
        # copy: a plugin mutating its context view must not reach the store
        ctx = AgentContext(
            agent=aid, tick=tick, port=port, cache=cache, rng=rng, profile=dict(profile or {})
        )
        recorder = self.controller.system.recorder
        step_name = ""
        try:
            for step_name in agent.routine:
                self.execute_component(agent, step_name, ctx)
        except Exception as exc:
            recorder.record(
                EventRecord.make(
                    tick,
                    "fault",
                    aid,
                    step=step_name,
                    error=f"{type(exc).__name__}: {exc}"[:160],
                )
            )
            return
        recorder.record(EventRecord.make(tick, "routine", aid, steps=len(agent.routine)))

    def execute_component(self, agent: Agent, step: str, ctx: AgentContext) -> None:
        """Run one component: check upstream slots, execute, validate output."""
        plugin = self.plugins[agent.bindings[step]]
        for slot in plugin.requires:
            if not ctx.cache.has(slot):
                raise RoutineOrderFault(f"step {step} requires slot {slot!r}")
        out = plugin.execute(ctx)
        if plugin.output_slot is not None:
            ctx.cache.write(plugin.output_slot, out, plugin.output_schema)

    # -- barrier commits -------------------------------------------------------

    def commit_removals(self, tick: int) -> list[str]:
        removed = []
        recorder = self.controller.system.recorder
        for aid, cause in sorted(self._pending_removals):
            agent = self._agents.pop(aid, None)
            if agent is None:
                continue
            self._streams.pop(aid, None)
            self.controller.system.messager.seal_mailbox(aid)
            if self.controller.environment.has_component("space"):
                self.controller.route_env("space", "vacate", {"agent": aid}, log=False)
            if self.controller.environment.has_component("relation"):
                self.controller.route_env("relation", "mark_dead", {"agent": aid}, log=False)
            self._on_ledger_update(aid, False)
            recorder.record(EventRecord.make(tick, "death", aid, cause=cause))
            removed.append(aid)
        self._pending_removals = []
        return removed

    def commit_activations(self, tick: int) -> list[str]:
        added = []
        recorder = self.controller.system.recorder
        for spec in self._pending_specs:
            profile_plugin = self.plugins[spec.bindings["Profile"]]
            state_plugin = self.plugins[spec.bindings["State"]]
            profile_plugin.store(spec.id, spec.profile)
            state_plugin.ensure(spec.id, spec.initial_state)
            self.controller.system.messager.open_mailbox(spec.id)
            cell = spec.meta.get("cell")
            if cell is not None:
                self.controller.route_env(
                    "space", "place", {"agent": spec.id, "cell": cell}, log=False
                )
            self._agents[spec.id] = Agent(spec)
            self._on_ledger_update(spec.id, True)
            if spec.meta.get("origin") == "birth":
                recorder.record(
                    EventRecord.make(
                        tick,
                        "birth",
                        spec.id,
                        mother=spec.profile.get("mother", ""),
                        father=spec.profile.get("father", ""),
                        gender=spec.profile.get("gender", ""),
                        generation=spec.profile.get("generation", 0),
                    )
                )
            added.append(spec.id)
        self._pending_specs = []
        for agent in self._agents.values():
            if agent.apply_staged():
                self.on_routine_committed(agent.id, agent.routine)
        return added

    def profile_hash(self, profile: dict[str, Any]) -> str:
        return digest_value(profile)
