"""Generic cognitive plugins reused by every scenario.

Scenario packages bind these directly or subclass them (a scenario's State
and Reflect steps usually carry domain logic; Perceive, Plan, and Invoke are
generic). Each plugin owns its injected adapter and never reads another
plugin's namespace.
"""
from __future__ import annotations

import logging
from typing import Any

from .agents import AgentContext, AgentPlugin
from .cognition import EngineFault, PlanCandidate, PromptContext, parse_plan
from .persistence import AdapterHandle

log = logging.getLogger(__name__)


class ProfilePlugin(AgentPlugin):
    """Long-term static identity; loaded at activation, immutable afterwards."""

    component = "Profile"

    def __init__(self, adapter: AdapterHandle):
        self._kv = adapter

    def store(self, agent: str, profile: dict[str, Any]) -> None:
        self._kv.kv_put(agent, profile)

    def load(self, agent: str) -> dict[str, Any] | None:
        return self._kv.kv_get(agent)

    def execute(self, ctx: AgentContext) -> Any:
        return None


class StatePlugin(AgentPlugin):
    """Dynamic internal state with declared bounds; deltas clamp, never overflow."""

    component = "State"

    def __init__(self, adapter: AdapterHandle, bounds: dict[str, tuple[float, float]] | None = None):
        self._kv = adapter
        self.bounds = dict(bounds or {})

    def ensure(self, agent: str, initial: dict[str, Any]) -> None:
        if not self._kv.kv_contains(agent):
            self._kv.kv_put(agent, dict(initial))

    def get(self, agent: str) -> dict[str, Any]:
        return dict(self._kv.kv_get(agent) or {})

    def put(self, agent: str, state: dict[str, Any]) -> None:
        self._kv.kv_put(agent, state)

    def apply(self, agent: str, fname: str, op: Any) -> None:
        """Apply one delta: raw value sets, {"op": "add"|"set"} adjusts."""
        state = self._kv.kv_get(agent)
        if state is None:
            return
        if isinstance(op, dict) and "op" in op:
            if op["op"] == "add":
                value = float(state.get(fname, 0.0)) + float(op["value"])
            else:
                value = op["value"]
        else:
            value = op
        state[fname] = self._clamp(fname, value)
        self._kv.kv_put(agent, state)

    def adjust(self, state: dict[str, Any], fname: str, delta: float) -> None:
        state[fname] = self._clamp(fname, float(state.get(fname, 0.0)) + delta)

    def _clamp(self, fname: str, value: Any) -> Any:
        if fname in self.bounds and isinstance(value, (int, float)):
            lo, hi = self.bounds[fname]
            if value < lo or value > hi:
                log.debug("clamping %s=%s into [%s, %s]", fname, value, lo, hi)
            return min(hi, max(lo, value))
        return value

    def execute(self, ctx: AgentContext) -> Any:
        return None


class PerceivePlugin(AgentPlugin):
    """The agent's sensory system: drained mailbox plus nearby entities."""

    component = "Perceive"
    output_slot = "perception"
    output_schema = {"tick": "int", "messages": "list", "nearby": "list"}

    def __init__(self, radius: int = 3):
        self.radius = radius

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        messages = [m.to_doc() for m in ctx.port.drain_mailbox()]
        cell = ctx.port.try_env("space", "position_of", agent=ctx.agent)
        nearby: list[dict[str, Any]] = []
        if cell is not None:
            found = ctx.port.try_env("space", "query_nearby", pos=cell, radius=self.radius) or []
            nearby = [e for e in found if e["id"] != ctx.agent]
        day, hour = ctx.port.simtime()
        return {
            "tick": ctx.tick,
            "day": day,
            "hour": hour,
            "cell": cell,
            "messages": messages,
            "nearby": nearby,
        }


class PlanPlugin(AgentPlugin):
    """Synthesizes profile, state, perception, and reflections into a plan."""

    component = "Plan"
    output_slot = "plan"
    output_schema = {"text": "str", "candidates": "list"}
    requires = ("perception",)

    def __init__(self, engine: Any, state_plugin: StatePlugin, reflect_plugin: "ReflectPlugin | None" = None):
        self.engine = engine
        self._state = state_plugin
        self._reflect = reflect_plugin

    def build_context(self, ctx: AgentContext) -> PromptContext:
        perception = ctx.cache.read("perception")
        reflections = self._reflect.recent(ctx.agent) if self._reflect else []
        return PromptContext(
            agent_id=ctx.agent,
            tick=ctx.tick,
            day=perception.get("day", 0),
            hour=perception.get("hour", 0.0),
            profile=dict(ctx.profile),
            state=self._state.get(ctx.agent),
            perception=perception,
            reflections=reflections,
            actions=[
                {"name": d.name, "category": d.category, "arg_schema": d.arg_schema}
                for d in ctx.port.action_descriptors()
            ],
        )

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        prompt = self.build_context(ctx)
        try:
            text, candidates = self.engine.complete_with_candidates(prompt, ctx.rng)
        except EngineFault as exc:
            ctx.port.record("fault", stage="engine", error=str(exc)[:120])
            return {"text": "idle()", "candidates": []}
        return {"text": text, "candidates": [c.to_doc() for c in candidates]}


class InvokePlugin(AgentPlugin):
    """Parses plan text into action requests and executes them via the Controller.

    Re-plans at most once per tick: if an invoked action comes back denied or
    failed, the next weighted candidate is tried.
    """

    component = "Invoke"
    output_slot = "invoked_results"
    output_schema = {"results": "list"}
    requires = ("plan",)

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        plan = ctx.cache.read("plan")
        known = set(ctx.port.action_names())
        results = self._run_plan(ctx, plan["text"], known)
        if any(r["status"] != "ok" for r in results):
            fallback = self._next_candidate(plan, plan["text"])
            if fallback is not None:
                ctx.port.record("warning", reason="replan", detail=fallback[:60])
                results.extend(self._run_plan(ctx, fallback, known))
        return {"results": results}

    def _run_plan(self, ctx: AgentContext, text: str, known: set[str]) -> list[dict[str, Any]]:
        parsed, warnings = parse_plan(text, known)
        for warning in warnings:
            ctx.port.record("warning", reason="parse", detail=warning[:80])
        results = []
        for name, args in parsed:
            result = ctx.port.invoke_action(name, args)
            results.append({"name": name, "status": result.status, "detail": result.detail})
        return results

    @staticmethod
    def _next_candidate(plan: dict[str, Any], executed: str) -> str | None:
        texts = [c["text"] for c in plan.get("candidates", [])]
        if executed in texts:
            idx = texts.index(executed) + 1
            if idx < len(texts):
                return texts[idx]
            return None
        return texts[0] if texts else None


class ReflectPlugin(AgentPlugin):
    """Periodic synthesis of recent experience into short reusable notes."""

    component = "Reflect"
    output_slot = "reflection"
    output_schema = {"note": "str"}

    def __init__(self, adapter: AdapterHandle, every_ticks: int = 24, keep: int = 10):
        self._kv = adapter
        self.every_ticks = every_ticks
        self.keep = keep

    def recent(self, agent: str) -> list[str]:
        keys = self._kv.kv_scan_prefix(f"refl/{agent}/")[-self.keep :]
        return [self._kv.kv_get(k) for k in keys]

    def note(self, ctx: AgentContext, text: str) -> None:
        self._kv.kv_put(f"refl/{ctx.agent}/{ctx.tick:08d}", text)

    def execute(self, ctx: AgentContext) -> dict[str, Any]:
        note = ""
        if self.every_ticks > 0 and ctx.tick % self.every_ticks == 0:
            results = (
                ctx.cache.read("invoked_results")["results"]
                if ctx.cache.has("invoked_results")
                else []
            )
            done = ",".join(r["name"] for r in results if r["status"] == "ok")
            note = f"day summary: did {done or 'nothing'}"
            self.note(ctx, note)
        return {"note": note}


def plan_candidates_from_scores(scores: list[tuple[str, float]]) -> list[PlanCandidate]:
    """Utility-table helper: (plan text, score) pairs to candidates."""
    return [PlanCandidate(text, max(0.0, w)) for text, w in scores]
