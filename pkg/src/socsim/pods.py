"""Distributed runtime: MasPods orchestrated by a PodManager.

A MasPod is a deployment unit: a group of agents plus local Controller and
module facades. The PodManager owns pod lifecycle, the placement ledger, and
exclusive inter-pod message brokering. Placement is least-loaded: a new agent
lands on the pod with the fewest agents, ties broken by lowest pod id, which
keeps max-min <= 1 for any placement-only sequence.

Transport transparency: a run partitioned across n pods produces an event log
identical to the single-pod run with the same seed. The only pod-dependent
values in the log are message-id prefixes ("<pod>/..."); the documented
normalization (:func:`normalize_event_line`) strips them, and the id suffix
is a pure function of (tick, sender, seq), so normalized logs compare
byte-for-byte.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Any, Callable

from .agents import AgentManager, AgentPlugin, AgentSpec
from .canon import canon_json, digest_value
from .controller import Controller
from .kernel import EventRecord, Message, agent_id, normalize_pod_prefixes, pod_id
from .persistence import AdapterHandle
from .rng import RngStream


class PodError(Exception):
    pass


@dataclass
class PodStats:
    pod: str
    agent_count: int
    memory_estimate: int
    tick_duration_ms: float
    stale: bool = False

    def to_doc(self) -> dict[str, Any]:
        return {
            "pod": self.pod,
            "agent_count": self.agent_count,
            "memory_estimate": self.memory_estimate,
            "tick_duration_ms": round(self.tick_duration_ms, 3),
            "stale": self.stale,
        }


class MasPod:
    """In-process pod host; the TCP PodClient mirrors this surface."""

    def __init__(self, pid: str, controller: Controller, manager: AgentManager):
        self.id = pid
        self.controller = controller
        self.manager = manager
        self.status = "starting"
        self.last_tick_ms = 0.0

    def admit(self, spec: AgentSpec) -> str:
        return self.manager.register_agent(spec)

    def execute_agent(self, aid: str, tick: int) -> None:
        started = time.perf_counter()
        self.manager.execute_agent(aid, tick)
        self.last_tick_ms += (time.perf_counter() - started) * 1000.0

    def begin_tick(self, tick: int) -> None:
        self.status = "running"
        self.last_tick_ms = 0.0

    def run_tick(self, tick: int) -> int:
        self.begin_tick(tick)
        return self.manager.run_tick(tick)

    def commit_removals(self, tick: int) -> list[str]:
        return self.manager.commit_removals(tick)

    def commit_activations(self, tick: int) -> list[str]:
        return self.manager.commit_activations(tick)

    def active_ids(self) -> list[str]:
        return self.manager.active_ids()

    def agent_count(self) -> int:
        return self.manager.agent_count()

    def stats_probe(self) -> dict[str, Any]:
        size = 0
        for aid in self.manager.active_ids():
            size += len(canon_json(self.manager.agent(aid).spec.to_doc()))
        return {
            "agent_count": self.manager.agent_count(),
            "memory_estimate": size + 2048,
            "tick_duration_ms": self.last_tick_ms,
        }

    def resync(self) -> None:
        """Hook for transports that mirror the roster elsewhere."""

    def shutdown(self) -> None:
        self.status = "draining"


_AGENT_ID_RE = re.compile(r"^a(\d{8})$")


def normalize_event_line(line: str) -> str:
    """Strip pod prefixes from message ids; the documented log normalization."""
    return normalize_pod_prefixes(line)


def normalize_event_log(text: str) -> str:
    return "\n".join(normalize_event_line(line) for line in text.splitlines()) + ("\n" if text else "")


class PodManager:
    """Central coordinator: pod lifecycle, placement, broker, stats."""

    def __init__(
        self,
        ledger: AdapterHandle,
        plugins: dict[str, AgentPlugin],
        master_seed: int | str,
        controller_factory: Callable[[str], Controller],
        coordinator: Controller,
    ):
        self._ledger = ledger
        self._plugins = plugins
        self._master_seed = master_seed
        self._controller_factory = controller_factory
        self._coordinator = coordinator
        self._pods: dict[str, MasPod] = {}
        self._counts: dict[str, int] = {}
        self._spawn_queue: list[AgentSpec] = []
        self._retry_messages: list[Message] = []
        self._system_stream = RngStream.derive(master_seed, "SYSTEM")
        # Action handlers draw from per-agent streams separate from the
        # cognition streams, so remote pods can host cognition while the
        # coordinator executes actions without index interleaving.
        self._action_streams: dict[str, RngStream] = {}

    # -- pods -------------------------------------------------------------------

    def allocate_pod_id(self) -> str:
        n = self._ledger.kv_get("next_pod", 0)
        self._ledger.kv_put("next_pod", n + 1)
        return pod_id(n)

    def make_parts(self, pid: str) -> tuple[Controller, AgentManager]:
        """Controller + manager wired to this manager's ledger, for any transport."""
        controller = self._controller_factory(pid)
        manager = AgentManager(
            pid,
            controller,
            self._plugins,
            self._master_seed,
            on_ledger_update=lambda aid, alive, _pid=pid: self._ledger_update(_pid, aid, alive),
        )
        manager.on_routine_committed = lambda aid, routine: self._routine_update(aid, routine)
        return controller, manager

    def adopt_pod(self, pod: MasPod) -> str:
        if pod.id in self._pods:
            raise PodError(f"duplicate pod id {pod.id}")
        self._pods[pod.id] = pod
        self._counts[pod.id] = 0
        self._ledger.kv_put(f"pod/{pod.id}", {"status": "running"})
        self._coordinator.system.timer.register_pod(pod.id)
        pod.status = "running"
        return pod.id

    def create_pod(self, pid: str | None = None) -> str:
        pid = pid if pid is not None else self.allocate_pod_id()
        if pid in self._pods:
            raise PodError(f"duplicate pod id {pid}")
        controller, manager = self.make_parts(pid)
        return self.adopt_pod(MasPod(pid, controller, manager))

    def pods(self) -> dict[str, MasPod]:
        return dict(self._pods)

    def pod(self, pid: str) -> MasPod:
        return self._pods[pid]

    # -- placement ---------------------------------------------------------------

    def allocate_agent_id(self) -> str:
        n = self._ledger.kv_get("next_agent", 0)
        self._ledger.kv_put("next_agent", n + 1)
        return agent_id(n)

    def _note_explicit_id(self, aid: str) -> None:
        m = _AGENT_ID_RE.match(aid)
        if m:
            n = int(m.group(1))
            if n >= self._ledger.kv_get("next_agent", 0):
                self._ledger.kv_put("next_agent", n + 1)

    def place_agent(self, spec: AgentSpec) -> tuple[str, str]:
        """Register a spec on the pod with the fewest agents (ties: lowest id)."""
        if not self._pods:
            raise PodError("no pods running")
        if self._ledger.kv_contains(f"agent/{spec.id}"):
            raise PodError(f"duplicate agent id {spec.id}")
        self._note_explicit_id(spec.id)
        pid = min(self._pods, key=lambda p: (self._counts[p], p))
        self._pods[pid].admit(spec)
        self._counts[pid] += 1
        self._ledger.kv_put(
            f"agent/{spec.id}",
            {
                "pod": pid,
                "alive": True,
                "spec": spec.to_doc(),
                "profile_hash": digest_value(spec.profile),
            },
        )
        return pid, spec.id

    def queue_spawn(self, specs: list[AgentSpec]) -> list[str]:
        """Assign ids now (deterministic call order), place at the barrier."""
        assigned = []
        for spec in specs:
            aid = spec.id or self.allocate_agent_id()
            spec = AgentSpec(
                id=aid,
                profile=spec.profile,
                initial_state=spec.initial_state,
                routine=spec.routine,
                bindings=spec.bindings,
                meta=spec.meta,
            )
            self._spawn_queue.append(spec)
            assigned.append(aid)
        return assigned

    def _ledger_update(self, pid: str, aid: str, alive: bool) -> None:
        doc = self._ledger.kv_get(f"agent/{aid}")
        if doc is None:
            return
        if not alive and doc["alive"]:
            self._counts[pid] = max(0, self._counts[pid] - 1)
            self._action_streams.pop(aid, None)
            self._verify_profile(aid, doc)
        doc["alive"] = alive
        self._ledger.kv_put(f"agent/{aid}", doc)

    def _routine_update(self, aid: str, routine: tuple[str, ...]) -> None:
        doc = self._ledger.kv_get(f"agent/{aid}")
        if doc is not None:
            doc["spec"]["routine"] = list(routine)
            self._ledger.kv_put(f"agent/{aid}", doc)

    def _verify_profile(self, aid: str, doc: dict[str, Any]) -> None:
        bindings = doc["spec"]["bindings"]
        plugin = self._plugins.get(bindings.get("Profile", ""))
        if plugin is None or not hasattr(plugin, "load"):
            return
        profile = plugin.load(aid)
        if profile is not None and digest_value(profile) != doc["profile_hash"]:
            self._coordinator.system.recorder.record(
                EventRecord.make(
                    self._coordinator.system.timer.current,
                    "warning",
                    aid,
                    reason="profile-mutated",
                )
            )

    # -- lookup / iteration ------------------------------------------------------

    def locate(self, aid: str) -> str | None:
        doc = self._ledger.kv_get(f"agent/{aid}")
        if doc is None or not doc["alive"]:
            return None
        return doc["pod"]

    def all_active(self) -> list[str]:
        out: list[str] = []
        for pod in self._pods.values():
            out.extend(pod.active_ids())
        return sorted(out)

    def global_order(self) -> list[tuple[str, str]]:
        """All (agent, pod) pairs in canonical agent order; the tick schedule."""
        pairs: list[tuple[str, str]] = []
        for pid, pod in self._pods.items():
            pairs.extend((aid, pid) for aid in pod.active_ids())
        pairs.sort()
        return pairs

    def remove_agent(self, aid: str, cause: str) -> None:
        pid = self.locate(aid)
        if pid is None:
            raise PodError(f"unknown agent {aid}")
        self._pods[pid].manager.remove_agent(aid, cause)

    def set_routine(self, aid: str, routine: list[str]) -> bool:
        pid = self.locate(aid)
        if pid is None:
            raise PodError(f"unknown agent {aid}")
        return self._pods[pid].manager.set_routine(aid, routine)

    def rng_of(self, aid: str) -> RngStream:
        pid = self.locate(aid)
        if pid is None:
            return self._system_stream
        return self._pods[pid].manager.rng_of(aid)

    def action_rng_of(self, aid: str) -> RngStream:
        if self.locate(aid) is None:
            return self._system_stream
        if aid not in self._action_streams:
            self._action_streams[aid] = RngStream.derive(self._master_seed, f"{aid}/action")
        return self._action_streams[aid]

    # -- barrier -----------------------------------------------------------------

    def commit_barrier(self, tick: int) -> tuple[list[str], list[str]]:
        removed: list[str] = []
        for pid in sorted(self._pods):
            removed.extend(self._pods[pid].commit_removals(tick))
        for message in self._retry_messages:
            self._coordinator.deliver_message(message)
        self._retry_messages = []
        for spec in self._spawn_queue:
            self.place_agent(spec)
        self._spawn_queue = []
        added: list[str] = []
        for pid in sorted(self._pods):
            added.extend(self._pods[pid].commit_activations(tick))
        return added, removed

    # -- broker -------------------------------------------------------------------

    def broker_forward(self, m: Message, from_pod: str, to_pod: str | None = None) -> str:
        """Exclusive inter-pod delivery; draining pods retry next tick."""
        if to_pod is None:
            to_pod = self.locate(m.recipients[0]) if m.recipients else None
        if to_pod is not None and to_pod in self._pods:
            if self._pods[to_pod].status == "draining":
                self._retry_messages.append(m)
                return "retry"
        delivered = self._coordinator.deliver_message(m)
        return "accepted" if delivered else "dead-letter"

    # -- stats ---------------------------------------------------------------------

    def pod_stats(self) -> list[PodStats]:
        stats = []
        for pid in sorted(self._pods):
            try:
                probe = self._pods[pid].stats_probe()
                stats.append(
                    PodStats(
                        pod=pid,
                        agent_count=probe["agent_count"],
                        memory_estimate=probe["memory_estimate"],
                        tick_duration_ms=probe["tick_duration_ms"],
                    )
                )
            except Exception:
                stats.append(PodStats(pod=pid, agent_count=self._counts[pid], memory_estimate=0, tick_duration_ms=0.0, stale=True))
        return stats

    # -- snapshot support -----------------------------------------------------------

    def rng_states(self) -> dict[str, Any]:
        states: dict[str, Any] = {"SYSTEM": self._system_stream.state_doc()}
        for pod in self._pods.values():
            states.update(pod.manager.rng_states())
        for aid, stream in sorted(self._action_streams.items()):
            states[f"{aid}/action"] = stream.state_doc()
        return states

    def rehydrate(self, rng_states: dict[str, Any]) -> None:
        """Rebuild pod rosters and streams from the restored ledger."""
        for pid, pod in self._pods.items():
            pod.manager._agents.clear()
            pod.manager._streams.clear()
            pod.manager._pending_specs.clear()
            pod.manager._pending_removals.clear()
            self._counts[pid] = 0
        self._spawn_queue = []
        self._retry_messages = []
        self._action_streams = {}
        for key in self._ledger.kv_scan_prefix("agent/"):
            doc = self._ledger.kv_get(key)
            if not doc["alive"]:
                continue
            pid = doc["pod"]
            if pid not in self._pods:
                continue
            spec = AgentSpec.from_doc(doc["spec"])
            from .agents import Agent

            self._pods[pid].manager._agents[spec.id] = Agent(spec)
            self._counts[pid] += 1
        self._system_stream = RngStream.from_doc(rng_states["SYSTEM"])
        for stream_id, doc in rng_states.items():
            if stream_id == "SYSTEM":
                continue
            if stream_id.endswith("/action"):
                aid = stream_id[: -len("/action")]
                if self.locate(aid) is not None:
                    self._action_streams[aid] = RngStream.from_doc(doc)
                continue
            pid = self.locate(stream_id)
            if pid is not None:
                self._pods[pid].manager._streams[stream_id] = RngStream.from_doc(doc)
        for pid in sorted(self._pods):
            self._pods[pid].resync()
