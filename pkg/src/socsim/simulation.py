"""Simulation orchestrator: boot, tick loop, barrier-applied control commands.

One tick proceeds as: execute every active agent exactly once in global
canonical id order (each on its owning pod), commit deferred removals and
births, advance the Timer once all pods reported, snapshot on cadence, flush
the tick's events in canonical order, record metrics. Control commands
(pause, step, rules, rollback, message injection) queue up and apply only at
tick barriers, so no intervention can violate the barrier.

The first line of events.log is a config-change record echoing every
reproducibility input: seed, config hash, scenario hash, core source hash.
"""
from __future__ import annotations

import json
import queue
import time
from pathlib import Path
from typing import Any

from .actions import ActionFacade
from .agents import AgentSpec
from .canon import sha256_hex
from .config import ConfigError, SimulationConfig
from .controller import Controller, RuleSet, RuntimeHooks, ValidationRule, validate_rules
from .environment import Environment
from .kernel import SYSTEM, EventRecord
from .config import PcgConfig
from .pcg import pcg_generate
from .persistence import SnapshotNotFound, StoreRegistry
from .pods import PodManager
from .scenarios import build_runtime, load_scenario
from .services import System


def core_source_hash() -> str:
    """Hash over core module sources (scenario code excluded)."""
    root = Path(__file__).parent
    parts = []
    for path in sorted(root.glob("*.py")):
        parts.append(path.name + "\n" + path.read_text())
    return sha256_hex("\n".join(parts))


class CommandError(Exception):
    pass


class Simulation:
    def __init__(self, config: SimulationConfig):
        if config.out_dir is None:
            raise ConfigError("config.out_dir must be set")
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        self.package = load_scenario(config.scenario)
        self.ticks_per_day = config.ticks_per_day or self.package.ticks_per_day
        self.package.constants["ticks_per_day"] = self.ticks_per_day

        self.stores = StoreRegistry(self.out_dir, config.backing)
        self.system = System.bootstrap(self.ticks_per_day, self.out_dir / "events.log")
        self.system.in_tick = False
        self.runtime = build_runtime(self.package, self.stores, config.engine)

        self.environment = Environment()
        for plugin in self.runtime.env_plugins:
            self.environment.register(plugin)
        self.actions = ActionFacade()
        for plugin in self.runtime.action_plugins:
            self.actions.register_plugin(plugin)

        self.rules = RuleSet()
        hooks = RuntimeHooks(
            profile_of=self.runtime.profile_plugin.load,
            state_of=self.runtime.state_plugin.get,
            apply_state_delta=self.runtime.state_plugin.apply,
            active_agents=lambda: self.pod_manager.all_active(),
            remove_agent=lambda aid, cause: self.pod_manager.remove_agent(aid, cause),
            spawn_agents=lambda specs: self.pod_manager.queue_spawn(specs),
            rng_of=lambda aid: self.pod_manager.action_rng_of(aid),
            restore_snapshot=self._restore,
            declared_roles=lambda: self.package.roles,
            declared_regions=lambda: set(self.package.map_doc.get("regions", {})),
        )

        def controller_factory(pid: str) -> Controller:
            return Controller(pid, self.system, self.environment, self.actions, self.rules, hooks)

        self.coordinator = controller_factory("global")
        ledger = self.stores.open_adapter("pod-manager", "global", "roster")
        self.pod_manager = PodManager(
            ledger,
            self.runtime.plugin_registry,
            config.master_seed,
            controller_factory,
            self.coordinator,
        )
        self._cluster = None
        self._workers: list[Any] = []
        if config.transport == "tcp":
            self._boot_tcp_pods()
        else:
            for _ in range(config.pods):
                self.pod_manager.create_pod()

        if config.rules:
            parsed = [ValidationRule.from_doc(d) for d in config.rules]
            validate_rules(
                parsed,
                set(self.actions.table.names()),
                self.package.roles,
                set(self.package.map_doc.get("regions", {})),
            )
            self.rules.replace(parsed)

        self.snapshots: list[tuple[int, str]] = []
        self._commands: "queue.Queue[tuple[str, dict, queue.Queue]]" = queue.Queue()
        self._state = "running"
        self._alive = True

        self._load_initial_data()
        self._write_header()
        self.pod_manager.commit_barrier(0)
        self._snapshot(0)
        self.system.recorder.flush_barrier()
        self._record_metrics(0, 0.0)

    # -- boot helpers ------------------------------------------------------------

    def _boot_tcp_pods(self) -> None:
        from .kernel import pod_id
        from .wire import TcpPodCluster, adopt_tcp_pod

        self._cluster = TcpPodCluster()
        configure = {
            "scenario": str(self.config.scenario),
            "seed": self.config.master_seed,
            "ticks_per_day": self.ticks_per_day,
            "engine": self.config.engine,
        }
        for i in range(self.config.pods):
            self.pod_manager.allocate_pod_id()
            self._workers.append(self._cluster.spawn_worker(pod_id(i)))
        for _ in range(self.config.pods):
            pid, conn = self._cluster.accept(configure)
            adopt_tcp_pod(self.pod_manager, pid, conn, self.stores)

    def _load_initial_data(self) -> None:
        data_dir = self.config.data_dir
        if data_dir is None:
            data_dir = self.out_dir / "data_gen"
            pcg_generate(
                PcgConfig.from_doc(self.package.pcg),
                self.config.master_seed,
                data_dir,
                self.package.map_doc,
                base_state=self.package.constants.get("initial_state", {}),
            )
        identities = json.loads((Path(data_dir) / "identities.json").read_text())
        states = json.loads((Path(data_dir) / "states.json").read_text())
        positions = json.loads((Path(data_dir) / "positions.json").read_text())
        relations = json.loads((Path(data_dir) / "relations.json").read_text())

        for entry in sorted(identities, key=lambda e: e["id"]):
            aid = entry["id"]
            base = dict(self.package.constants.get("initial_state", {}))
            base.update(states.get(aid, {}))
            spec = AgentSpec(
                id=aid,
                profile=entry["profile"],
                initial_state=base,
                routine=self.package.routine,
                bindings=dict(self.runtime.bindings),
                meta={"cell": positions.get(aid, [0, 0]), "origin": "founder"},
            )
            self.pod_manager.place_agent(spec)
        for a, b, rtype, weight in relations:
            self.coordinator.route_env(
                "relation", "update", {"a": a, "b": b, "type": rtype, "weight": weight}, log=False
            )

    def _write_header(self) -> None:
        scenario_hash = self.package.scenario_hash()
        self.system.recorder.record(
            EventRecord.make(
                0,
                "config-change",
                SYSTEM,
                what="run-header",
                seed=self.config.master_seed,
                config=self.config.config_hash(scenario_hash),
                scenario=self.package.name,
                scenario_hash=scenario_hash,
                core=core_source_hash(),
                engine=self.config.engine.get("kind", "scripted"),
                ticks_per_day=self.ticks_per_day,
            )
        )

    # -- tick machinery ---------------------------------------------------------

    @property
    def tick(self) -> int:
        return self.system.timer.current

    def _tick_once(self) -> None:
        t = self.system.timer.current + 1
        for pod in self.pod_manager.pods().values():
            pod.begin_tick(t)
        self.stores.enter_tick()
        self.system.in_tick = True
        started = time.perf_counter()
        for aid, pid in self.pod_manager.global_order():
            self.pod_manager.pod(pid).execute_agent(aid, t)
        wall_ms = (time.perf_counter() - started) * 1000.0
        self.system.in_tick = False
        self.stores.exit_tick()
        self.pod_manager.commit_barrier(t)
        self.system.timer.advance_tick(self.pod_manager.pods().keys())
        if t % self.config.snapshot_cadence == 0:
            self._snapshot(t)
        self.system.recorder.flush_barrier()
        self._record_metrics(t, wall_ms)

    def _record_metrics(self, t: int, wall_ms: float) -> None:
        recorder = self.system.recorder
        recorder.metric("population", t, len(self.pod_manager.all_active()))
        recorder.metric("tick_wall_ms", t, round(wall_ms, 3))
        for stats in self.pod_manager.pod_stats():
            recorder.metric(f"pod_agents.{stats.pod}", t, stats.agent_count)

    def _snapshot(self, t: int) -> str:
        manifest = self.stores.snapshot_all(
            t, self.pod_manager.rng_states(), self.system.messager.capture()
        )
        self.snapshots.append((t, manifest.id))
        digest = self.stores.state_digest(exclude_plugins=("pod-manager",))
        self.system.recorder.record(EventRecord.make(t, "snapshot", SYSTEM, digest=digest[:16]))
        return manifest.id

    def _restore(self, sid: str) -> int:
        restored = self.stores.restore(sid)
        self.system.messager.restore(restored.queue_capture)
        self.pod_manager.rehydrate(restored.rng_states)
        self.system.timer.set_current(restored.tick)
        return restored.tick

    def snapshot_id_for_tick(self, tick: int) -> str:
        for t, sid in reversed(self.snapshots):
            if t == tick:
                return sid
        raise SnapshotNotFound(f"no snapshot at tick {tick}")

    # -- headless driving ----------------------------------------------------------

    def run_ticks(self, n: int) -> None:
        for _ in range(n):
            self._tick_once()

    def run_headless(self) -> dict[str, Any]:
        while self.system.timer.current < self.config.tick_limit:
            self._tick_once()
        return self.finalize()

    # -- control commands (thread-safe; applied at barriers) ------------------------

    def submit(self, name: str, payload: dict[str, Any] | None = None, timeout: float = 30.0) -> dict[str, Any]:
        reply: "queue.Queue" = queue.Queue(maxsize=1)
        self._commands.put((name, payload or {}, reply))
        try:
            return reply.get(timeout=timeout)
        except queue.Empty:
            return {"ok": False, "error": "command timed out"}

    def _process_commands(self, block: bool) -> None:
        while True:
            try:
                name, payload, reply = self._commands.get(block=block, timeout=0.1 if block else None)
            except queue.Empty:
                return
            try:
                value = self._apply_command(name, payload)
                reply.put({"ok": True, "value": value})
            except Exception as exc:
                reply.put({"ok": False, "error": str(exc), "state": self._state})
            block = False

    def _apply_command(self, name: str, payload: dict[str, Any]) -> Any:
        if name == "status":
            return self.status()
        if name == "pause":
            self._state = "paused"
            return {"state": self._state, "tick": self.tick}
        if name == "resume":
            if self._state == "done":
                raise CommandError("run already finished")
            self._state = "running"
            return {"state": self._state, "tick": self.tick}
        if name == "step":
            if self._state != "paused":
                raise CommandError(f"step requires paused state, currently {self._state}")
            n = int(payload.get("n", 1))
            self.run_ticks(n)
            return {"state": self._state, "tick": self.tick}
        if name == "dispatch":
            agent = payload["agent"]
            if not self.system.messager.has_mailbox(agent):
                raise CommandError(f"unknown agent {agent}")
            message = self.coordinator.route_send(SYSTEM, [agent], {"text": payload.get("text", "")})
            self.system.recorder.flush_barrier()
            return {"message_id": message.id, "deliver_tick": message.send_tick + 1}
        if name == "query":
            return self.query_agent(payload["agent"])
        if name == "rules":
            rules = [ValidationRule.from_doc(d) for d in payload.get("rules", [])]
            self.coordinator.set_rules(rules)
            self.system.recorder.flush_barrier()
            return {"count": len(rules)}
        if name == "broadcast":
            from .controller import GlobalEvent

            event = GlobalEvent(
                name=payload.get("name", "event"),
                payload=payload.get("payload", {}),
                target_filter=payload.get("filter", {}),
            )
            delivered = self.coordinator.broadcast(event)
            self.system.recorder.flush_barrier()
            return {"delivered": delivered}
        if name == "rollback":
            sid = payload.get("snapshot")
            if sid is None and "tick" in payload:
                sid = self.snapshot_id_for_tick(int(payload["tick"]))
            if sid is None:
                raise CommandError("rollback needs snapshot or tick")
            restored = self.coordinator.rollback(sid)
            return {"tick": restored}
        if name == "stop":
            self._alive = False
            return {"state": "stopping"}
        raise CommandError(f"unknown command {name!r}")

    def serve_loop(self) -> dict[str, Any]:
        """Drive ticks while serving barrier commands until stopped."""
        while self._alive:
            if self._state == "running" and self.system.timer.current < self.config.tick_limit:
                self._process_commands(block=False)
                if self._alive and self._state == "running":
                    self._tick_once()
                    if self.system.timer.current >= self.config.tick_limit:
                        self._state = "done"
            else:
                if self._state == "running":
                    self._state = "done"
                self._process_commands(block=True)
        return self.finalize()

    # -- queries -----------------------------------------------------------------

    def status(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "state": self._state,
            "population": len(self.pod_manager.all_active()),
            "tick_limit": self.config.tick_limit,
            "scenario": self.package.name,
            "seed": self.config.master_seed,
            "ticks_per_day": self.ticks_per_day,
            "pods": [s.to_doc() for s in self.pod_manager.pod_stats()],
        }

    def query_agent(self, aid: str) -> dict[str, Any]:
        profile = self.runtime.profile_plugin.load(aid)
        if profile is None:
            raise CommandError(f"unknown agent {aid}")
        alive = self.pod_manager.locate(aid) is not None
        recent = [e.to_line() for e in self.system.recorder.recent_events(aid)]
        return {
            "id": aid,
            "alive": alive,
            "pod": self.pod_manager.locate(aid),
            "profile": profile,
            "state": self.runtime.state_plugin.get(aid),
            "recent_events": recent,
        }

    # -- teardown -----------------------------------------------------------------

    def finalize(self) -> dict[str, Any]:
        self.system.recorder.flush_barrier()
        self.system.recorder.write_metric_csvs(self.out_dir / "metrics")
        events = self.system.recorder.events()
        births = sum(1 for e in events if e.kind == "birth")
        deaths = sum(1 for e in events if e.kind == "death")
        summary = {
            "final_tick": self.tick,
            "population": len(self.pod_manager.all_active()),
            "births": births,
            "deaths": deaths,
            "events": len(events),
            "pods": [s.to_doc() for s in self.pod_manager.pod_stats()],
            "scenario": self.package.name,
            "seed": self.config.master_seed,
        }
        (self.out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        self._teardown_transport()
        return summary

    def _teardown_transport(self) -> None:
        if self._cluster is None:
            return
        for pod in self.pod_manager.pods().values():
            if hasattr(pod, "shutdown"):
                pod.shutdown()
        for worker in self._workers:
            try:
                worker.wait(timeout=5)
            except Exception:
                worker.kill()
        self._cluster.close()
        self._cluster = None
