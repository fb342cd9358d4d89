"""Cross-module paths: conflicts through full plans, remote engines, privacy."""
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from socsim.config import SimulationConfig
from socsim.kernel import EventRecord, agent_id
from socsim.services import Recorder
from socsim.simulation import Simulation

SCENARIO = Path("scenario/universe25")


class TestMovementConflict:
    """Two agents whose plans target the same capacity-1 cell in one tick."""

    def test_canonically_first_requester_wins(self, tmp_path):
        from tests.conftest import World
        from socsim.cognition import PlanCandidate, ScriptedEngine

        map_doc = {
            "width": 6,
            "height": 6,
            "cell_capacity": 1,
            "regions": {},
            "static_objects": [{"name": "hopper", "cell": [3, 3], "attributes": {"kind": "food_hopper"}}],
        }
        catalog = [
            {"name": "eat", "owner": "other", "category": "survival",
             "params": {"target_kind": "food_hopper", "range": 0, "approach_step": 1}},
        ]
        # both agents always plan to reach the hopper cell itself
        engine = ScriptedEngine(lambda ctx: [PlanCandidate("eat()", 1.0)])
        w = World(tmp_path, map_doc=map_doc, catalog=catalog, engine=engine)
        w.add_agent(1, cell=(3, 2))  # both one step away
        w.add_agent(2, cell=(3, 4))
        w.commit(0)
        w.manager.run_tick(1)
        positions = w.space.agent_positions()
        # canonical order executes a00000001 first: it takes the cell
        assert positions[agent_id(1)] == [3, 3]
        assert positions[agent_id(2)] != [3, 3]


class TestRecorderOrdering:
    @settings(max_examples=25, deadline=None)
    @given(perm=st.permutations(list(range(12))))
    def test_flush_order_is_permutation_invariant(self, perm):
        base = [
            EventRecord.make(2, "action", agent_id(i % 4), action=f"op{i}", status="ok")
            for i in range(12)
        ]
        recorder = Recorder()
        for i in perm:
            recorder.record(base[i])
        flushed = [e.to_line() for e in recorder.flush_barrier()]
        assert flushed == sorted(e.to_line() for e in base)


class TestCampusReplay:
    def test_campus_runs_are_byte_identical(self, tmp_path):
        logs = []
        for sub in ("a", "b"):
            cfg = SimulationConfig.load("scenario/campus_mini/smoke_run.json")
            cfg.out_dir = tmp_path / sub
            cfg.tick_limit = 8
            Simulation(cfg).run_headless()
            logs.append((tmp_path / sub / "events.log").read_bytes())
        assert logs[0] == logs[1]


class _FixedPlanHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        self.rfile.read(length)
        reply = {"choices": [{"message": {"content": "eat()"}}]}
        body = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


class TestRemoteEngineRun:
    def test_full_run_with_remote_engine(self, tmp_path):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _FixedPlanHandler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
            cfg.out_dir = tmp_path / "remote"
            cfg.tick_limit = 3
            cfg.engine = {
                "kind": "remote",
                "endpoint": f"http://127.0.0.1:{server.server_port}",
                "model": "stub",
                "timeout": 5,
            }
            sim = Simulation(cfg)
            sim.run_headless()
            events = sim.system.recorder.events()
            eats = [e for e in events if e.kind == "action" and e.attr("action") == "eat"]
            assert len(eats) == 24  # 8 mice x 3 ticks, all following the stub plan
            header = events[0]
            assert header.attr("engine") == "remote"
        finally:
            server.shutdown()

    def test_unreachable_engine_degrades_to_idle(self, tmp_path):
        cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
        cfg.out_dir = tmp_path / "downed"
        cfg.tick_limit = 2
        cfg.engine = {"kind": "remote", "endpoint": "http://127.0.0.1:9", "model": "x", "timeout": 0.2}
        sim = Simulation(cfg)
        sim.run_headless()
        events = sim.system.recorder.events()
        # every agent substituted idle() and recorded the engine fault
        idles = [e for e in events if e.kind == "action" and e.attr("action") == "idle"]
        faults = [e for e in events if e.kind == "fault" and e.attr("stage") == "engine"]
        routines = [e for e in events if e.kind == "routine"]
        assert len(idles) == 16 and len(faults) == 16
        assert len(routines) == 16  # the run never aborts


class TestLogProperties:
    def test_tick_nondecreasing_except_across_rollback(self, tmp_path):
        cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
        cfg.out_dir = tmp_path / "mono"
        cfg.tick_limit = 48
        sim = Simulation(cfg)
        sim.run_ticks(40)
        sim.coordinator.rollback(sim.snapshot_id_for_tick(16))
        sim.run_ticks(8)
        sim.finalize()
        previous = 0
        for line in (tmp_path / "mono" / "events.log").read_text().splitlines():
            record = EventRecord.from_line(line)
            if record.kind == "rollback":
                previous = record.tick
                continue
            assert record.tick >= previous, line
            previous = record.tick

    def test_header_tracks_seed_but_not_pod_count(self, tmp_path):
        def header(sub, seed, pods):
            cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
            cfg.out_dir = tmp_path / sub
            cfg.tick_limit = 0
            cfg.master_seed = seed
            cfg.pods = pods
            Simulation(cfg).run_headless()
            return (tmp_path / sub / "events.log").read_text().splitlines()[0]

        base = header("h1", 1, 1)
        assert header("h2", 1, 4) == base  # deployment-only knob
        assert header("h3", 2, 1) != base  # reproducibility input

    def test_snapshot_cadence(self, tmp_path):
        cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
        cfg.out_dir = tmp_path / "cadence"
        cfg.tick_limit = 0
        cfg.snapshot_cadence = 8
        sim = Simulation(cfg)
        sim.run_ticks(25)
        assert [t for t, _ in sim.snapshots] == [0, 8, 16, 24]


class TestPromptPrivacy:
    def test_context_exposes_only_own_state_and_scent_cues(self, tmp_path):
        cfg = SimulationConfig.load(SCENARIO / "reference_run.json")
        cfg.out_dir = tmp_path / "privacy"
        cfg.tick_limit = 0
        sim = Simulation(cfg)
        captured = {}
        plan = sim.runtime.plugin_registry["plan"]
        original = plan.build_context

        def spy(ctx):
            prompt = original(ctx)
            captured[ctx.agent] = (prompt, sim.runtime.state_plugin.get(ctx.agent))
            return prompt

        plan.build_context = spy
        sim.run_ticks(1)
        for aid, (prompt, own_state_then) in captured.items():
            assert prompt.agent_id == aid
            assert prompt.state == own_state_then
            for entity in prompt.perception["nearby"]:
                if entity["kind"] != "agent":
                    continue
                # scent cues only; never another agent's state vector
                assert set(entity) <= {"id", "kind", "cell", "distance", "gender", "stage", "receptive"}
