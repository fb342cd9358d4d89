"""Timer barrier, simtime mapping, mailbox delivery, recorder semantics."""
import pytest

from socsim.kernel import EventRecord, Message, agent_id
from socsim.services import BarrierViolation, Recorder, System, Timer


def make_system(ticks_per_day=48, log_path=None):
    return System.bootstrap(ticks_per_day, log_path)


def send(messager, sender, recipients, tick, seq=None, payload="hi"):
    seq = messager.next_seq(sender, tick) if seq is None else seq
    m = Message(
        id=f"p00000000/{tick:08d}-{sender}-{seq:04d}",
        sender=sender,
        recipients=tuple(recipients),
        payload=payload,
        send_tick=tick,
        seq=seq,
    )
    messager.send(m)
    return m


class TestTimer:
    def test_all_pods_report_advances(self):
        t = Timer()
        for p in ("p1", "p2", "p3", "p4"):
            t.register_pod(p)
        assert t.advance_tick(["p1", "p2", "p3", "p4"]) == 1

    def test_missing_report_refused(self):
        t = Timer()
        for p in ("p1", "p2", "p3", "p4"):
            t.register_pod(p)
        with pytest.raises(BarrierViolation):
            t.advance_tick(["p1", "p2", "p3"])

    def test_induction(self):
        t = Timer()
        t.register_pod("p1")
        for _ in range(10):
            t.advance_tick(["p1"])
        assert t.current == 10

    def test_simtime_full_day(self):
        assert Timer(ticks_per_day=48).tick_to_simtime(48) == (1, 0.0)

    def test_simtime_week(self):
        assert Timer(ticks_per_day=48).tick_to_simtime(336) == (7, 0.0)

    def test_simtime_zero(self):
        assert Timer(ticks_per_day=48).tick_to_simtime(0) == (0, 0.0)

    def test_simtime_fraction(self):
        day, hour = Timer(ticks_per_day=24).tick_to_simtime(30)
        assert day == 1 and hour == 6.0


class TestMessager:
    def test_next_tick_delivery(self):
        system = make_system()
        system.messager.open_mailbox("a")
        m = send(system.messager, "b", ["a"], tick=5)
        assert system.messager.drain("a", 5) == []
        drained = system.messager.drain("a", 6)
        assert [d.id for d in drained] == [m.id]

    def test_exactly_once(self):
        system = make_system()
        system.messager.open_mailbox("a")
        send(system.messager, "b", ["a"], tick=1)
        assert len(system.messager.drain("a", 2)) == 1
        assert system.messager.drain("a", 2) == []
        assert system.messager.drain("a", 3) == []

    def test_unknown_recipient_dead_letters(self):
        system = make_system()
        send(system.messager, "b", ["ghost"], tick=1)
        events = system.recorder.flush_barrier()
        assert any(e.kind == "message" and e.attr("status") == "dead-letter" for e in events)

    def test_sealed_recipient_dead_letters(self):
        system = make_system()
        system.messager.open_mailbox("a")
        system.messager.seal_mailbox("a")
        send(system.messager, "b", ["a"], tick=1)
        events = system.recorder.flush_barrier()
        assert any(e.attr("status") == "dead-letter" for e in events)

    def test_drain_order_matches_canonical_sort(self):
        system = make_system()
        system.messager.open_mailbox("inbox")
        senders = [agent_id(3), agent_id(1), agent_id(2)]
        sent = []
        for sender in senders:
            for _ in range(10):
                sent.append(send(system.messager, sender, ["inbox"], tick=1))
        drained = system.messager.drain("inbox", 2)
        oracle = sorted(sent, key=lambda m: (m.send_tick, m.sender, m.seq))
        assert [m.id for m in drained] == [m.id for m in oracle]

    def test_capture_restore_round_trip(self):
        system = make_system()
        system.messager.open_mailbox("a")
        send(system.messager, "b", ["a"], tick=3)
        captured = system.messager.capture()
        system.messager.drain("a", 4)
        system.messager.restore(captured)
        assert len(system.messager.drain("a", 4)) == 1


class TestRecorder:
    def test_five_events_for_tick(self):
        r = Recorder()
        for i in range(5):
            r.record(EventRecord.make(2, "action", agent_id(i), action="eat", status="ok"))
        batch = r.flush_barrier()
        assert len(batch) == 5
        assert all(e.tick == 2 for e in batch)

    def test_flush_sorts_canonically(self):
        r = Recorder()
        r.record(EventRecord.make(1, "action", agent_id(2), action="z"))
        r.record(EventRecord.make(1, "action", agent_id(1), action="a"))
        batch = r.flush_barrier()
        assert [e.subject for e in batch] == [agent_id(1), agent_id(2)]

    def test_population_counting_oracle(self):
        # population = base + births - deaths, derived purely from the log
        r = Recorder()
        base = 8
        for i in range(2):
            r.record(EventRecord.make(3, "birth", agent_id(10 + i)))
        r.record(EventRecord.make(3, "death", agent_id(0), cause="natural"))
        events = r.flush_barrier()
        births = sum(1 for e in events if e.kind == "birth")
        deaths = sum(1 for e in events if e.kind == "death")
        assert base + births - deaths == 9

    def test_metric_series_and_query(self):
        r = Recorder()
        for t in range(5):
            r.metric("population", t, 8 + t)
        series = r.query_metrics("population", 1, 3)
        assert series.points == [(1, 9), (2, 10), (3, 11)]

    def test_unknown_metric_empty(self):
        assert Recorder().query_metrics("nope").points == []

    def test_metric_rewind_truncates(self):
        r = Recorder()
        for t in range(10):
            r.metric("population", t, t)
        r.metric("population", 4, 99)
        points = dict(r.query_metrics("population").points)
        assert points[4] == 99
        assert max(points) == 4

    def test_log_file_append(self, tmp_path):
        path = tmp_path / "events.log"
        r = Recorder(path)
        r.record(EventRecord.make(0, "config-change", "SYSTEM", seed="1"))
        r.flush_barrier()
        r.record(EventRecord.make(1, "routine", agent_id(0), steps="5"))
        r.flush_barrier()
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert EventRecord.from_line(lines[0]).kind == "config-change"

    def test_metric_csv(self, tmp_path):
        r = Recorder()
        r.metric("population", 0, 8)
        r.metric("population", 1, 9)
        (written,) = r.write_metric_csvs(tmp_path / "metrics")
        assert written.read_text().splitlines() == ["tick,value", "0,8", "1,9"]
