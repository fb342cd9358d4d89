"""Global singleton services: Timer, Messager, Recorder, and their locator.

The Timer drives simulation time through a tick barrier: it refuses to
advance until every registered pod has reported completion of the current
tick. The Messager queues messages into per-agent mailboxes with next-tick
delivery (a send at tick t is drainable from t+1), dead-lettering sends to
unknown or sealed recipients instead of dropping them. The Recorder buffers
events per tick, canonically sorts them at the barrier, and appends them to
``events.log``; metric series go to ``metrics/<name>.csv``.
"""
from __future__ import annotations

import csv
import threading
from pathlib import Path
from typing import Any, Callable, Iterable

from .kernel import EventRecord, Message, normalize_pod_prefixes


class BarrierViolation(Exception):
    pass


class Timer:
    """Tick source; advances only at a complete barrier."""

    def __init__(self, ticks_per_day: int = 48):
        if ticks_per_day <= 0:
            raise ValueError("ticks_per_day must be positive")
        self.current = 0
        self.ticks_per_day = ticks_per_day
        self._pods: set[str] = set()

    def register_pod(self, pod: str) -> None:
        self._pods.add(pod)

    def unregister_pod(self, pod: str) -> None:
        self._pods.discard(pod)

    @property
    def registered_pods(self) -> frozenset[str]:
        return frozenset(self._pods)

    def advance_tick(self, barrier_report: Iterable[str]) -> int:
        reported = set(barrier_report)
        missing = self._pods - reported
        if missing:
            raise BarrierViolation(f"missing pod reports: {sorted(missing)}")
        self.current += 1
        return self.current

    def tick_to_simtime(self, t: int) -> tuple[int, float]:
        """Map a tick to (day, hour fraction)."""
        day = t // self.ticks_per_day
        hour = 24.0 * (t % self.ticks_per_day) / self.ticks_per_day
        return day, hour

    def set_current(self, tick: int) -> None:
        self.current = tick


def tick_to_simtime(t: int, ticks_per_day: int) -> tuple[int, float]:
    return Timer(ticks_per_day=ticks_per_day).tick_to_simtime(t)


class Mailbox:
    def __init__(self, owner: str):
        self.owner = owner
        self.pending: list[Message] = []
        self.sealed = False

    def push(self, m: Message) -> None:
        self.pending.append(m)
        self.pending.sort(key=Message.sort_key)

    def drain(self, tick: int) -> list[Message]:
        """Atomically remove and return everything deliverable at ``tick``."""
        ready = [m for m in self.pending if m.send_tick < tick]
        self.pending = [m for m in self.pending if m.send_tick >= tick]
        return ready


class Messager:
    """Queued delivery into per-agent mailboxes; all sends arrive via the Controller."""

    def __init__(self, recorder: "Recorder"):
        self._boxes: dict[str, Mailbox] = {}
        self._recorder = recorder
        self._seq: dict[tuple[str, int], int] = {}

    def open_mailbox(self, owner: str) -> None:
        if owner not in self._boxes:
            self._boxes[owner] = Mailbox(owner)

    def seal_mailbox(self, owner: str) -> None:
        box = self._boxes.get(owner)
        if box:
            box.sealed = True

    def has_mailbox(self, owner: str) -> bool:
        box = self._boxes.get(owner)
        return box is not None and not box.sealed

    def next_seq(self, sender: str, tick: int) -> int:
        key = (sender, tick)
        seq = self._seq.get(key, 0)
        self._seq[key] = seq + 1
        return seq

    def send(self, m: Message) -> bool:
        """Enqueue to every recipient; unknown recipients dead-letter."""
        delivered = False
        for recipient in m.recipients:
            box = self._boxes.get(recipient)
            if box is None or box.sealed:
                self._recorder.record(
                    EventRecord.make(
                        m.send_tick,
                        "message",
                        m.sender,
                        status="dead-letter",
                        id=m.id,
                        to=recipient,
                    )
                )
                continue
            box.push(m)
            delivered = True
        return delivered

    def drain(self, owner: str, tick: int) -> list[Message]:
        box = self._boxes.get(owner)
        if box is None:
            return []
        return box.drain(tick)

    # -- snapshot support ----------------------------------------------------

    def capture(self) -> dict[str, Any]:
        return {
            "boxes": {
                owner: {
                    "sealed": box.sealed,
                    "pending": [m.to_doc() for m in box.pending],
                }
                for owner, box in sorted(self._boxes.items())
            }
        }

    def restore(self, capture: dict[str, Any]) -> None:
        self._boxes.clear()
        self._seq.clear()
        for owner, doc in capture.get("boxes", {}).items():
            box = Mailbox(owner)
            box.sealed = bool(doc["sealed"])
            for mdoc in doc["pending"]:
                box.pending.append(Message.from_doc(mdoc))
            box.pending.sort(key=Message.sort_key)
            self._boxes[owner] = box


class MetricSeries:
    def __init__(self, name: str):
        self.name = name
        self.points: list[tuple[int, float]] = []

    def add(self, tick: int, value: float) -> None:
        # Rewind support: a rollback may re-record ticks; truncate forward
        # points so ticks stay strictly increasing on the current timeline.
        while self.points and self.points[-1][0] >= tick:
            self.points.pop()
        self.points.append((tick, value))

    def slice(self, lo: int, hi: int) -> list[tuple[int, float]]:
        return [(t, v) for t, v in self.points if lo <= t <= hi]


class Recorder:
    """Per-event log plus derived metric series.

    Events recorded during a tick are buffered in arrival order, then sorted
    by their canonical line at the barrier, which makes the persisted order
    independent of intra-tick scheduling. The log file is append-only and is
    deliberately not restored by rollback.
    """

    def __init__(self, log_path: Path | None = None):
        self._log_path = Path(log_path) if log_path else None
        self._buffer: list[EventRecord] = []
        self._flushed: list[EventRecord] = []
        self._metrics: dict[str, MetricSeries] = {}
        # subscriber callbacks take (channel, payload): channel is "event"
        # (canonical record line) or "metric" (name/tick/value line)
        self._subscribers: list[tuple[Callable[[str, str], None], object]] = []
        self._lock = threading.Lock()
        if self._log_path:
            self._log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_path.write_text("")

    def record(self, e: EventRecord) -> None:
        self._buffer.append(e)

    def flush_barrier(self) -> list[EventRecord]:
        """Sort the tick's buffered events canonically and persist them.

        The sort key is the pod-normalized line, so persisted order is
        independent of both intra-tick scheduling and pod layout.
        """
        batch = sorted(self._buffer, key=lambda e: (e.tick, normalize_pod_prefixes(e.to_line())))
        self._buffer = []
        self._flushed.extend(batch)
        if self._log_path and batch:
            with open(self._log_path, "a") as fh:
                for e in batch:
                    fh.write(e.to_line() + "\n")
        if batch:
            with self._lock:
                for push, _ in self._subscribers:
                    for e in batch:
                        push("event", e.to_line())
        return batch

    def metric(self, name: str, tick: int, value: float) -> None:
        series = self._metrics.setdefault(name, MetricSeries(name))
        series.add(tick, value)
        with self._lock:
            for push, _ in self._subscribers:
                push("metric", f"name={name}\ttick={tick}\tvalue={value}")

    def query_metrics(self, name: str, lo: int = 0, hi: int = 2**60) -> MetricSeries:
        series = MetricSeries(name)
        found = self._metrics.get(name)
        if found:
            series.points = found.slice(lo, hi)
        return series

    def metric_names(self) -> list[str]:
        return sorted(self._metrics)

    def events(self) -> list[EventRecord]:
        return list(self._flushed)

    def recent_events(self, subject: str, limit: int = 20) -> list[EventRecord]:
        hits = [e for e in self._flushed if e.subject == subject]
        return hits[-limit:]

    def subscribe(self, push: Callable[[str, str], None], token: object) -> None:
        with self._lock:
            self._subscribers.append((push, token))

    def unsubscribe(self, token: object) -> None:
        with self._lock:
            self._subscribers = [(p, t) for p, t in self._subscribers if t is not token]

    def write_metric_csvs(self, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in self.metric_names():
            path = out_dir / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["tick", "value"])
                for tick, value in self._metrics[name].points:
                    writer.writerow([tick, value])
            written.append(path)
        return written


class System:
    """Service locator handed to every Controller."""

    def __init__(self, timer: Timer, messager: Messager, recorder: Recorder):
        self.timer = timer
        self.messager = messager
        self.recorder = recorder
        # True while agent routines run; barriers (and boot) clear it so
        # barrier-injected messages stamp the completed tick.
        self.in_tick = True

    @classmethod
    def bootstrap(cls, ticks_per_day: int, log_path: Path | None = None) -> "System":
        recorder = Recorder(log_path)
        return cls(Timer(ticks_per_day), Messager(recorder), recorder)

    def population_metric(self) -> str:
        return "population"
