"""Shared identifiers, message/event records, and canonical ordering.

Every other module builds on these types. All of them are immutable values,
safe to copy between execution contexts. Identifiers are strings whose numeric
suffixes are zero-padded to width 8 so lexicographic order equals numeric
order; the reserved sender ``SYSTEM`` sorts before every agent id.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .canon import canon_json, escape_field, pad8, parse_kv_line, unescape_field

SYSTEM = "SYSTEM"

EVENT_KINDS = frozenset(
    {
        "action",
        "birth",
        "death",
        "message",
        "intercept",
        "snapshot",
        "config-change",
        "routine",
        "fault",
        "rollback",
        "stage",
        "warning",
    }
)

_RESERVED_ATTR_KEYS = frozenset({"tick", "kind", "subject"})


class KernelError(Exception):
    """Invalid construction of a kernel value."""


def agent_id(n: int) -> str:
    return f"a{pad8(n)}"


def pod_id(n: int) -> str:
    return f"p{pad8(n)}"


def snapshot_id(n: int) -> str:
    return f"s{pad8(n)}"


@dataclass(frozen=True)
class Message:
    """Addressed, tick-stamped payload; routed exclusively via the Controller."""

    id: str
    sender: str
    recipients: tuple[str, ...]
    payload: Any
    send_tick: int
    seq: int

    def __post_init__(self) -> None:
        if not self.recipients:
            raise KernelError("message recipients must be non-empty")
        if self.send_tick < 0 or self.seq < 0:
            raise KernelError("message tick/seq must be non-negative")

    def sort_key(self) -> tuple[int, str, int]:
        return (self.send_tick, self.sender, self.seq)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "sender": self.sender,
            "recipients": list(self.recipients),
            "payload": self.payload,
            "send_tick": self.send_tick,
            "seq": self.seq,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Message":
        return cls(
            id=doc["id"],
            sender=doc["sender"],
            recipients=tuple(doc["recipients"]),
            payload=doc["payload"],
            send_tick=int(doc["send_tick"]),
            seq=int(doc["seq"]),
        )


def canonical_order(a: Message, b: Message) -> int:
    """Total order by (send_tick, sender, seq); the determinism workhorse."""
    ka, kb = a.sort_key(), b.sort_key()
    return -1 if ka < kb else (1 if ka > kb else 0)


@dataclass(frozen=True)
class ActionRequest:
    """An agent's (or the system's) intent to run a named action."""

    caller: str
    action_name: str
    args: Mapping[str, Any] = field(default_factory=dict)
    tick: int = 0

    def __post_init__(self) -> None:
        if not self.action_name:
            raise KernelError("action_name must be non-empty")


@dataclass(frozen=True)
class ActionResult:
    """Outcome of an action: ok | denied | failed plus resulting state deltas.

    Denied results must carry the id of the rule that denied them.
    Each delta is (plugin, key, new value); deltas addressed to environment
    plugins are informational echoes of changes the environment already
    applied, deltas addressed to agent-side plugins are applied by the
    Controller in canonical request order.
    """

    status: str
    detail: str = ""
    state_deltas: tuple[tuple[str, str, Any], ...] = ()
    rule_id: str | None = None

    def __post_init__(self) -> None:
        if self.status not in ("ok", "denied", "failed"):
            raise KernelError(f"bad result status: {self.status}")
        if self.status == "denied" and not self.rule_id:
            raise KernelError("denied results must carry the denying rule id")

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class EventRecord:
    """One simulation event; the full log is the determinism witness.

    Serializes to one canonical line of key=value pairs (keys sorted, tab
    separated). Attribute values are stored as strings so a parsed record
    equals the record that produced the line.
    """

    tick: int
    kind: str
    subject: str
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise KernelError(f"unknown event kind: {self.kind}")
        if self.tick < 0:
            raise KernelError("event tick must be non-negative")
        for key, _ in self.attributes:
            if key in _RESERVED_ATTR_KEYS:
                raise KernelError(f"attribute key {key!r} is reserved")

    @classmethod
    def make(cls, tick: int, kind: str, subject: str, **attrs: Any) -> "EventRecord":
        items = tuple(sorted((k, _attr_str(v)) for k, v in attrs.items()))
        return cls(tick=tick, kind=kind, subject=subject, attributes=items)

    def attr(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.attributes:
            if k == key:
                return v
        return default

    def to_line(self) -> str:
        fields = {"tick": pad8(self.tick), "kind": self.kind, "subject": self.subject}
        fields.update(dict(self.attributes))
        return "\t".join(f"{k}={escape_field(v)}" for k, v in sorted(fields.items()))

    @classmethod
    def from_line(cls, line: str) -> "EventRecord":
        fields = parse_kv_line(line)
        tick = int(fields.pop("tick"))
        kind = fields.pop("kind")
        subject = fields.pop("subject")
        return cls(tick=tick, kind=kind, subject=subject, attributes=tuple(sorted(fields.items())))


def _attr_str(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value) if isinstance(value, float) else str(value)
    return canon_json(value)


_POD_PREFIX_RE = re.compile(r"\bp\d{8}/")


def normalize_pod_prefixes(line: str) -> str:
    """Strip pod prefixes from message ids.

    Message ids are "<pod>/<tick>-<sender>-<seq>"; the suffix is a pure
    function of content, so normalized lines are identical across pod
    layouts. Canonical event ordering uses the normalized form.
    """
    return _POD_PREFIX_RE.sub("", line)


def unescape(value: str) -> str:  # re-exported for log tooling
    return unescape_field(value)
