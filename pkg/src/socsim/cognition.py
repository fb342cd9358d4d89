"""Cognitive-engine boundary: one completion contract, two engines.

The scripted engine is a pure function of (context, agent RNG stream): a
scenario-supplied utility table scores every behavior against the agent's
state, the top three scores become weighted candidates, and one is sampled in
proportion to its weight. The remote engine speaks the de-facto
chat-completion HTTP schema (model, messages, temperature). Both produce plan
text in the same grammar, one action call per line::

    name(key=value, key=(3,4), other="text")

Parsing is deliberately lenient: unknown action names and malformed lines are
skipped with a warning, and an empty parse degrades to a single ``idle()``.
"""
from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Callable

from .rng import RngStream


class EngineFault(Exception):
    pass


@dataclass
class PromptContext:
    """Everything a cognitive engine may see; nothing from other agents' stores."""

    agent_id: str
    tick: int
    day: int
    hour: float
    profile: dict[str, Any]
    state: dict[str, Any]
    perception: dict[str, Any]
    reflections: list[str] = field(default_factory=list)
    actions: list[dict[str, Any]] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "tick": self.tick,
            "day": self.day,
            "hour": self.hour,
            "profile": self.profile,
            "state": self.state,
            "perception": self.perception,
            "reflections": self.reflections,
            "actions": self.actions,
        }


@dataclass(frozen=True)
class PlanCandidate:
    text: str
    weight: float

    def to_doc(self) -> dict[str, Any]:
        return {"text": self.text, "weight": self.weight}


def select_candidate(cands: list[PlanCandidate], rng: RngStream) -> PlanCandidate:
    """Sample one candidate with probability weight_i / sum(weights)."""
    if not cands:
        raise ValueError("no candidates")
    total = sum(c.weight for c in cands)
    if total <= 0:
        raise ValueError("candidate weights must sum to a positive value")
    u = rng.random() * total
    acc = 0.0
    for cand in cands:
        acc += cand.weight
        if u < acc:
            return cand
    return cands[-1]


# ---------------------------------------------------------------------------
# Plan grammar
# ---------------------------------------------------------------------------

_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")


def _split_args(body: str) -> list[str]:
    parts, depth, token, quote = [], 0, [], None
    for ch in body:
        if quote:
            token.append(ch)
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            token.append(ch)
        elif ch in "([":
            depth += 1
            token.append(ch)
        elif ch in ")]":
            depth -= 1
            token.append(ch)
        elif ch == "," and depth == 0:
            parts.append("".join(token).strip())
            token = []
        else:
            token.append(ch)
    tail = "".join(token).strip()
    if tail:
        parts.append(tail)
    return parts


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    if raw.startswith("(") and raw.endswith(")"):
        return [_parse_value(p) for p in _split_args(raw[1:-1])]
    if raw.startswith("[") and raw.endswith("]"):
        return [_parse_value(p) for p in _split_args(raw[1:-1])]
    if len(raw) >= 2 and raw[0] in "\"'" and raw[-1] == raw[0]:
        return raw[1:-1]
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if not re.fullmatch(r"[\w.+-]+", raw):
        raise ValueError(f"bad bare token {raw!r}")
    return raw


def parse_plan(text: str, known_actions: set[str]) -> tuple[list[tuple[str, dict[str, Any]]], list[str]]:
    """Lenient parse: returns ([(action, args)...], warnings).

    Never emits an action absent from ``known_actions``; an empty result
    degrades to a single idle().
    """
    parsed: list[tuple[str, dict[str, Any]]] = []
    warnings: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _LINE_RE.match(line)
        if not m:
            warnings.append(f"malformed line: {line.strip()[:60]}")
            continue
        name, body = m.group(1), m.group(2)
        if name not in known_actions:
            warnings.append(f"unknown action: {name}")
            continue
        args: dict[str, Any] = {}
        bad = False
        for part in _split_args(body):
            key, eq, raw = part.partition("=")
            if not eq or not key.strip().isidentifier():
                warnings.append(f"malformed argument in {name}: {part[:40]}")
                bad = True
                break
            try:
                args[key.strip()] = _parse_value(raw)
            except ValueError:
                warnings.append(f"malformed argument in {name}: {part[:40]}")
                bad = True
                break
        if bad:
            continue
        parsed.append((name, args))
    if not parsed:
        parsed = [("idle", {})]
    return parsed, warnings


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------

UtilityTable = Callable[[PromptContext], list[PlanCandidate]]


class ScriptedEngine:
    """Deterministic engine: utility-scored candidates, seeded sampling."""

    kind = "scripted"

    def __init__(self, utility_table: UtilityTable, top_n: int = 3):
        self._table = utility_table
        self.top_n = top_n

    def candidates(self, ctx: PromptContext) -> list[PlanCandidate]:
        scored = [c for c in self._table(ctx) if c.weight > 0]
        scored.sort(key=lambda c: (-c.weight, c.text))
        top = scored[: self.top_n]
        if not top:
            top = [PlanCandidate("idle()", 1.0)]
        return top

    def complete_with_candidates(
        self, ctx: PromptContext, rng: RngStream
    ) -> tuple[str, list[PlanCandidate]]:
        cands = self.candidates(ctx)
        chosen = select_candidate(cands, rng)
        return chosen.text, cands

    def complete(self, ctx: PromptContext, rng: RngStream) -> str:
        return self.complete_with_candidates(ctx, rng)[0]


class RemoteEngine:
    """Chat-completion client; any transport problem raises EngineFault."""

    kind = "remote"

    def __init__(self, endpoint: str, model: str, timeout: float = 30.0, temperature: float = 0.7):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.temperature = temperature

    def _messages(self, ctx: PromptContext) -> list[dict[str, str]]:
        actions = ", ".join(a["name"] for a in ctx.actions)
        system = (
            "You control one agent in a social simulation. Reply with a plan: "
            "one action call per line, e.g. move(to=(3,4)). "
            f"Available actions: {actions}."
        )
        user = json.dumps(
            {
                "profile": ctx.profile,
                "state": ctx.state,
                "perception": ctx.perception,
                "reflections": ctx.reflections[-5:],
                "day": ctx.day,
                "hour": ctx.hour,
            },
            sort_keys=True,
        )
        return [{"role": "system", "content": system}, {"role": "user", "content": user}]

    def complete(self, ctx: PromptContext, rng: RngStream) -> str:
        body = json.dumps(
            {
                "model": self.model,
                "messages": self._messages(ctx),
                "temperature": self.temperature,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            f"{self.endpoint}/v1/chat/completions",
            data=body,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
            return doc["choices"][0]["message"]["content"]
        except (urllib.error.URLError, OSError, KeyError, IndexError, json.JSONDecodeError) as exc:
            raise EngineFault(str(exc)) from exc

    def complete_with_candidates(
        self, ctx: PromptContext, rng: RngStream
    ) -> tuple[str, list[PlanCandidate]]:
        text = self.complete(ctx, rng)
        return text, [PlanCandidate(text, 1.0)]
