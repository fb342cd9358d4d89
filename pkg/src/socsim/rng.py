"""Deterministic counter-based random streams.

Each agent (and the system) owns one stream derived from the master seed and
its id. A stream's state is just (key, tick, index): the index resets at
every tick boundary, so replay after a rollback or under population churn is
stable, and the whole state serializes into a snapshot manifest as three
scalars.
"""
from __future__ import annotations

import hashlib
import struct
from typing import Any, Sequence


class RngStream:
    def __init__(self, key: bytes, tick: int = 0, index: int = 0):
        self._key = key
        self._tick = tick
        self._index = index

    @classmethod
    def derive(cls, master_seed: int | str, stream_id: str) -> "RngStream":
        key = hashlib.sha256(f"{master_seed}/{stream_id}".encode("utf-8")).digest()
        return cls(key)

    def begin_tick(self, tick: int) -> None:
        """Advance the stream to a tick; draws within a tick restart at 0."""
        if tick != self._tick:
            self._tick = tick
            self._index = 0

    def next_u64(self) -> int:
        block = hashlib.sha256(
            self._key + struct.pack(">qq", self._tick, self._index)
        ).digest()
        self._index += 1
        return struct.unpack(">Q", block[:8])[0]

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self.next_u64() / 2**64

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.next_u64() % (hi - lo + 1)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def choice(self, seq: Sequence[Any]) -> Any:
        if not seq:
            raise ValueError("empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def state_doc(self) -> dict[str, Any]:
        return {"key": self._key.hex(), "tick": self._tick, "index": self._index}

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "RngStream":
        return cls(bytes.fromhex(doc["key"]), int(doc["tick"]), int(doc["index"]))
