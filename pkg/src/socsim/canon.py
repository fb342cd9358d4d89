"""Canonical serialization and hashing shared by records, stores, and snapshots."""
from __future__ import annotations

import hashlib
import json
from typing import Any


def canon_json(value: Any) -> str:
    """Deterministic JSON: sorted keys, no whitespace, ASCII only."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest_value(value: Any) -> str:
    """Content hash of any JSON-able value via its canonical form."""
    return sha256_hex(canon_json(value))


def escape_field(value: str) -> str:
    """Escape a value for one-line key=value records (tab/newline free)."""
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def unescape_field(value: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def kv_line(fields: dict[str, str]) -> str:
    """One canonical line: key=value pairs, keys sorted, tab separated."""
    return "\t".join(f"{k}={escape_field(str(v))}" for k, v in sorted(fields.items()))


def parse_kv_line(line: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for part in line.rstrip("\n").split("\t"):
        key, _, raw = part.partition("=")
        fields[key] = unescape_field(raw)
    return fields


def pad8(n: int) -> str:
    """Zero-pad a numeric suffix so lexicographic order equals numeric order."""
    return f"{n:08d}"
