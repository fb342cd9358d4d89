"""Database-per-plugin storage with whole-simulation snapshot and restore.

Each plugin receives injected :class:`AdapterHandle` objects over a namespace
``(pod, plugin, store)`` it alone owns; cross-namespace reads are impossible
through a handle. Snapshots capture every namespace plus the RNG streams,
pending message queues, and timer state, and verify content digests on
restore.

File backing writes one append-only log per namespace under
``data/<pod>/<plugin>/<store>.log`` (length-prefixed JSON records). Snapshots
live under ``snapshots/<id>/`` mirroring namespaces, with a ``manifest`` file
in the canonical key=value line format.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .canon import canon_json, digest_value, kv_line, parse_kv_line
from .kernel import snapshot_id

Namespace = tuple[str, str, str]  # (pod, plugin, store)


class PersistenceError(Exception):
    pass


class DuplicateNamespace(PersistenceError):
    pass


class ClosedHandleError(PersistenceError):
    pass


class SnapshotNotFound(PersistenceError):
    pass


class SnapshotCorrupt(PersistenceError):
    pass


class BarrierViolation(PersistenceError):
    pass


def ns_name(ns: Namespace) -> str:
    return "/".join(ns)


class KvStore:
    """In-memory key-value store with canonical digests."""

    def __init__(self) -> None:
        self._data: dict[str, Any] = {}

    def put(self, key: str, value: Any) -> None:
        self._data[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def contains(self, key: str) -> bool:
        return key in self._data

    def delete(self, key: str) -> bool:
        return self._data.pop(key, _MISSING) is not _MISSING

    def scan_prefix(self, prefix: str) -> list[str]:
        return sorted(k for k in self._data if k.startswith(prefix))

    def items(self) -> Iterator[tuple[str, Any]]:
        return iter(sorted(self._data.items()))

    def clear(self) -> None:
        self._data.clear()

    def load(self, data: dict[str, Any]) -> None:
        self._data = dict(data)

    def to_doc(self) -> dict[str, Any]:
        return dict(self._data)

    def digest(self) -> str:
        return digest_value(self._data)

    def __len__(self) -> int:
        return len(self._data)


_MISSING = object()


class FileKvStore(KvStore):
    """KvStore backed by an append-only, length-prefixed operation log."""

    def __init__(self, path: Path):
        super().__init__()
        self._path = path
        self._path.parent.mkdir(parents=True, exist_ok=True)
        if self._path.exists():
            self._replay()
        self._fh = open(self._path, "ab")

    def _replay(self) -> None:
        with open(self._path, "rb") as fh:
            while True:
                header = fh.read(4)
                if len(header) < 4:
                    break
                (length,) = struct.unpack(">I", header)
                body = fh.read(length)
                if len(body) < length:
                    break  # torn tail record; ignore
                op = json.loads(body)
                if op["op"] == "put":
                    super().put(op["k"], op["v"])
                elif op["op"] == "delete":
                    super().delete(op["k"])
                elif op["op"] == "load":
                    super().load(op["data"])

    def _append(self, op: dict[str, Any]) -> None:
        body = canon_json(op).encode("utf-8")
        self._fh.write(struct.pack(">I", len(body)) + body)
        self._fh.flush()

    def put(self, key: str, value: Any) -> None:
        super().put(key, value)
        self._append({"op": "put", "k": key, "v": value})

    def delete(self, key: str) -> bool:
        existed = super().delete(key)
        if existed:
            self._append({"op": "delete", "k": key})
        return existed

    def load(self, data: dict[str, Any]) -> None:
        super().load(data)
        self._append({"op": "load", "data": data})

    def clear(self) -> None:
        self.load({})


class AdapterHandle:
    """A plugin's injected view over exactly one namespace."""

    def __init__(self, namespace: Namespace, kind: str, store: KvStore):
        self.namespace = namespace
        self.kind = kind
        self._store = store
        self._closed = False

    def _live(self) -> KvStore:
        if self._closed:
            raise ClosedHandleError(f"handle over {ns_name(self.namespace)} is closed")
        return self._store

    def kv_put(self, key: str, value: Any) -> None:
        self._live().put(key, value)

    def kv_get(self, key: str, default: Any = None) -> Any:
        return self._live().get(key, default)

    def kv_contains(self, key: str) -> bool:
        return self._live().contains(key)

    def kv_delete(self, key: str) -> bool:
        return self._live().delete(key)

    def kv_scan_prefix(self, prefix: str) -> list[str]:
        return self._live().scan_prefix(prefix)

    def close(self) -> None:
        self._closed = True


@dataclass
class SnapshotManifest:
    id: str
    tick: int
    namespace_digests: dict[str, str]
    rng_digest: str
    queue_digest: str
    timer_state: int

    def to_lines(self) -> str:
        fields: dict[str, str] = {
            "id": self.id,
            "tick": str(self.tick),
            "timer_state": str(self.timer_state),
            "rng": self.rng_digest,
            "queues": self.queue_digest,
        }
        for name, digest in self.namespace_digests.items():
            fields[f"ns.{name}"] = digest
        return "\n".join(kv_line({k: v}) for k, v in sorted(fields.items())) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SnapshotManifest":
        fields: dict[str, str] = {}
        for line in text.splitlines():
            if line:
                fields.update(parse_kv_line(line))
        digests = {k[3:]: v for k, v in fields.items() if k.startswith("ns.")}
        return cls(
            id=fields["id"],
            tick=int(fields["tick"]),
            namespace_digests=digests,
            rng_digest=fields["rng"],
            queue_digest=fields["queues"],
            timer_state=int(fields["timer_state"]),
        )


@dataclass
class RestoredState:
    tick: int
    rng_states: dict[str, Any]
    queue_capture: dict[str, Any]


class StoreRegistry:
    """Owns all namespaces for a run plus the snapshot directory.

    One writer per namespace (the owning plugin, under the tick barrier);
    snapshots run exclusively at barriers: mid-tick snapshot calls are
    refused.
    """

    def __init__(self, root: Path | None = None, backing: str = "memory"):
        self.root = Path(root) if root is not None else None
        self.backing = backing
        self._stores: dict[Namespace, KvStore] = {}
        self._owned: set[Namespace] = set()
        self._snap_counter = 0
        self._in_tick = False

    # -- adapter lifecycle -------------------------------------------------

    def open_adapter(
        self, plugin: str, pod: str, store: str, kind: str = "kv"
    ) -> AdapterHandle:
        ns: Namespace = (pod, plugin, store)
        if ns in self._owned:
            raise DuplicateNamespace(f"namespace {ns_name(ns)} already owned")
        self._owned.add(ns)
        return AdapterHandle(ns, kind, self._store_for(ns))

    def release(self, handle: AdapterHandle) -> None:
        handle.close()
        self._owned.discard(handle.namespace)

    def _store_for(self, ns: Namespace) -> KvStore:
        if ns not in self._stores:
            if self.backing == "file" and self.root is not None:
                path = self.root / "data" / ns[0] / ns[1] / f"{ns[2]}.log"
                self._stores[ns] = FileKvStore(path)
            else:
                self._stores[ns] = KvStore()
        return self._stores[ns]

    def namespaces(self) -> list[Namespace]:
        return sorted(self._stores)

    def store(self, ns: Namespace) -> KvStore:
        return self._store_for(ns)

    # -- barrier guard -----------------------------------------------------

    def enter_tick(self) -> None:
        self._in_tick = True

    def exit_tick(self) -> None:
        self._in_tick = False

    # -- snapshot / restore --------------------------------------------------

    def snapshot_all(
        self,
        tick: int,
        rng_states: dict[str, Any],
        queue_capture: dict[str, Any],
    ) -> SnapshotManifest:
        if self._in_tick:
            raise BarrierViolation("snapshot refused: agent routine in flight")
        if self.root is None:
            raise PersistenceError("snapshot requires a run directory")
        sid = snapshot_id(self._snap_counter)
        self._snap_counter += 1
        snap_dir = self.root / "snapshots" / sid
        (snap_dir / "ns").mkdir(parents=True, exist_ok=True)

        digests: dict[str, str] = {}
        for ns in self.namespaces():
            doc = self._stores[ns].to_doc()
            digests[ns_name(ns)] = digest_value(doc)
            path = snap_dir / "ns" / ns[0] / ns[1] / f"{ns[2]}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(canon_json(doc) + "\n")

        rng_text = canon_json(rng_states) + "\n"
        queue_text = canon_json(queue_capture) + "\n"
        (snap_dir / "rng.json").write_text(rng_text)
        (snap_dir / "queues.json").write_text(queue_text)

        manifest = SnapshotManifest(
            id=sid,
            tick=tick,
            namespace_digests=digests,
            rng_digest=digest_value(rng_states),
            queue_digest=digest_value(queue_capture),
            timer_state=tick,
        )
        (snap_dir / "manifest").write_text(manifest.to_lines())
        return manifest

    def state_digest(self, exclude_plugins: tuple[str, ...] = ()) -> str:
        """Hash over namespace digests; the replay determinism witness.

        ``exclude_plugins`` lets callers drop deployment-owned namespaces
        (e.g. the pod placement ledger) whose content depends on pod count
        but not on simulation results.
        """
        return digest_value(
            {
                ns_name(ns): self._stores[ns].digest()
                for ns in self.namespaces()
                if ns[1] not in exclude_plugins
            }
        )

    def restore(self, sid: str) -> RestoredState:
        if self._in_tick:
            raise BarrierViolation("restore refused: agent routine in flight")
        if self.root is None:
            raise SnapshotNotFound(sid)
        snap_dir = self.root / "snapshots" / sid
        if not (snap_dir / "manifest").exists():
            raise SnapshotNotFound(sid)
        manifest = SnapshotManifest.from_text((snap_dir / "manifest").read_text())

        loaded: dict[str, dict[str, Any]] = {}
        for name, digest in manifest.namespace_digests.items():
            pod, plugin, store = name.split("/")
            path = snap_dir / "ns" / pod / plugin / f"{store}.json"
            if not path.exists():
                raise SnapshotCorrupt(f"{sid}: missing namespace file {name}")
            doc = json.loads(path.read_text())
            if digest_value(doc) != digest:
                raise SnapshotCorrupt(f"{sid}: digest mismatch for {name}")
            loaded[name] = doc

        rng_states = json.loads((snap_dir / "rng.json").read_text())
        queues = json.loads((snap_dir / "queues.json").read_text())
        if digest_value(rng_states) != manifest.rng_digest:
            raise SnapshotCorrupt(f"{sid}: rng state digest mismatch")
        if digest_value(queues) != manifest.queue_digest:
            raise SnapshotCorrupt(f"{sid}: queue capture digest mismatch")

        # Swap contents in place so existing handles stay valid.
        for ns in list(self._stores):
            name = ns_name(ns)
            if name in loaded:
                self._stores[ns].load(loaded.pop(name))
            else:
                self._stores[ns].clear()
        for name, doc in loaded.items():
            pod, plugin, store = name.split("/")
            self._store_for((pod, plugin, store)).load(doc)

        return RestoredState(tick=manifest.tick, rng_states=rng_states, queue_capture=queues)

    def list_snapshots(self) -> list[str]:
        if self.root is None or not (self.root / "snapshots").exists():
            return []
        return sorted(os.listdir(self.root / "snapshots"))
