"""Environment facade plus the Space and Relation components.

The facade is a dynamic dispatcher: ``env_run(component, method, args)``
routes a call to whichever plugin registered that component, so new
environment capabilities (weather, gossip networks, 3D space) are added by
registering a plugin, never by editing the core. One Environment instance is
a single logical service shared by all pods; mutations arrive serialized
through the Controllers within a tick.

Space is a bounded 2D integer grid with Chebyshev distances; movement
conflicts resolve in canonical request order because requests execute in
canonical order. Relation is a directed, typed, weighted graph; edges of dead
agents are retained and flagged rather than deleted.
"""
from __future__ import annotations

from typing import Any

from .persistence import AdapterHandle


class DispatchFault(Exception):
    pass


class EnvironmentPlugin:
    """Base: an environment component exposing methods by name."""

    component = "base"

    def exposed(self) -> dict[str, Any]:
        return {}


class Environment:
    def __init__(self) -> None:
        self._components: dict[str, EnvironmentPlugin] = {}

    def register(self, plugin: EnvironmentPlugin) -> None:
        self._components[plugin.component] = plugin

    def component(self, name: str) -> EnvironmentPlugin:
        if name not in self._components:
            raise DispatchFault(f"no environment component {name!r}")
        return self._components[name]

    def has_component(self, name: str) -> bool:
        return name in self._components

    def env_run(self, component: str, method: str, args: dict[str, Any]) -> Any:
        plugin = self.component(component)
        table = plugin.exposed()
        if method not in table:
            raise DispatchFault(f"{component} has no method {method!r}")
        return table[method](**args)


class SpacePlugin(EnvironmentPlugin):
    """Grid world: static objects, agent positions, optional cell capacity."""

    component = "space"

    def __init__(self, adapter: AdapterHandle, map_doc: dict[str, Any]):
        self._kv = adapter
        self.width = int(map_doc["width"])
        self.height = int(map_doc["height"])
        self.cell_capacity = map_doc.get("cell_capacity")
        self.regions: dict[str, list[int]] = dict(map_doc.get("regions", {}))
        for obj in map_doc.get("static_objects", []):
            self._kv.kv_put(
                f"static/{obj['name']}",
                {"cell": list(obj["cell"]), "attributes": obj.get("attributes", {})},
            )

    def exposed(self) -> dict[str, Any]:
        return {
            "move": self.move,
            "place": self.place,
            "vacate": self.vacate,
            "query_nearby": self.query_nearby,
            "position_of": self.position_of,
            "region_of": self.region_of,
            "statics": self.statics,
        }

    # -- positions -----------------------------------------------------------

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def position_of(self, agent: str) -> list[int] | None:
        return self._kv.kv_get(f"pos/{agent}")

    def occupants(self, cell: tuple[int, int]) -> list[str]:
        found = []
        for key in self._kv.kv_scan_prefix("pos/"):
            if tuple(self._kv.kv_get(key)) == tuple(cell):
                found.append(key.split("/", 1)[1])
        return found

    def place(self, agent: str, cell: tuple[int, int] | list[int]) -> dict[str, Any]:
        cell = (int(cell[0]), int(cell[1]))
        if not self.in_bounds(cell):
            return {"status": "failed", "detail": "oob"}
        self._kv.kv_put(f"pos/{agent}", [cell[0], cell[1]])
        return {"status": "ok", "cell": [cell[0], cell[1]]}

    def vacate(self, agent: str) -> dict[str, Any]:
        self._kv.kv_delete(f"pos/{agent}")
        return {"status": "ok"}

    def move(self, agent: str, to: tuple[int, int] | list[int]) -> dict[str, Any]:
        to = (int(to[0]), int(to[1]))
        current = self.position_of(agent)
        if current is None:
            return {"status": "failed", "detail": "not-placed"}
        if not self.in_bounds(to):
            return {"status": "failed", "detail": "oob"}
        if tuple(current) == to:
            return {"status": "ok", "cell": [to[0], to[1]]}
        if self.cell_capacity is not None:
            if len(self.occupants(to)) >= self.cell_capacity:
                return {"status": "failed", "detail": "occupied"}
        self._kv.kv_put(f"pos/{agent}", [to[0], to[1]])
        return {"status": "ok", "cell": [to[0], to[1]]}

    # -- queries ---------------------------------------------------------------

    def statics(self) -> list[dict[str, Any]]:
        out = []
        for key in self._kv.kv_scan_prefix("static/"):
            doc = self._kv.kv_get(key)
            out.append({"name": key.split("/", 1)[1], **doc})
        return out

    def query_nearby(self, pos: tuple[int, int] | list[int], radius: int) -> list[dict[str, Any]]:
        """All agents and static objects within Chebyshev ``radius`` of ``pos``,
        sorted by (distance, id)."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        px, py = int(pos[0]), int(pos[1])
        hits: list[tuple[int, str, dict[str, Any]]] = []
        for key in self._kv.kv_scan_prefix("pos/"):
            cell = self._kv.kv_get(key)
            d = max(abs(cell[0] - px), abs(cell[1] - py))
            if d <= radius:
                aid = key.split("/", 1)[1]
                hits.append((d, aid, {"id": aid, "kind": "agent", "cell": list(cell), "distance": d}))
        for obj in self.statics():
            cell = obj["cell"]
            d = max(abs(cell[0] - px), abs(cell[1] - py))
            if d <= radius:
                hits.append(
                    (
                        d,
                        obj["name"],
                        {
                            "id": obj["name"],
                            "kind": "static",
                            "cell": list(cell),
                            "distance": d,
                            "attributes": obj.get("attributes", {}),
                        },
                    )
                )
        hits.sort(key=lambda h: (h[0], h[1]))
        return [h[2] for h in hits]

    def region_of(self, cell: tuple[int, int] | list[int] | None) -> str | None:
        if cell is None:
            return None
        x, y = int(cell[0]), int(cell[1])
        for name in sorted(self.regions):
            x0, y0, x1, y1 = self.regions[name]
            if x0 <= x <= x1 and y0 <= y <= y1:
                return name
        return None

    def agent_positions(self) -> dict[str, list[int]]:
        return {
            key.split("/", 1)[1]: self._kv.kv_get(key)
            for key in self._kv.kv_scan_prefix("pos/")
        }


class RelationPlugin(EnvironmentPlugin):
    """Directed, typed, weighted social graph."""

    component = "relation"

    def __init__(self, adapter: AdapterHandle, relation_types: list[str]):
        self._kv = adapter
        self.relation_types = list(relation_types)

    def exposed(self) -> dict[str, Any]:
        return {
            "update": self.update,
            "neighbors": self.neighbors,
            "mark_dead": self.mark_dead,
            "degree": self.degree,
        }

    def update(self, a: str, b: str, type: str, weight: float) -> dict[str, Any]:
        if type not in self.relation_types:
            return {"status": "failed", "detail": f"undeclared relation type {type!r}"}
        if not 0.0 <= weight <= 1.0:
            return {"status": "failed", "detail": "weight out of bounds"}
        self._kv.kv_put(f"edge/{a}/{b}/{type}", {"weight": weight, "dead": False})
        return {"status": "ok"}

    def neighbors(self, a: str, type: str | None = None) -> list[dict[str, Any]]:
        """Outgoing edges of ``a`` sorted by (weight desc, id)."""
        edges = []
        for key in self._kv.kv_scan_prefix(f"edge/{a}/"):
            _, _, b, etype = key.split("/")
            if type is not None and etype != type:
                continue
            doc = self._kv.kv_get(key)
            edges.append({"id": b, "type": etype, "weight": doc["weight"], "dead": doc["dead"]})
        edges.sort(key=lambda e: (-e["weight"], e["id"], e["type"]))
        return edges

    def degree(self, a: str) -> int:
        return len(self._kv.kv_scan_prefix(f"edge/{a}/"))

    def mark_dead(self, agent: str) -> dict[str, Any]:
        """Flag (never delete) edges touching a dead agent."""
        flagged = 0
        for key in self._kv.kv_scan_prefix("edge/"):
            _, a, b, _ = key.split("/")
            if agent in (a, b):
                doc = self._kv.kv_get(key)
                if not doc["dead"]:
                    doc["dead"] = True
                    self._kv.kv_put(key, doc)
                    flagged += 1
        return {"status": "ok", "flagged": flagged}
