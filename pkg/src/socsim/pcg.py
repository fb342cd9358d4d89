"""Procedural content generation: seeded batch creation of initial data.

Emits the four simulation inputs (agent identities, initial states, the
relation network, spatial positions) as canonical JSON files that are
byte-identical for a given (config, seed). Categorical mixes use exact
stratified assignment (largest remainder, round-robin order) so small
populations match their configured composition exactly. The static-object
map is never generated; it is author-supplied.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any

from .canon import canon_json
from .config import ConfigError, PcgConfig
from .kernel import agent_id
from .rng import RngStream

OUTPUT_FILES = ("identities.json", "states.json", "relations.json", "positions.json")


def stratified_counts(mix: dict[str, float], n: int) -> dict[str, int]:
    """Largest-remainder apportionment of n items over categories."""
    cats = sorted(mix)
    floors = {c: int(mix[c] * n) for c in cats}
    remainder = n - sum(floors.values())
    by_fraction = sorted(cats, key=lambda c: (-(mix[c] * n - floors[c]), c))
    for c in by_fraction[:remainder]:
        floors[c] += 1
    return floors


def _assign_field(spec: dict[str, Any], ids: list[str], rng: RngStream) -> dict[str, Any]:
    kind = spec["kind"]
    if kind == "constant":
        return {aid: spec["value"] for aid in ids}
    if kind == "cycle":
        values = spec["values"]
        return {aid: values[i % len(values)] for i, aid in enumerate(ids)}
    if kind == "stratified":
        counts = stratified_counts(spec["mix"], len(ids))
        cats = sorted(counts)
        out: dict[str, Any] = {}
        i = 0
        remaining = dict(counts)
        for aid in ids:
            while remaining[cats[i % len(cats)]] == 0:
                i += 1
            cat = cats[i % len(cats)]
            out[aid] = cat
            remaining[cat] -= 1
            i += 1
        return out
    if kind == "uniform":
        return {aid: round(rng.uniform(spec["lo"], spec["hi"]), 4) for aid in ids}
    if kind == "uniform_int":
        return {aid: rng.randint(spec["lo"], spec["hi"]) for aid in ids}
    if kind == "choice":
        return {aid: rng.choice(spec["values"]) for aid in ids}
    raise ConfigError(f"unknown distribution kind {kind!r}")


def _generate_relations(cfg: PcgConfig, ids: list[str], rng: RngStream) -> list[list[Any]]:
    relations = cfg.relations
    types = relations.get("types", [])
    degree = relations.get("mean_degree", 0)
    if not types or degree <= 0 or len(ids) < 2:
        return []
    target_edges = round(len(ids) * degree / 2)
    lo = relations.get("weight_lo", 0.1)
    hi = relations.get("weight_hi", 1.0)
    chosen: set[tuple[str, str]] = set()
    edges: list[list[Any]] = []
    attempts = 0
    while len(chosen) < target_edges and attempts < target_edges * 50:
        attempts += 1
        a = rng.choice(ids)
        b = rng.choice(ids)
        if a == b:
            continue
        pair = (min(a, b), max(a, b))
        if pair in chosen:
            continue
        chosen.add(pair)
        rtype = rng.choice(types)
        weight = round(rng.uniform(lo, hi), 4)
        edges.append([pair[0], pair[1], rtype, weight])
        edges.append([pair[1], pair[0], rtype, weight])
    edges.sort()
    return edges


def _generate_positions(
    cfg: PcgConfig, ids: list[str], map_doc: dict[str, Any], rng: RngStream
) -> dict[str, list[int]]:
    if cfg.spawn_region and cfg.spawn_region in map_doc.get("regions", {}):
        x0, y0, x1, y1 = map_doc["regions"][cfg.spawn_region]
    else:
        x0, y0 = 0, 0
        x1, y1 = map_doc["width"] - 1, map_doc["height"] - 1
    return {aid: [rng.randint(x0, x1), rng.randint(y0, y1)] for aid in ids}


def pcg_generate(
    cfg: PcgConfig,
    seed: int | str,
    out_dir: str | Path,
    map_doc: dict[str, Any],
    base_state: dict[str, Any] | None = None,
) -> dict[str, Path]:
    """Generate the four data files; deterministic for a given (cfg, seed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = [agent_id(i) for i in range(cfg.population)]

    profiles: dict[str, dict[str, Any]] = {aid: {} for aid in ids}
    for fname in sorted(cfg.profile_fields):
        rng = RngStream.derive(seed, f"pcg/profile/{fname}")
        for aid, value in _assign_field(cfg.profile_fields[fname], ids, rng).items():
            profiles[aid][fname] = value

    states: dict[str, dict[str, Any]] = {aid: dict(base_state or {}) for aid in ids}
    for fname in sorted(cfg.state_fields):
        rng = RngStream.derive(seed, f"pcg/state/{fname}")
        for aid, value in _assign_field(cfg.state_fields[fname], ids, rng).items():
            states[aid][fname] = value

    relations = _generate_relations(cfg, ids, RngStream.derive(seed, "pcg/relations"))
    positions = _generate_positions(cfg, ids, map_doc, RngStream.derive(seed, "pcg/positions"))

    files = {
        "identities.json": [{"id": aid, "profile": profiles[aid]} for aid in ids],
        "states.json": states,
        "relations.json": relations,
        "positions.json": positions,
    }
    written: dict[str, Path] = {}
    for fname, doc in files.items():
        path = out / fname
        path.write_text(canon_json(doc) + "\n")
        written[fname] = path
    return written


def realized_mean_degree(relations: list[list[Any]], population: int) -> float:
    if population == 0:
        return 0.0
    return len(relations) / population
