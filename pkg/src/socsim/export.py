"""Post-run analysis exports derived purely from a run directory.

Reads ``events.log`` (and metric CSVs where present) and emits:

    population.csv             tick,value reconstructed from birth/death events
    births_deaths_daily.csv    day,births,deaths
    behavior_proportions.csv   day plus one column per behavior category, rows sum to 1
    pod_load.csv               tick plus one column per pod (agent counts)

The conservation identity pop(t) = pop(0) + births(<=t) - deaths(<=t) is what
makes the population series derivable from the log alone.
"""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

from .kernel import EventRecord
from .scenarios import classify_behavior, load_scenario


class ExportError(Exception):
    pass


def read_events(run_dir: Path) -> list[EventRecord]:
    log = Path(run_dir) / "events.log"
    if not log.exists():
        raise ExportError(f"missing events.log under {run_dir}")
    return [EventRecord.from_line(line) for line in log.read_text().splitlines() if line]


def export_metrics(run_dir: str | Path, scenario_dir: str | Path | None = None) -> dict[str, Path]:
    run_dir = Path(run_dir)
    events = read_events(run_dir)
    out_dir = run_dir / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)

    catalog = []
    ticks_per_day = 24
    header = next((e for e in events if e.attr("what") == "run-header"), None)
    if header is not None:
        ticks_per_day = int(header.attr("ticks_per_day", "24"))
    if scenario_dir is not None:
        package = load_scenario(scenario_dir)
        catalog = package.catalog
        ticks_per_day = package.constants.get("ticks_per_day", ticks_per_day)

    last_tick = max((e.tick for e in events), default=0)
    written: dict[str, Path] = {}

    # population over time (conservation identity over the log)
    base_population = _initial_population(run_dir, events)
    births_at: dict[int, int] = defaultdict(int)
    deaths_at: dict[int, int] = defaultdict(int)
    for e in events:
        if e.kind == "birth":
            births_at[e.tick] += 1
        elif e.kind == "death":
            deaths_at[e.tick] += 1
    pop_path = out_dir / "population.csv"
    with open(pop_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "value"])
        population = base_population
        for t in range(last_tick + 1):
            population += births_at[t] - deaths_at[t]
            writer.writerow([t, population])
    written["population"] = pop_path

    # births/deaths per day
    bd_path = out_dir / "births_deaths_daily.csv"
    with open(bd_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "births", "deaths"])
        for day in range(last_tick // ticks_per_day + 1):
            lo, hi = day * ticks_per_day, (day + 1) * ticks_per_day
            writer.writerow(
                [
                    day,
                    sum(v for t, v in births_at.items() if lo <= t < hi),
                    sum(v for t, v in deaths_at.items() if lo <= t < hi),
                ]
            )
    written["births_deaths_daily"] = bd_path

    # daily behavior-category proportions
    day_counts: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    categories: set[str] = set()
    for e in events:
        if e.kind != "action":
            continue
        action = e.attr("action") or ""
        if action.startswith("env:"):
            continue
        category = classify_behavior(action, catalog)
        categories.add(category)
        day_counts[e.tick // ticks_per_day][category] += 1
    prop_path = out_dir / "behavior_proportions.csv"
    columns = sorted(categories)
    with open(prop_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day"] + columns)
        for day in sorted(day_counts):
            total = sum(day_counts[day].values())
            writer.writerow([day] + [day_counts[day][c] / total for c in columns])
    written["behavior_proportions"] = prop_path

    # per-pod load from recorded metrics
    pod_series: dict[str, dict[int, float]] = {}
    metrics_dir = run_dir / "metrics"
    if metrics_dir.exists():
        for path in sorted(metrics_dir.glob("pod_agents.*.csv")):
            pod = path.stem.split(".", 1)[1]
            with open(path) as fh:
                reader = csv.DictReader(fh)
                pod_series[pod] = {int(r["tick"]): float(r["value"]) for r in reader}
    if pod_series:
        load_path = out_dir / "pod_load.csv"
        pods = sorted(pod_series)
        ticks = sorted({t for series in pod_series.values() for t in series})
        with open(load_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick"] + pods)
            for t in ticks:
                writer.writerow([t] + [pod_series[p].get(t, "") for p in pods])
        written["pod_load"] = load_path

    return written


def _initial_population(run_dir: Path, events: list[EventRecord]) -> int:
    summary = run_dir / "summary.json"
    if summary.exists():
        doc = json.loads(summary.read_text())
        births = sum(1 for e in events if e.kind == "birth")
        deaths = sum(1 for e in events if e.kind == "death")
        return int(doc["population"]) - births + deaths
    metrics = run_dir / "metrics" / "population.csv"
    if metrics.exists():
        with open(metrics) as fh:
            first = next(csv.DictReader(fh), None)
            if first:
                return int(float(first["value"]))
    return 0
