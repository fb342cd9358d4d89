"""Analysis exports: reconciliation against the event log."""
import csv

import pytest

from socsim.config import SimulationConfig
from socsim.export import ExportError, export_metrics
from socsim.simulation import Simulation


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("export_run")
    cfg = SimulationConfig.load("scenario/universe25/reference_run.json")
    cfg.out_dir = out
    cfg.tick_limit = 60
    sim = Simulation(cfg)
    sim.run_headless()
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestExports:
    def test_population_matches_recorded_metric(self, run_dir):
        written = export_metrics(run_dir, "scenario/universe25")
        derived = {int(r["tick"]): float(r["value"]) for r in rows(written["population"])}
        recorded = {int(r["tick"]): float(r["value"]) for r in rows(run_dir / "metrics" / "population.csv")}
        for tick, value in recorded.items():
            assert derived[tick] == value

    def test_conservation_identity(self, run_dir):
        written = export_metrics(run_dir, "scenario/universe25")
        population = {int(r["tick"]): float(r["value"]) for r in rows(written["population"])}
        daily = rows(written["births_deaths_daily"])
        births = sum(int(r["births"]) for r in daily)
        deaths = sum(int(r["deaths"]) for r in daily)
        final_tick = max(population)
        assert population[final_tick] == 8 + births - deaths

    def test_proportions_rows_sum_to_one(self, run_dir):
        written = export_metrics(run_dir, "scenario/universe25")
        for row in rows(written["behavior_proportions"]):
            total = sum(float(v) for k, v in row.items() if k != "day")
            assert abs(total - 1.0) <= 1e-9

    def test_pod_load_columns(self, run_dir):
        written = export_metrics(run_dir, "scenario/universe25")
        table = rows(written["pod_load"])
        assert table and "p00000000" in table[0]

    def test_flat_population_with_no_births(self, tmp_path):
        cfg = SimulationConfig.load("scenario/campus_mini/smoke_run.json")
        cfg.out_dir = tmp_path / "flat"
        cfg.tick_limit = 6
        sim = Simulation(cfg)
        sim.run_headless()
        written = export_metrics(cfg.out_dir, "scenario/campus_mini")
        values = {float(r["value"]) for r in rows(written["population"])}
        assert values == {200.0}

    def test_missing_log_fails(self, tmp_path):
        with pytest.raises(ExportError):
            export_metrics(tmp_path)
