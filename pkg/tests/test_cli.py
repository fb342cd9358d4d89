"""simctl surface: run, pcg, export, boot failures."""
import json

from socsim.cli import main


class TestRun:
    def test_tick_limit_zero_exits_cleanly(self, tmp_path, capsys):
        rc = main(
            [
                "run",
                "scenario/universe25/reference_run.json",
                "--out",
                str(tmp_path / "run"),
                "--ticks",
                "0",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert '"population": 8' in out
        assert (tmp_path / "run" / "events.log").exists()
        assert len(list((tmp_path / "run" / "snapshots").iterdir())) == 1

    def test_boot_failure_nonzero_with_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"scenario": "nowhere", "master_seed": 1}))
        rc = main(["run", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 1
        assert "boot failed" in capsys.readouterr().err


class TestPcg:
    def test_generates_four_files(self, tmp_path, capsys):
        rc = main(
            [
                "pcg",
                "scenario/universe25/pcg.json",
                "--seed",
                "5",
                "--out",
                str(tmp_path / "data"),
            ]
        )
        assert rc == 0
        names = {p.name for p in (tmp_path / "data").iterdir()}
        assert names == {"identities.json", "states.json", "relations.json", "positions.json"}

    def test_same_seed_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            main(["pcg", "scenario/universe25/pcg.json", "--seed", "5", "--out", str(tmp_path / sub)])
        for name in ("identities.json", "states.json", "relations.json", "positions.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestExport:
    def test_export_after_run(self, tmp_path, capsys):
        main(
            [
                "run",
                "scenario/universe25/reference_run.json",
                "--out",
                str(tmp_path / "run"),
                "--ticks",
                "30",
            ]
        )
        rc = main(["export", str(tmp_path / "run"), "--scenario", "scenario/universe25"])
        assert rc == 0
        assert (tmp_path / "run" / "analysis" / "population.csv").exists()

    def test_missing_run_dir_fails(self, tmp_path, capsys):
        rc = main(["export", str(tmp_path / "ghost")])
        assert rc == 1
