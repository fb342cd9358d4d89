"""simctl: run simulations, generate initial data, export analyses.

    simctl run <config.json> [--out DIR] [--listen HOST:PORT] [--ticks N]
    simctl pcg <pcg.json> --seed N --out DIR [--map map.json]
    simctl export <run-dir> [--scenario DIR]
"""
from __future__ import annotations

import argparse
import json
import sys
import threading
import time
from pathlib import Path

from .config import PcgConfig, SimulationConfig
from .pcg import pcg_generate
from .simulation import Simulation


def _cmd_run(args: argparse.Namespace) -> int:
    config = SimulationConfig.load(args.config)
    if args.out:
        config.out_dir = Path(args.out).resolve()
    if config.out_dir is None:
        config.out_dir = Path.cwd() / "runs" / time.strftime("%Y%m%d-%H%M%S")
    if args.ticks is not None:
        config.tick_limit = args.ticks
    if args.listen:
        config.listen = args.listen
    if args.pods is not None:
        config.pods = args.pods

    try:
        sim = Simulation(config)
    except Exception as exc:
        print(f"boot failed: {exc}", file=sys.stderr)
        return 1

    if config.listen:
        from .api import ControlApiServer

        host, _, port = config.listen.rpartition(":")
        server = ControlApiServer(sim, host or "127.0.0.1", int(port or 0))
        server.start()
        print(f"control api listening on {server.url}", flush=True)
        if sys.stdin is not None and sys.stdin.isatty():
            # interactive runs stop on EOF; daemonized runs use POST /stop
            threading.Thread(target=_stdin_stop, args=(sim,), daemon=True).start()
        try:
            summary = sim.serve_loop()
        finally:
            server.stop()
    else:
        summary = sim.run_headless()
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _stdin_stop(sim: Simulation) -> None:
    try:
        sys.stdin.read()
    except Exception:
        pass
    sim.submit("stop", timeout=5.0)


def _cmd_pcg(args: argparse.Namespace) -> int:
    cfg_path = Path(args.config)
    cfg = PcgConfig.from_doc(json.loads(cfg_path.read_text()))
    if args.map:
        map_doc = json.loads(Path(args.map).read_text())
    else:
        sibling = cfg_path.parent / "map.json"
        map_doc = json.loads(sibling.read_text()) if sibling.exists() else {"width": 16, "height": 16}
    written = pcg_generate(cfg, args.seed, args.out, map_doc)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    from .export import ExportError, export_metrics

    try:
        written = export_metrics(args.run_dir, args.scenario)
    except ExportError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="simctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="boot and run a simulation")
    run_p.add_argument("config")
    run_p.add_argument("--out", help="run output directory")
    run_p.add_argument("--listen", help="control API address host:port")
    run_p.add_argument("--ticks", type=int, help="override tick_limit")
    run_p.add_argument("--pods", type=int, help="override pod count")
    run_p.set_defaults(fn=_cmd_run)

    pcg_p = sub.add_parser("pcg", help="generate initial data files")
    pcg_p.add_argument("config")
    pcg_p.add_argument("--seed", type=int, required=True)
    pcg_p.add_argument("--out", required=True)
    pcg_p.add_argument("--map", help="map document (for spawn regions)")
    pcg_p.set_defaults(fn=_cmd_pcg)

    export_p = sub.add_parser("export", help="emit analysis CSVs for a run")
    export_p.add_argument("run_dir")
    export_p.add_argument("--scenario", help="scenario dir for category classification")
    export_p.set_defaults(fn=_cmd_export)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
