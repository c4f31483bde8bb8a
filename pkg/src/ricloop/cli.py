"""Command-line front end.

Subcommands: run a scenario, generate traces and topologies for fixtures,
replay an event log, and turn a metrics file into CSV exports and figures.
Usage errors exit 2 (argparse default); runtime failures exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import ConfigError, EngineError, build_scenario, load_scenario, run_scenario
from .es_rapp import InsufficientHistoryError
from .messages import DecodeError, PolicyError
from .metrics import CorruptLogError, compute_metrics
from .ran import RanError
from .topology import TopologyError, generate_topology, save_topology, load_topology
from .traffic import DiurnalConfig, TraceError, synth_diurnal, write_trace

_RUNTIME_ERRORS = (
    ConfigError,
    EngineError,
    TopologyError,
    TraceError,
    CorruptLogError,
    DecodeError,
    PolicyError,
    RanError,
    InsufficientHistoryError,
    OSError,
    json.JSONDecodeError,
)


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.mode:
        doc = json.loads(Path(args.scenario).read_text())
        doc["mode"] = {"a1": "a1", "ccc": "ccc"}[args.mode]
        if args.seed is not None:
            doc["seed"] = args.seed
        scenario = build_scenario(doc, Path(args.scenario).parent)
    elif args.seed is not None:
        doc = json.loads(Path(args.scenario).read_text())
        doc["seed"] = args.seed
        scenario = build_scenario(doc, Path(args.scenario).parent)
    out_dir = args.out or f"out-{scenario.name}"
    result = run_scenario(scenario, out_dir=out_dir)
    m = result.metrics
    print(f"scenario          {scenario.name} (mode {scenario.mode}, seed {scenario.seed})")
    print(f"intervals         {m.duration_intervals} x {m.granularity_s}s")
    print(f"capacity savings  {m.savings_capacity_pct:.2f}%")
    print(f"accessibility     {m.accessibility:.6f} ({m.blocked} blocked / {m.attempts} attempts)")
    print(f"handovers         {m.handovers_succeeded}/{m.handovers_attempted} succeeded")
    print(f"transitions       {m.transitions}")
    print(f"log               {result.log_path}")
    print(f"metrics           {result.metrics_path}")
    return 0


def _cmd_gen_trace(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    topo_path = args.topology or doc.get("topology")
    if not topo_path:
        print("gen-trace: no topology given (flag or config field)", file=sys.stderr)
        return 1
    topology = load_topology(Path(args.config).parent / topo_path)
    cfg_doc = dict(doc.get("diurnal", doc))
    cfg_doc.pop("topology", None)
    if "per_band_scale" in cfg_doc:
        cfg_doc["per_band_scale"] = tuple(cfg_doc["per_band_scale"])
    cfg = DiurnalConfig(**cfg_doc)
    trace = synth_diurnal(topology, cfg)
    write_trace(trace, args.out)
    print(f"wrote {trace.n_intervals} intervals x {len(trace.series)} cells to {args.out}")
    return 0


def _cmd_gen_topology(args) -> int:
    topology = generate_topology(
        sites=args.sites,
        sectors=args.sectors,
        bands=args.bands,
        prb_capacity=args.prb_capacity,
        site_spacing_m=args.spacing,
    )
    save_topology(topology, args.out)
    n_cells = len(topology.cell_ids())
    print(f"wrote {args.sites} sites / {args.sectors} sectors / {n_cells} cells to {args.out}")
    return 0


def _cmd_replay(args) -> int:
    metrics = compute_metrics(args.log)
    text = metrics.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.metrics).read_text())
    wrote_any = False
    if args.csv:
        scalar_keys = [
            k
            for k, v in sorted(doc.items())
            if not isinstance(v, (dict, list))
        ]
        lines = ["metric,value"] + [f"{k},{doc[k]}" for k in scalar_keys]
        Path(args.csv).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.csv}")
        wrote_any = True
    if args.plot_data:
        rows = ["timestamp,sector,load,predicted,awake_capacity_count"]
        for sector in sorted(doc.get("sector_load_timeline", {})):
            for ts, load, predicted, k in doc["sector_load_timeline"][sector]:
                p = "" if predicted is None else repr(predicted)
                rows.append(f"{ts},{sector},{load!r},{p},{k}")
        Path(args.plot_data).write_text("\n".join(rows) + "\n")
        print(f"wrote {args.plot_data}")
        wrote_any = True
    if args.figures:
        from .plotting import render_figures

        for path in render_figures(doc, args.figures):
            print(f"wrote {path}")
        wrote_any = True
    if not wrote_any:
        print(json.dumps({k: v for k, v in doc.items() if not isinstance(v, (dict, list))}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ricloop",
        description="energy-saving / traffic-steering control-loop simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write its log and metrics")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--mode", choices=["a1", "ccc"], help="override the notification mode")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="output directory (default: out-<name>)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("gen-trace", help="synthesize a diurnal trace CSV")
    p.add_argument("config", help="diurnal config JSON")
    p.add_argument("--topology", help="topology file (overrides config field)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_gen_trace)

    p = sub.add_parser("gen-topology", help="generate a synthetic topology JSON")
    p.add_argument("--sites", type=int, default=13)
    p.add_argument("--sectors", type=int, default=41)
    p.add_argument("--bands", type=int, default=5)
    p.add_argument("--prb-capacity", type=int, default=100)
    p.add_argument("--spacing", type=float, default=3000.0, help="site grid spacing [m]")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_gen_topology)

    p = sub.add_parser("replay", help="recompute metrics from an event log")
    p.add_argument("log", help="events.jsonl path")
    p.add_argument("--out", help="metrics JSON output (default: stdout)")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("report", help="export CSV series and figures from a metrics file")
    p.add_argument("metrics", help="metrics.json path")
    p.add_argument("--csv", help="write scalar KPIs as CSV")
    p.add_argument("--plot-data", help="write the per-sector load/prediction/mode CSV")
    p.add_argument("--figures", help="render PNG figures into this directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"ricloop: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
