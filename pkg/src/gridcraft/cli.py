"""Operator entry point: run episodes/sweeps and work with saved artifacts.

Exit codes: 0 ok, 1 usage, 2 runtime, 3 integrity.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from . import __version__
from .errors import GridcraftError, IntegrityError
from .harness import (
    RECORD_VERSION,
    aggregate,
    export_messages,
    export_record,
    export_trace,
    import_record,
    run_sweep,
)
from .memory import export_graph, import_graph
from .policy import BaselineKind, RemoteBackend, RemoteEndpointConfig, ScriptedBackend
from .schema import schema_document
from .world import EpisodeConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INTEGRITY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse maps usage failures to exit 2 by default; this CLI reserves 1 for them."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridcraft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run scripted or remote episodes and write artifacts")
    run.add_argument("--config", help="INI config file (sections: episode, run, backend)")
    run.add_argument("--seed", type=int, help="base seed; run k uses seed+k-1")
    run.add_argument("--agents", type=int, help="number of agents")
    run.add_argument("--baseline", choices=[b.value for b in BaselineKind])
    run.add_argument("--backend", choices=["scripted", "remote"])
    run.add_argument("--runs", type=int, help="number of episodes")
    run.add_argument("--out", help="output directory")
    run.add_argument("--max-ticks", type=int, dest="max_ticks")

    tools = sub.add_parser("tools", help="schema/export-graph/replay/table utilities")
    tsub = tools.add_subparsers(dest="tool", required=True)

    schema = tsub.add_parser("schema", help="print the response JSON schema")
    schema.add_argument("--out", help="write to file instead of stdout")

    export = tsub.add_parser("export-graph", help="convert a saved graph to dot")
    export.add_argument("graph", help="graph JSON file")
    export.add_argument("--out", required=True, help="dot output path")

    replay = tsub.add_parser("replay", help="re-simulate a record and verify fidelity")
    replay.add_argument("record", help="episode record JSONL file")

    table = tsub.add_parser("table", help="aggregate milestone metrics over records")
    table.add_argument("records", nargs="+", help="record files or directories of *.jsonl")
    table.add_argument("--csv", help="also write CSV to this path")
    return parser


_DEFAULTS = {
    "seed": 0, "agents": 1, "baseline": "mem", "backend": "scripted",
    "runs": 1, "out": "runs/latest", "max_ticks": 400,
}


def _resolve_run_spec(args) -> dict:
    """defaults < config file < CLI flags; echoes the fully resolved spec."""
    spec = dict(_DEFAULTS)
    spec["endpoint_url"] = None
    spec["endpoint_model"] = None
    spec["endpoint_temperature"] = 0.0
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        ini = configparser.ConfigParser()
        ini.read(path)
        if ini.has_section("episode"):
            ep = ini["episode"]
            spec["seed"] = ep.getint("seed", spec["seed"])
            spec["agents"] = ep.getint("agents", spec["agents"])
            spec["max_ticks"] = ep.getint("max_ticks", spec["max_ticks"])
        if ini.has_section("run"):
            rn = ini["run"]
            spec["runs"] = rn.getint("runs", spec["runs"])
            spec["baseline"] = rn.get("baseline", spec["baseline"])
            spec["backend"] = rn.get("backend", spec["backend"])
            spec["out"] = rn.get("out", spec["out"])
        if ini.has_section("backend"):
            be = ini["backend"]
            spec["endpoint_url"] = be.get("url", None)
            spec["endpoint_model"] = be.get("model", None)
            spec["endpoint_temperature"] = be.getfloat("temperature", 0.0)
    for key in ("seed", "agents", "baseline", "backend", "runs", "out", "max_ticks"):
        value = getattr(args, key, None)
        if value is not None:
            spec[key] = value
    if spec["runs"] < 1:
        raise UsageError("--runs must be >= 1")
    if spec["agents"] < 1:
        raise UsageError("--agents must be >= 1")
    if spec["baseline"] not in {b.value for b in BaselineKind}:
        raise UsageError(f"unknown baseline {spec['baseline']!r}")
    if spec["backend"] not in ("scripted", "remote"):
        raise UsageError(f"unknown backend {spec['backend']!r}")
    if spec["backend"] == "remote" and not (spec["endpoint_url"] and spec["endpoint_model"]):
        raise UsageError("remote backend requires url and model in the config [backend] section")
    return spec


def _make_backend_factory(spec: dict):
    if spec["backend"] == "scripted":
        return ScriptedBackend
    endpoint = RemoteEndpointConfig(url=spec["endpoint_url"], model=spec["endpoint_model"],
                                    temperature=spec["endpoint_temperature"])
    return lambda: RemoteBackend(endpoint)


def cmd_run(args) -> int:
    spec = _resolve_run_spec(args)
    config = EpisodeConfig(n_agents=spec["agents"], seed=spec["seed"],
                           max_ticks=spec["max_ticks"])
    baseline = BaselineKind(spec["baseline"])
    seeds = [spec["seed"] + k for k in range(spec["runs"])]

    out = Path(spec["out"])
    (out / "records").mkdir(parents=True, exist_ok=True)
    (out / "graphs").mkdir(exist_ok=True)
    (out / "messages").mkdir(exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)

    records = run_sweep(config, seeds, _make_backend_factory(spec), baseline)

    for record in records:
        tag = f"ep{record.episode_number:03d}_seed{record.config.seed}"
        export_record(record, out / "records" / f"{tag}.jsonl")
        export_trace(record, out / "traces" / f"{tag}.trace.jsonl")
        export_messages(record, out / "messages" / f"{tag}.messages.jsonl")
        if record.graphs:
            for agent_id, graph in record.graphs.items():
                base = out / "graphs" / f"{tag}_agent{agent_id}"
                base.with_suffix(".json").write_text(export_graph(graph, "json"))
                base.with_suffix(".dot").write_text(export_graph(graph, "dot"))

    table = aggregate(records)
    (out / "metrics.txt").write_text(table.render_text() + "\n")
    (out / "metrics.csv").write_text(table.to_csv())
    (out / "run_manifest.json").write_text(json.dumps({
        "package_version": __version__,
        "record_version": RECORD_VERSION,
        "resolved_spec": {k: v for k, v in spec.items() if k != "endpoint_url" or v},
        "episode_config": config.to_dict(),
        "seeds": seeds,
    }, indent=2, sort_keys=True) + "\n")
    print(table.render_text())
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_tools(args) -> int:
    if args.tool == "schema":
        text = schema_document()
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return EXIT_OK
    if args.tool == "export-graph":
        source = Path(args.graph)
        if not source.exists():
            raise UsageError(f"graph file not found: {source}")
        graph = import_graph(source.read_text())
        Path(args.out).write_text(export_graph(graph, "dot") + "\n")
        print(f"wrote {args.out}")
        return EXIT_OK
    if args.tool == "replay":
        source = Path(args.record)
        if not source.exists():
            raise UsageError(f"record file not found: {source}")
        import_record(source, verify=True)
        print("fidelity OK")
        return EXIT_OK
    if args.tool == "table":
        paths = []
        for entry in args.records:
            p = Path(entry)
            if p.is_dir():
                paths.extend(sorted(p.glob("*.jsonl")))
            elif p.exists():
                paths.append(p)
            else:
                raise UsageError(f"record path not found: {p}")
        if not paths:
            raise UsageError("no record files found")
        records = [import_record(p, verify=True) for p in paths]
        table = aggregate(records)
        print(table.render_text())
        if args.csv:
            Path(args.csv).write_text(table.to_csv())
        return EXIT_OK
    raise UsageError(f"unknown tool {args.tool!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        return cmd_tools(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (GridcraftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
