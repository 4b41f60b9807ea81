"""plancache command line: run, prefill, locality, accuracy, report, replay."""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .cache import PlanCache
from .gridworld import load_scenario
from .metrics import derive_reports, extract_prefill, locality_table, plan_execution_accuracy
from .planners import CostModel, LatencySpec
from .reporting import (
    CSV_TAG,
    load_report_json,
    render_locality,
    render_report_figures,
    write_aggregate_csv,
    write_episodes_csv,
    write_growth_csv,
    write_locality_csv,
    write_report_json,
)
from .strategies import STRATEGY_KINDS, StrategyConfig, run_batch
from .trace import read_trace, write_trace

SEED_ENV_VAR = "PLANCACHE_SEED"


def _resolve_scenario(name: str) -> dict:
    path = Path(name)
    if path.exists():
        return load_scenario(path)
    candidate = resources.files("plancache").joinpath("scenarios", f"{name}.json")
    if candidate.is_file():
        return json.loads(candidate.read_text(encoding="utf-8"))
    raise SystemExit(f"scenario {name!r} not found (no such file or shipped scenario)")


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="run episodes and write trace + report")
    p.add_argument("--strategy", choices=STRATEGY_KINDS, required=True)
    p.add_argument("--scenario", required=True,
                   help="path to a scenario JSON or a shipped scenario name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--planner", choices=("scripted", "remote"), default="scripted")
    p.add_argument("--planner-latency", "--latency", dest="planner_latency",
                   default="10", help="constant N or uniform LO:HI (ticks)")
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--query-period", type=int, default=5)
    p.add_argument("--cache", default=None, help="warm-start .pcache file")
    p.add_argument("--no-updates", action="store_true",
                   help="disable cache reinforce/penalize/insert (ablation)")
    p.add_argument("--no-replacement", action="store_true",
                   help="disable correction preemption (ablation)")
    p.add_argument("--speculative-depth", type=int, default=3)
    p.add_argument("--drafter-error-rate", type=float, default=0.3)
    p.add_argument("--drafter-latency", default="0")
    p.add_argument("--endpoint", default=None, help="remote planner base URL")
    p.add_argument("--budget", type=int, default=None, help="override scenario budget")
    p.add_argument("--perturbation", type=float, default=None,
                   help="override scenario perturbation rate")
    p.add_argument("--carry-cache", action="store_true",
                   help="persist per-agent caches across episodes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--price-in", type=float, default=CostModel().price_in)
    p.add_argument("--price-out", type=float, default=CostModel().price_out)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--trace", default=None,
                   help="trace JSONL path (default: report path with .jsonl)")


def cmd_run(args) -> int:
    seed = args.seed
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        seed = int(env_seed)
    scenario = _resolve_scenario(args.scenario)
    config = StrategyConfig(
        kind=args.strategy,
        planner=args.planner,
        planner_latency=LatencySpec.parse(args.planner_latency),
        error_rate=args.error_rate,
        query_period=args.query_period,
        speculative_depth=args.speculative_depth,
        drafter_error_rate=args.drafter_error_rate,
        drafter_latency=LatencySpec.parse(args.drafter_latency),
        cache_file=args.cache,
        apply_updates=not args.no_updates,
        apply_replacement=not args.no_replacement,
        cost_model=CostModel(args.price_in, args.price_out),
        endpoint=args.endpoint,
    )
    events = run_batch(
        scenario,
        config,
        seed,
        episodes=args.episodes,
        carry_cache=args.carry_cache,
        budget=args.budget,
        perturbation_rate=args.perturbation,
        workers=args.workers,
    )
    trace_path = Path(args.trace) if args.trace else Path(args.out).with_suffix(".jsonl")
    write_trace(trace_path, events)
    reports = derive_reports(events)
    meta = {
        "scenario": scenario.get("name", args.scenario),
        "strategy": args.strategy,
        "seed": seed,
        "episodes": args.episodes,
        "carry_cache": args.carry_cache,
        "config": config.to_payload(),
        "trace": str(trace_path),
    }
    write_report_json(args.out, meta, reports)
    agg = {
        "success_rate": sum(r.success for r in reports) / len(reports),
        "stall_ticks": sum(r.stall_ticks for r in reports),
        "oracle_queries": sum(r.oracle_queries for r in reports),
    }
    print(
        f"{args.strategy} on {meta['scenario']}: "
        f"SR={agg['success_rate']:.2f} stall={agg['stall_ticks']} "
        f"queries={agg['oracle_queries']} -> {args.out}"
    )
    return 0


def cmd_prefill(args) -> int:
    events = []
    for path in args.traces:
        events.extend(read_trace(path))
    schema, transitions = extract_prefill(events, success_only=args.success_only)
    cache = PlanCache(schema)
    cache.prefill(transitions)
    cache.save(args.out)
    print(f"prefilled {cache.entry_count} transitions -> {args.out}")
    return 0


def cmd_locality(args) -> int:
    events = []
    for path in args.traces:
        events.extend(read_trace(path))
    verbs, table = locality_table(events)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "locality.csv"
    write_locality_csv(csv_path, verbs, table)
    produced = [csv_path]
    if not args.no_figures and table:
        produced.append(render_locality(out_dir, verbs, table))
    print(f"locality over {len(verbs)} verbs -> " + ", ".join(str(p) for p in produced))
    return 0


def cmd_accuracy(args) -> int:
    events = read_trace(args.trace)
    series = plan_execution_accuracy(events)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_TAG + "\n")
        fh.write("frame,accuracy\n")
        for i, value in enumerate(series, start=1):
            fh.write(f"{i},{value}\n")
    print(f"{len(series)} frames -> {args.out}")
    return 0


def cmd_replay(args) -> int:
    events = read_trace(args.trace)
    reports = derive_reports(events)
    meta = {"replayed_from": str(args.trace), "episodes": len(reports)}
    if reports:
        meta.update(
            scenario=reports[0].scenario,
            strategy=reports[0].strategy,
            seed=reports[0].seed,
        )
    write_report_json(args.out, meta, reports)
    print(f"replayed {len(reports)} episode(s) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    payloads = [load_report_json(p) for p in args.reports]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_aggregate_csv(out_dir / "aggregate.csv", payloads)
    write_episodes_csv(out_dir / "episodes.csv", payloads)
    write_growth_csv(out_dir / "growth.csv", payloads)
    with open(out_dir / "aggregate.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"format": "PREPORT v1", "runs": [p["aggregate"] for p in payloads]},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    produced = ["aggregate.csv", "episodes.csv", "growth.csv", "aggregate.json"]
    if not args.no_figures:
        figures = render_report_figures(out_dir / "figures", payloads)
        produced.extend(str(p.relative_to(out_dir)) for p in figures)
    print(f"report over {len(payloads)} run(s) -> {out_dir}: " + ", ".join(produced))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plancache",
        description="plan-transition cache benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_parser(sub)

    p = sub.add_parser("prefill", help="extract a warm-start cache from traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--success-only", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("locality", help="2-gram transition table from traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("accuracy", help="plan execution accuracy series from a trace")
    p.add_argument("trace")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="rebuild the report from a trace alone")
    p.add_argument("trace")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="tables and figures from report JSONs")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "prefill": cmd_prefill,
        "locality": cmd_locality,
        "accuracy": cmd_accuracy,
        "replay": cmd_replay,
        "report": cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
