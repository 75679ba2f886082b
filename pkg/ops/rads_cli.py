#!/usr/bin/env python3
"""
RADS command line

Partition a graph, inspect execution plans, run the distributed enumerator
and check it against the single-machine oracle.

Usage:
    # Split a graph into 4 partition views (hash partitioner, or a METIS part file)
    python -m ops.rads_cli partition --graph g.txt --machines 4 --out parts/
    python -m ops.rads_cli partition --graph g.txt --machines 4 --metis g.part.4 --out parts/

    # Show the selected execution plan
    python -m ops.rads_cli plan --pattern p-star

    # Enumerate over the partition views (loopback threads or TCP sockets)
    python -m ops.rads_cli run --pattern triangle --parts parts/ --json
    python -m ops.rads_cli run --pattern triangle --parts parts/ --transport tcp --hosts hosts.txt

    # One worker of a multi-process TCP run
    python -m ops.rads_cli worker --pattern triangle --parts parts/ --worker-id 0 --hosts hosts.txt

    # Brute-force count on the whole graph
    python -m ops.rads_cli oracle --pattern square --graph g.txt

    # Partition in memory, run, compare with the oracle
    python -m ops.rads_cli verify --pattern p-star --machines 4 --seed 3

Exit codes: 0 success, 1 mismatch or run failure, 2 usage / parse error.
"""

import argparse
import json
import sys
from typing import Dict, Iterable, List, Optional

import networkx as nx
import pandas as pd

from enumeration.single_machine import Embedding, oracle_enumerate
from graph.pattern import QueryPattern, load_pattern
from ingestion.partitioner_io import (
    describe_partition,
    edge_count,
    graph_from_networkx,
    hash_partition,
    load_graph,
    load_metis_partition,
    load_ownership,
    load_partition_view,
    load_partition_views,
    load_renumber_map,
    partition_in_memory,
    write_partition_views,
)
from planner.execution_plan import ExecutionPlan, in_matching_order, plan_for_strategy, render_plan
from transport.tcp import load_hosts
from utils.audit_logger import AuditLogger
from utils.config import PLAN_STRATEGIES, Settings, load_settings
from utils.errors import (
    ConfigError,
    GraphError,
    PartitionIOError,
    PatternError,
    PlanError,
    RadsError,
)
from utils.logging_utils import configure_root
from workers.cluster import ClusterResult, run_loopback_cluster, run_tcp_cluster, run_tcp_worker
from workers.rmeef_worker import WorkerConfig, select_worker_plan

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2

# errors caused by the user's inputs rather than by the run
INPUT_ERRORS = (ConfigError, GraphError, PartitionIOError, PatternError, PlanError, OSError, ValueError)


# =============================================================================
# HELPERS
# =============================================================================

def _settings(args) -> Settings:
    overrides = {
        "rho": getattr(args, "rho", None),
        "memory_budget": getattr(args, "memory_budget", None),
        "cache_budget": getattr(args, "cache_budget", None),
        "transport": getattr(args, "transport", None),
        "emit": getattr(args, "emit", None),
        "seed": getattr(args, "seed", None),
        "hosts_file": getattr(args, "hosts", None),
        "plan_strategy": getattr(args, "plan_strategy", None),
        "log_level": getattr(args, "log_level", None),
    }
    return load_settings(args.config, overrides)


def _worker_config(settings: Settings, args) -> WorkerConfig:
    return WorkerConfig.from_settings(settings, skip_verify=getattr(args, "skip_verify", False))


def _banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def _print_embeddings(p: QueryPattern, plan: ExecutionPlan, embeddings: Iterable[Embedding],
                      relabel: Optional[Dict[int, int]] = None):
    """One row per embedding, columns in the plan's matching order."""
    print("# " + " ".join(f"u{u}" for u in plan.matching_order))
    rows = sorted(in_matching_order(plan, p, embedding) for embedding in embeddings)
    for row in rows:
        if relabel:
            row = tuple(relabel.get(v, v) for v in row)
        print(" ".join(str(v) for v in row))


def _worker_table(result: ClusterResult) -> pd.DataFrame:
    rows = []
    for r in result.reports:
        rows.append({
            "machine": r.machine_id,
            "count": r.count,
            "sme": r.sme_count,
            "rmeef": r.rmeef_count,
            "groups": r.groups_created,
            "stolen": r.groups_stolen,
            "given": r.groups_given_away,
            "rounds": r.rounds,
            "peak_nodes": r.peak_trie_nodes,
            "compression": round(r.compression_ratio, 3),
            "requests": sum(r.messages.get("requests", {}).values()),
        })
    return pd.DataFrame(rows)


def _json_summary(result: ClusterResult) -> Dict:
    summary = result.summary()
    summary["per_worker"] = [r.to_dict() for r in result.reports]
    summary["peak_trie_nodes"] = max((r.peak_trie_nodes for r in result.reports), default=0)
    return summary


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_partition(args) -> int:
    graph = load_graph(args.graph)
    if args.metis:
        ownership = load_metis_partition(args.metis, graph)
        if max(ownership.values(), default=0) >= args.machines:
            raise PartitionIOError(f"{args.metis} uses more than {args.machines} parts")
    else:
        ownership = hash_partition(graph, args.machines)

    files = write_partition_views(graph, ownership, args.out, machines=args.machines)
    views = load_partition_views(args.out)

    _banner(f"Partitioned {args.graph} into {args.machines} views")
    print(f"Vertices: {len(graph):,}  Edges: {edge_count(graph):,}")
    print(describe_partition(views).to_string(index=False))
    print(f"\nWrote {len(files.machine_files)} view files + {files.ownership_file.name} to {files.out_dir}")
    return EXIT_OK


def cmd_plan(args) -> int:
    settings = _settings(args)
    p = load_pattern(args.pattern)
    plan = plan_for_strategy(p, settings.plan_strategy, settings.rho, settings.mlst_search_limit, settings.seed)
    if args.json:
        print(json.dumps({
            "units": [
                {"piv": u.piv, "leaves": list(u.leaves), "star": sorted(u.e_star),
                 "sib": sorted(u.e_sib), "cro": sorted(u.e_cro)}
                for u in plan.units
            ],
            "matching_order": list(plan.matching_order),
            "constraints": sorted(plan.constraints.pairs),
            "strategy": settings.plan_strategy,
        }, indent=2))
    else:
        print(render_plan(plan, p))
    return EXIT_OK


def _report_run(args, p: QueryPattern, result: ClusterResult, relabel: Optional[Dict[int, int]] = None):
    if args.json:
        print(json.dumps(_json_summary(result), indent=2, default=str))
    elif result.embeddings is not None:
        _print_embeddings(p, result.plan, result.embeddings, relabel)
    else:
        _banner(f"Embeddings: {result.count:,}")
        print(_worker_table(result).to_string(index=False))


def cmd_run(args) -> int:
    settings = _settings(args)
    cfg = _worker_config(settings, args)
    p = load_pattern(args.pattern)
    views = load_partition_views(args.parts, cfg.cache_budget)
    if args.workers is not None and args.workers != len(views):
        raise ConfigError(f"--workers {args.workers} but {args.parts} holds {len(views)} partition views")

    AuditLogger.log_run_event("CLI_RUN", metadata={"pattern": args.pattern, "machines": len(views)})
    if settings.transport == "tcp":
        hosts = load_hosts(settings.hosts_file) if settings.hosts_file else None
        result = run_tcp_cluster(views, p, cfg, timeout_s=settings.request_timeout_s, hosts=hosts)
    else:
        result = run_loopback_cluster(views, p, cfg, timeout_s=settings.request_timeout_s)

    _report_run(args, p, result, load_renumber_map(args.parts))
    return EXIT_OK


def cmd_worker(args) -> int:
    settings = _settings(args)
    cfg = _worker_config(settings, args)
    if not settings.hosts_file:
        raise ConfigError("worker needs --hosts (or [transport] hosts_file)")
    hosts = load_hosts(settings.hosts_file)
    p = load_pattern(args.pattern)
    ownership = load_ownership(args.parts)
    pv = load_partition_view(args.parts, args.worker_id, cfg.cache_budget, ownership)

    plan = select_worker_plan(p, cfg)
    result = run_tcp_worker(pv, p, cfg, hosts, timeout_s=settings.request_timeout_s,
                            done_timeout_s=settings.done_timeout_s,
                            connect_retry_s=settings.connect_retry_s, plan=plan)
    if args.json:
        print(json.dumps(result.report.to_dict(), indent=2, default=str))
    elif result.embeddings is not None:
        _print_embeddings(p, plan, result.embeddings, load_renumber_map(args.parts))
    else:
        print(f"machine {args.worker_id}: {result.count}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    settings = _settings(args)
    p = load_pattern(args.pattern)
    graph = load_graph(args.graph)
    embeddings = oracle_enumerate(graph, p)
    if settings.emit == "results":
        plan = plan_for_strategy(p, settings.plan_strategy, settings.rho, settings.mlst_search_limit, settings.seed)
        _print_embeddings(p, plan, embeddings)
    else:
        print(len(embeddings))
    return EXIT_OK


def _verify_graph(args, settings: Settings):
    if args.graph:
        return load_graph(args.graph)
    g = nx.gnm_random_graph(args.vertices, args.edges, seed=settings.seed)
    return graph_from_networkx(g)


def cmd_verify(args) -> int:
    settings = _settings(args)
    cfg = WorkerConfig.from_settings(settings, emit="results", skip_verify=args.skip_verify)
    p = load_pattern(args.pattern)
    graph = _verify_graph(args, settings)

    ownership = load_metis_partition(args.metis, graph) if args.metis else hash_partition(graph, args.machines)
    views = partition_in_memory(graph, ownership, cfg.cache_budget, machines=args.machines)
    result = run_loopback_cluster(views, p, cfg, timeout_s=settings.request_timeout_s)
    expected = oracle_enumerate(graph, p)

    found = result.embedding_set()
    duplicates = result.count - len(found)
    missing = expected - found
    extra = found - expected
    passed = not missing and not extra and duplicates == 0

    if args.json:
        summary = _json_summary(result)
        summary.update({"expected": len(expected), "missing": len(missing), "extra": len(extra),
                        "duplicates": duplicates, "passed": passed})
        print(json.dumps(summary, indent=2, default=str))
    else:
        _banner(f"Verification: {'PASSED' if passed else 'FAILED'}")
        print(f"Pattern: {args.pattern}  Machines: {args.machines}")
        print(f"Graph: {len(graph):,} vertices, {edge_count(graph):,} edges")
        print(f"Oracle: {len(expected):,}  Distributed: {result.count:,}")
        if missing:
            print(f"  [FAIL] {len(missing)} embeddings missing, e.g. {min(missing)}")
        if extra:
            print(f"  [FAIL] {len(extra)} embeddings not in the oracle, e.g. {min(extra)}")
        if duplicates:
            print(f"  [FAIL] {duplicates} embeddings reported more than once")

    return EXIT_OK if passed else EXIT_MISMATCH


# =============================================================================
# CLI
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML settings file (default config/config.toml)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    common.add_argument("--json", action="store_true", help="Machine-readable summary on stdout")

    tuning = argparse.ArgumentParser(add_help=False)
    tuning.add_argument("--rho", type=float, help="Round weight exponent of the plan score")
    tuning.add_argument("--memory-budget", type=int, help="Bytes per region group; 0 = unbounded")
    tuning.add_argument("--cache-budget", type=int, help="Bytes of cached foreign adjacency; 0 = unbounded")
    tuning.add_argument("--emit", choices=["count", "results"])
    tuning.add_argument("--plan-strategy", choices=list(PLAN_STRATEGIES),
                        help="rads (scored), ranm (random minimum-round) or rans (random stars)")
    tuning.add_argument("--skip-verify", action="store_true",
                        help="Test only: treat undetermined edges as present")

    parser = argparse.ArgumentParser(description="RADS distributed subgraph enumeration")
    subparsers = parser.add_subparsers(dest="command", help="Command")

    p_parser = subparsers.add_parser("partition", parents=[common], help="Split a graph into partition views")
    p_parser.add_argument("--graph", required=True, help="Adjacency-list graph file")
    p_parser.add_argument("--machines", type=int, required=True)
    p_parser.add_argument("--metis", help="METIS part file (default: hash partition)")
    p_parser.add_argument("--out", required=True, help="Output directory")

    plan_parser = subparsers.add_parser("plan", parents=[common], help="Show the selected execution plan")
    plan_parser.add_argument("--pattern", required=True, help="Pattern file or named pattern")
    plan_parser.add_argument("--rho", type=float)
    plan_parser.add_argument("--plan-strategy", choices=list(PLAN_STRATEGIES))
    plan_parser.add_argument("--seed", type=int, help="Seed for the random strategies")

    r_parser = subparsers.add_parser("run", parents=[common, tuning], help="Enumerate over partition views")
    r_parser.add_argument("--pattern", required=True)
    r_parser.add_argument("--parts", required=True, help="Directory written by 'partition'")
    r_parser.add_argument("--workers", type=int, help="Expected number of partition views")
    r_parser.add_argument("--transport", choices=["loopback", "tcp"])
    r_parser.add_argument("--hosts", help="Hosts file for --transport tcp (default: ephemeral local ports)")
    r_parser.add_argument("--seed", type=int, help="Seed for the random plan strategies")

    w_parser = subparsers.add_parser("worker", parents=[common, tuning], help="Run one worker of a TCP cluster")
    w_parser.add_argument("--pattern", required=True)
    w_parser.add_argument("--parts", required=True)
    w_parser.add_argument("--worker-id", type=int, required=True)
    w_parser.add_argument("--hosts", help="Hosts file: 'machine_id host:port' per line")
    w_parser.add_argument("--seed", type=int, help="Seed for the random plan strategies; must match across workers")

    o_parser = subparsers.add_parser("oracle", parents=[common], help="Single-machine brute-force enumeration")
    o_parser.add_argument("--pattern", required=True)
    o_parser.add_argument("--graph", required=True)
    o_parser.add_argument("--emit", choices=["count", "results"])

    v_parser = subparsers.add_parser("verify", parents=[common, tuning], help="Run in memory and compare with the oracle")
    v_parser.add_argument("--pattern", required=True)
    v_parser.add_argument("--graph", help="Graph file (default: seeded random graph)")
    v_parser.add_argument("--machines", type=int, default=2)
    v_parser.add_argument("--metis", help="METIS part file for --graph")
    v_parser.add_argument("--vertices", type=int, default=60, help="Random graph vertex count")
    v_parser.add_argument("--edges", type=int, default=240, help="Random graph edge count")
    v_parser.add_argument("--seed", type=int, help="Random graph seed")

    return parser


COMMANDS = {
    "partition": cmd_partition,
    "plan": cmd_plan,
    "run": cmd_run,
    "worker": cmd_worker,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_USAGE

    try:
        level = args.log_level or load_settings(args.config).log_level
        configure_root(level)
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RadsError as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
