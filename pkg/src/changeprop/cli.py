"""Command-line front end.

Subcommands: build, link, cut, query, seq, mapreduce, scale, selftest.
Exit codes: 0 success, 1 data/input errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import random
import sys
import time

from . import formats
from .engine import EngineError, check_restricted, fresh_run
from .experiments import ExperimentConfig, ratio_summary, rows_to_csv, run_scaling
from .listseq import DynamicSequence, SequenceError
from .mapreduce import mr_build, mr_query_range, mr_query_total, mr_update
from .rctree import QueryError, RCForest
from .treecontract import DynamicForest, ForestError, ForestInput
from .validate import OPS, ValidationFailure, run_trials


class DataError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")


def _load_forest(args) -> DynamicForest:
    fi = formats.parse_forest(_read(args.input))
    if getattr(args, "weights", None):
        fi.vertex_weights = formats.parse_vertex_weights(_read(args.weights))
    return DynamicForest(fi, seed=args.seed, threads=args.threads)


def _check_consistency(forest: DynamicForest) -> None:
    expect_trace, expect_store = fresh_run(forest.program, forest.trace, forest.store)
    if forest.store.values_snapshot() != expect_store.values_snapshot():
        raise DataError("consistency check failed: store differs from a fresh run")
    if forest.trace.snapshot() != expect_trace.snapshot():
        raise DataError("consistency check failed: trace differs from a fresh run")


def _apply_batches(forest: DynamicForest, rc, args) -> None:
    if not getattr(args, "batch", None):
        return
    for op, edges in formats.parse_batches(_read(args.batch)):
        report = forest.batch_link(edges) if op == "link" else forest.batch_cut(edges)
        if rc is not None:
            rc.refresh(report)
        stats = report.stats
        print(
            f"{op} k={len(edges)} affected={stats.total_affected} "
            f"round0={stats.round0_affected}"
        )
        if args.debug_consistency:
            _check_consistency(forest)


def _build_stats_line(forest: DynamicForest, fmt: str) -> str:
    stats = forest.trace.run_stats
    fields = [
        ("n", forest.n_original),
        ("internal", forest.internal_count()),
        ("edges", len(forest.edge_slots)),
        ("rounds", stats.rounds),
        ("work", stats.total_computations),
        ("seed", forest.seed),
    ]
    if fmt == "csv":
        return ",".join(str(v) for _, v in fields)
    return " ".join(f"{k}={v}" for k, v in fields)


def cmd_build(args) -> int:
    forest = _load_forest(args)
    _apply_batches(forest, None, args)
    if args.debug_consistency:
        _check_consistency(forest)
    print(_build_stats_line(forest, args.format))
    if args.restricted_report:
        report = check_restricted(forest.trace)
        print(
            f"restricted={report.restricted} max_reads={report.max_reads_per_computation} "
            f"max_writes={report.max_writes_per_computation} "
            f"max_readers={report.max_readers_per_location}"
        )
    return 0


def _pairs(values: list[int], what: str) -> list[tuple[int, int]]:
    if len(values) % 2:
        raise DataError(f"{what} expects an even number of vertex arguments")
    return [(values[i], values[i + 1]) for i in range(0, len(values), 2)]


def cmd_link(args) -> int:
    forest = _load_forest(args)
    report = forest.batch_link(_pairs(args.vertices, "link"))
    if args.debug_consistency:
        _check_consistency(forest)
    stats = report.stats
    print(f"link affected={stats.total_affected} round0={stats.round0_affected}")
    print(_build_stats_line(forest, args.format))
    return 0


def cmd_cut(args) -> int:
    forest = _load_forest(args)
    report = forest.batch_cut(_pairs(args.vertices, "cut"))
    if args.debug_consistency:
        _check_consistency(forest)
    stats = report.stats
    print(f"cut affected={stats.total_affected} round0={stats.round0_affected}")
    print(_build_stats_line(forest, args.format))
    return 0


def _run_query(rc: RCForest, query: tuple) -> str:
    kind = query[0]
    if kind == "connected":
        return "true" if rc.connected(query[1], query[2]) else "false"
    if kind == "repr":
        return str(rc.find_representative(query[1]))
    if kind == "subtree":
        return str(rc.subtree_sum(query[1], query[2]))
    result = rc.path_max(query[1], query[2])
    if result is None:
        return "none"
    weight, (u, v) = result
    return f"{weight} {u} {v}"


def cmd_query(args) -> int:
    forest = _load_forest(args)
    rc = RCForest(forest)
    _apply_batches(forest, rc, args)
    queries = []
    if args.type:
        queries.append((args.type, *args.args))
    if args.queries:
        queries.extend(formats.parse_queries(_read(args.queries)))
    if not queries:
        raise DataError("nothing to do: give --type or --queries")
    for q in queries:
        print(_run_query(rc, q))
    return 0


def _load_sequence(args) -> DynamicSequence:
    chains = formats.parse_chains(_read(args.input))
    op, _identity = OPS[args.op]
    return DynamicSequence(
        formats.chains_to_nodes(chains), op=op, seed=args.seed, threads=args.threads
    )


def cmd_seq(args) -> int:
    seq = _load_sequence(args)
    if args.seq_cmd == "build":
        stats = seq.trace.run_stats
        print(f"n={seq.n} rounds={stats.rounds} work={stats.total_computations} seed={args.seed}")
    elif args.seq_cmd == "join":
        seq.batch_join(_pairs(args.nodes, "join"))
        stats = seq.trace.last_propagation
        print(f"join affected={stats.total_affected} round0={stats.round0_affected}")
    elif args.seq_cmd == "split":
        seq.batch_split(args.nodes)
        stats = seq.trace.last_propagation
        print(f"split affected={stats.total_affected} round0={stats.round0_affected}")
    else:  # query
        u, v = args.nodes
        print(seq.query_value(u, v))
    return 0


def cmd_mapreduce(args) -> int:
    values = formats.parse_values(_read(args.input))
    op, identity = OPS[args.op]
    inst = mr_build(values, lambda x: x, op, identity, threads=args.threads)
    updates = []
    for spec_ in args.update or []:
        if "=" not in spec_:
            raise DataError(f"updates are idx=value, got {spec_!r}")
        idx, value = spec_.split("=", 1)
        updates.append((int(idx), formats._num(value)))
    if updates:
        mr_update(inst, updates)
        stats = inst.trace.last_propagation
        print(f"update affected={stats.total_affected}")
    print(f"total {mr_query_total(inst)}")
    if args.range:
        i, j = args.range
        print(f"range {mr_query_range(inst, i, j)}")
    return 0


def cmd_scale(args) -> int:
    cfg = ExperimentConfig(
        structure=args.structure,
        n=args.n,
        batch_sizes=[int(x) for x in args.k.split(",")],
        seeds=[int(x) for x in args.seeds.split(",")],
        output=args.output,
    )
    rows, summary = run_scaling(cfg, workers=args.workers)
    if args.format == "csv" and not args.output:
        sys.stdout.write(rows_to_csv(rows, summary))
    else:
        for row in rows:
            print(
                f"n={row.n} k={row.k} seed={row.seed} affected={row.affected_total} "
                f"round0={row.affected_round_0} touched={row.rc_nodes_touched} "
                f"ms={row.wall_time_ms:.1f}"
            )
        print(
            f"c_star={summary['c_star']:.3f} median_ratio={summary['median_ratio']:.3f} "
            f"drift_ok={summary['drift_ok']}"
        )
    return 0


def cmd_selftest(args) -> int:
    t0 = time.time()
    try:
        records = run_trials(args.trials, args.seed, max_n=args.max_n)
    except ValidationFailure as exc:
        print(f"selftest FAILED: {exc}")
        return 1
    by_client: dict[str, int] = {}
    for rec in records:
        by_client[rec.client] = by_client.get(rec.client, 0) + 1
    for client in sorted(by_client):
        print(f"{client}: {by_client[client]} mutations validated against oracles")
    print(f"selftest OK ({len(records)} mutations, {time.time() - t0:.1f}s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changeprop",
        description="Round-synchronous change propagation: batch-dynamic trees, sequences, map-reduce.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weights=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=["text", "csv"], default="text")
        p.add_argument("--debug-consistency", action="store_true",
                       help="compare against a from-scratch run after every mutation")
        if weights:
            p.add_argument("--weights", help="vertex weight file (lines: v w)")

    p = sub.add_parser("build", help="build a forest and print stats")
    p.add_argument("--input", required=True, help="forest file: 'n m' header then 'u v [w]' lines")
    p.add_argument("--batch", help="batch file of '+ u v [w]' and '- u v' lines")
    p.add_argument("--restricted-report", action="store_true")
    common(p)
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("link", help="insert edges: pairs of vertices")
    p.add_argument("--input", required=True)
    p.add_argument("vertices", type=int, nargs="+")
    common(p)
    p.set_defaults(fn=cmd_link)

    p = sub.add_parser("cut", help="delete edges: pairs of vertices")
    p.add_argument("--input", required=True)
    p.add_argument("vertices", type=int, nargs="+")
    common(p)
    p.set_defaults(fn=cmd_cut)

    p = sub.add_parser("query", help="connectivity / representative / subtree / path-max queries")
    p.add_argument("--input", required=True)
    p.add_argument("--batch", help="apply these updates before querying")
    p.add_argument("--type", choices=["connected", "repr", "subtree", "pathmax"])
    p.add_argument("args", type=int, nargs="*")
    p.add_argument("--queries", help="query file, one query per line")
    common(p)
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("seq", help="batch-dynamic sequences over a chains file")
    p.add_argument("--input", required=True, help="one chain per line, nodes as id:value")
    p.add_argument("--op", choices=sorted(OPS), default="sum")
    seq_sub = p.add_subparsers(dest="seq_cmd", required=True)
    sp = seq_sub.add_parser("build")
    sp = seq_sub.add_parser("join")
    sp.add_argument("nodes", type=int, nargs="+", help="tail head [tail head ...]")
    sp = seq_sub.add_parser("split")
    sp.add_argument("nodes", type=int, nargs="+", help="split after each node")
    sp = seq_sub.add_parser("query")
    sp.add_argument("nodes", type=int, nargs=2, help="u v (v at or after u)")
    common(p, weights=False)
    p.set_defaults(fn=cmd_seq)

    p = sub.add_parser("mapreduce", help="reduction over a values file")
    p.add_argument("--input", required=True)
    p.add_argument("--op", choices=sorted(OPS), required=True)
    p.add_argument("--update", action="append", metavar="IDX=VAL")
    p.add_argument("--range", type=int, nargs=2, metavar=("I", "J"))
    common(p, weights=False)
    p.set_defaults(fn=cmd_mapreduce)

    p = sub.add_parser("scale", help="update-cost scaling experiment, CSV output")
    p.add_argument("--structure", choices=["path", "star", "binary-tree", "random-tree"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", required=True, help="comma-separated batch sizes")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--output", help="CSV path")
    p.add_argument("--workers", type=int, default=1)
    common(p, weights=False)
    p.set_defaults(fn=cmd_scale)

    p = sub.add_parser("selftest", help="randomized oracle-equivalence suite")
    p.add_argument("--trials", type=int, default=200, help="mutation batches to validate")
    p.add_argument("--max-n", type=int, default=128, dest="max_n")
    common(p, weights=False)
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (
        DataError,
        formats.FormatError,
        ForestError,
        SequenceError,
        QueryError,
        EngineError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
