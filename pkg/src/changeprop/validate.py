"""Randomized end-to-end validation trials.

Each trial builds one instance (forest, chains, or array), applies random
mutation batches, and after every batch checks the two properties everything
else rests on: the propagated store and trace equal a from-scratch run
exactly, and every query kind agrees with its brute-force oracle.  Used by
the CLI selftest with small counts and by the acceptance suite with large
ones; mutation records feed the affected-count criteria.
"""

from __future__ import annotations

import math
import operator
import random
from dataclasses import dataclass
from functools import reduce

from .engine import fresh_run
from .generate import random_forest
from .listseq import DynamicSequence, build_chains
from .mapreduce import mr_build, mr_query_range, mr_query_total, mr_update
from .oracles import components, path_max_scan, subtree_sum_dfs, tree_path
from .rctree import QueryError, RCForest
from .treecontract import DynamicForest


@dataclass
class MutationRecord:
    client: str
    kind: str
    k: int
    round0_affected: int
    total_affected: int


class ValidationFailure(AssertionError):
    pass


def _check(cond, message):
    if not cond:
        raise ValidationFailure(message)


def _assert_fresh_equal(program, trace, store, context: str):
    expect_trace, expect_store = fresh_run(program, trace, store)
    _check(store.values_snapshot() == expect_store.values_snapshot(), f"{context}: store diverged")
    _check(trace.snapshot() == expect_trace.snapshot(), f"{context}: trace diverged")


def _draw_size(rng: random.Random, max_n: int) -> int:
    return max(1, int(math.exp(rng.uniform(0, math.log(max_n)))))


def tree_trial(rng: random.Random, seed: int, max_n: int, mutations: int, queries: int):
    """One weighted forest, `mutations` random link/cut batches."""
    n = max(2, _draw_size(rng, max_n))
    fi = random_forest(n, rng, keep_prob=rng.uniform(0.4, 0.95), weighted=True)
    forest = DynamicForest(fi, seed=seed)
    rc = RCForest(forest)
    records = []
    present = set(forest.edge_slots)
    for _ in range(mutations):
        if present and (rng.random() < 0.5 or len(present) == n - 1):
            k = rng.randint(1, min(6, len(present)))
            batch = rng.sample(sorted(present), k)
            report = forest.batch_cut(batch)
            present -= set(batch)
            kind = "cut"
        else:
            labels = components(n, sorted(present))
            batch = []
            for _ in range(rng.randint(1, 6)):
                u, v = rng.randrange(n), rng.randrange(n)
                pair = (min(u, v), max(u, v))
                if u != v and labels[u] != labels[v] and pair not in present:
                    batch.append((u, v, rng.randint(-50, 50)))
                    keep, gone = labels[u], labels[v]
                    labels = [keep if c == gone else c for c in labels]
                    present.add(pair)
            if not batch:
                continue
            report = forest.batch_link(batch)
            kind = "link"
        _assert_fresh_equal(forest.program, forest.trace, forest.store, f"tree {kind}")
        rc.refresh(report)
        records.append(
            MutationRecord("tree", kind, len(batch), report.stats.round0_affected, report.stats.total_affected)
        )
        _tree_queries(rng, forest, rc, queries)
    return records


def _tree_queries(rng: random.Random, forest: DynamicForest, rc: RCForest, count: int):
    fi = forest.current_forest()
    n = fi.n
    labels = components(n, fi.edges)
    weight = {(min(u, v), max(u, v)): w for u, v, w in fi.normalized_edges()}
    pairs = [(rng.randrange(n), rng.randrange(n)) for _ in range(count)]
    got = rc.batch_connected(pairs)
    for (u, v), ans in zip(pairs, got):
        _check(ans == (labels[u] == labels[v]), f"connectivity mismatch at ({u}, {v})")
    for u, v in pairs:
        if labels[u] != labels[v]:
            for fn in (rc.subtree_sum, rc.path_max):
                try:
                    fn(u, v)
                    raise ValidationFailure(f"{fn.__name__} accepted disconnected ({u}, {v})")
                except QueryError:
                    pass
            continue
        expect = subtree_sum_dfs(n, fi.edges, fi.vertex_weights, u, v)
        _check(rc.subtree_sum(u, v) == expect, f"subtree mismatch at root={u} sub={v}")
        if u == v:
            _check(rc.path_max(u, v) is None, "non-empty answer for empty path")
        else:
            expect = path_max_scan(n, fi.edges, weight, u, v)
            got_pm = rc.path_max(u, v)
            _check(
                got_pm is not None and got_pm[0] == expect[0] and weight.get(got_pm[1]) == expect[0]
                and got_pm[1] in set(tree_path(n, fi.edges, u, v)),
                f"path-max mismatch at ({u}, {v})",
            )


def list_trial(rng: random.Random, seed: int, max_n: int, mutations: int, queries: int):
    n = max(1, _draw_size(rng, max_n))
    cut_points = sorted(rng.sample(range(1, n), rng.randint(0, min(4, n - 1))) if n > 1 else [])
    values = [rng.randint(-50, 50) for _ in range(n)]
    chains = []
    last = 0
    for c in cut_points + [n]:
        chains.append(values[last:c])
        last = c
    seq, ids = build_chains(chains, op=operator.add, seed=seed)
    model = {u: values[u] for u in range(n)}  # build_chains numbers nodes 0..n-1 in order
    records = []
    for _ in range(mutations):
        action = rng.choice(["split", "join", "update"])
        if action == "split":
            cands = [u for u in range(n) if seq.r0[u] is not None]
            if not cands:
                continue
            batch = rng.sample(cands, rng.randint(1, min(5, len(cands))))
            seq.batch_split(batch)
            k = len(batch)
        elif action == "join":
            tails = [u for u in range(n) if seq.r0[u] is None]
            heads = {u for u in range(n) if seq.l0[u] is None}
            rng.shuffle(tails)
            joins = []
            taken = set()
            leader: dict = {}

            def find(x):
                while leader.get(x, x) != x:
                    x = leader[x]
                return x

            for t in tails[: rng.randint(1, 4)]:
                rt = find(seq.representative(t))
                options = [h for h in heads if h not in taken and find(seq.representative(h)) != rt]
                if not options:
                    continue
                h = rng.choice(options)
                taken.add(h)
                joins.append((t, h))
                leader[find(seq.representative(h))] = rt
            if not joins:
                continue
            seq.batch_join(joins)
            k = len(joins)
        else:
            batch = {rng.randrange(n): rng.randint(-50, 50) for _ in range(rng.randint(1, 4))}
            seq.batch_update_value(batch.items())
            model.update(batch)
            k = len(batch)
        _assert_fresh_equal(seq.program, seq.trace, seq.store, f"list {action}")
        records.append(
            MutationRecord("list", action, k, seq.trace.last_propagation.round0_affected,
                           seq.trace.last_propagation.total_affected)
        )
        _list_queries(rng, seq, model, queries)
    return records


def _current_chains(seq: DynamicSequence):
    out = []
    for h in range(seq.n):
        if seq.l0[h] is None:
            row, v = [], h
            while v is not None:
                row.append(v)
                v = seq.r0[v]
            out.append(row)
    return out


def _list_queries(rng: random.Random, seq: DynamicSequence, model: dict, count: int):
    chains = _current_chains(seq)
    rep_of = {}
    for row in chains:
        rep = seq.representative(row[0])
        for u in row:
            _check(seq.representative(u) == rep, f"representatives differ within a list at {u}")
            rep_of[u] = rep
    for _ in range(count):
        row = rng.choice(chains)
        i = rng.randrange(len(row))
        j = rng.randrange(i, len(row))
        expect = reduce(seq.op, [model[u] for u in row[i : j + 1]])
        _check(seq.query_value(row[i], row[j]) == expect, f"fold mismatch {row[i]}..{row[j]}")
    if len(chains) > 1:
        a, b = rng.sample(range(len(chains)), 2)
        u, v = chains[a][0], chains[b][0]
        _check(not seq.same_list(u, v), f"{u} and {v} wrongly in the same list")


OPS = {"sum": (operator.add, 0), "max": (max, float("-inf")), "min": (min, float("inf"))}


def array_trial(rng: random.Random, seed: int, max_n: int, mutations: int, queries: int):
    n = _draw_size(rng, max_n)
    op_name = rng.choice(sorted(OPS))
    op, identity = OPS[op_name]
    values = [rng.randint(-1000, 1000) for _ in range(n)]
    inst = mr_build(values, lambda x: x, op, identity)
    records = []
    for _ in range(mutations):
        batch = {rng.randrange(n): rng.randint(-1000, 1000) for _ in range(rng.randint(1, 4))}
        mr_update(inst, batch.items())
        for idx, v in batch.items():
            values[idx] = v
        _assert_fresh_equal(inst.program, inst.trace, inst.store, "array update")
        records.append(
            MutationRecord("array", "update", len(batch), inst.trace.last_propagation.round0_affected,
                           inst.trace.last_propagation.total_affected)
        )
        _check(mr_query_total(inst) == reduce(op, values, identity), "total mismatch")
        for _ in range(queries):
            i = rng.randrange(n)
            j = rng.randrange(i, n)
            _check(mr_query_range(inst, i, j) == reduce(op, values[i : j + 1]), f"range mismatch {i}..{j}")
    return records


def run_trials(
    mutation_target: int,
    seed: int,
    max_n: int = 256,
    queries: int = 6,
    mix=(0.4, 0.3, 0.3),
) -> list[MutationRecord]:
    """Run randomized trials until at least mutation_target mutations have
    been validated; returns the per-mutation records."""
    rng = random.Random(seed)
    records: list[MutationRecord] = []
    goals = [int(mutation_target * share) for share in mix]
    goals[0] += mutation_target - sum(goals)
    trials = [tree_trial, list_trial, array_trial]
    for goal, trial in zip(goals, trials):
        done = 0
        while done < goal:
            batch = trial(rng, rng.randrange(1 << 30), max_n, mutations=4, queries=queries)
            done += len(batch)
            records.extend(batch)
    return records


def trial_worker(args) -> list[MutationRecord]:
    """Top-level entry point so process pools can run trial chunks."""
    mutation_target, seed, max_n, queries = args
    return run_trials(mutation_target, seed, max_n=max_n, queries=queries)
