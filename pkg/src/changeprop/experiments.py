"""Scaling experiments: measure update cost against the k*log2(1+n/k) form.

One measurement cycle per (structure, n, k, seed): build the structure, cut a
random batch of k edges, then relink the same batch.  The relink restores the
exact pre-cut state (coin flips are pure), so one build serves every k.  Work
is counted as re-executed computations, not wall time; batch representative
queries on the intact tree record how many distinct query-forest nodes k
shared upward walks touch.
"""

from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .generate import structure_edges
from .rctree import RCForest
from .treecontract import DynamicForest, ForestInput

CSV_COLUMNS = [
    "n",
    "k",
    "seed",
    "rounds",
    "initial_work",
    "affected_total",
    "affected_round_0",
    "rc_nodes_touched",
    "wall_time_ms",
]


@dataclass
class StatsRow:
    n: int
    k: int
    seed: int
    rounds: int
    initial_work: int
    affected_total: int
    affected_round_0: int
    rc_nodes_touched: int
    wall_time_ms: float

    def as_list(self):
        return [
            self.n, self.k, self.seed, self.rounds, self.initial_work,
            self.affected_total, self.affected_round_0, self.rc_nodes_touched,
            self.wall_time_ms,
        ]


@dataclass
class ExperimentConfig:
    structure: str  # path | star | binary-tree | random-tree
    n: int
    batch_sizes: list[int]
    seeds: list[int]
    output: Optional[str] = None

    def validate(self):
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if any(k < 1 or k > self.n - 1 for k in self.batch_sizes):
            raise ValueError(f"batch sizes must fit the structure's {self.n - 1} edges")


@dataclass
class SeedMeasurement:
    """Everything one (structure, n, seed) contributes."""

    seed: int
    rounds: int
    initial_work: int
    rows: list[StatsRow] = field(default_factory=list)
    link_affected: dict[int, int] = field(default_factory=dict)
    link_round0: dict[int, int] = field(default_factory=dict)


def normalizer(n: int, k: int) -> float:
    return k * math.log2(1 + n / k)


def measure_seed(structure: str, n: int, batch_sizes: list[int], seed: int) -> SeedMeasurement:
    rng = random.Random(seed)
    forest = DynamicForest(ForestInput(n, structure_edges(structure, n, rng)), seed=seed)
    rc = RCForest(forest)
    out = SeedMeasurement(
        seed=seed,
        rounds=forest.trace.run_stats.rounds,
        initial_work=forest.trace.run_stats.total_computations,
    )
    for k in batch_sizes:
        # batch representative queries on the intact structure
        queries = rng.sample(range(n), k)
        rc.batch_find_representatives(queries)
        touched = rc.last_batch_nodes_touched

        batch = rng.sample(sorted(forest.edge_slots), k)
        weights = {pair: forest.edge_weight[pair] for pair in batch}
        t0 = time.perf_counter()
        cut_report = forest.batch_cut(batch)
        t_cut = time.perf_counter() - t0
        rc.refresh(cut_report)
        t0 = time.perf_counter()
        link_report = forest.batch_link([(u, v, weights[(u, v)]) for u, v in batch])
        wall_ms = (t_cut + time.perf_counter() - t0) * 1000
        rc.refresh(link_report)
        out.rows.append(
            StatsRow(
                n=n,
                k=k,
                seed=seed,
                rounds=out.rounds,
                initial_work=out.initial_work,
                affected_total=cut_report.stats.total_affected,
                affected_round_0=cut_report.stats.round0_affected,
                rc_nodes_touched=touched,
                wall_time_ms=round(wall_ms, 3),
            )
        )
        out.link_affected[k] = link_report.stats.total_affected
        out.link_round0[k] = link_report.stats.round0_affected
    return out


def measure_seed_worker(args) -> SeedMeasurement:
    return measure_seed(*args)


def ratio_summary(by_k: dict[int, list[float]], n: int) -> dict:
    """Mean normalized ratios per k, the fitted constant (their maximum), and
    the drift check: no ratio may exceed three times the median ratio."""
    means = {k: sum(vals) / len(vals) / normalizer(n, k) for k, vals in sorted(by_k.items())}
    ordered = sorted(means.values())
    median = ordered[len(ordered) // 2]
    c_star = max(means.values())
    return {
        "ratio_by_k": means,
        "c_star": c_star,
        "median_ratio": median,
        "drift_ok": all(r <= 3 * median for r in means.values()),
    }


def run_scaling(cfg: ExperimentConfig, workers: int = 1) -> tuple[list[StatsRow], dict]:
    cfg.validate()
    args = [(cfg.structure, cfg.n, cfg.batch_sizes, seed) for seed in cfg.seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            measurements = list(pool.map(measure_seed_worker, args))
    else:
        measurements = [measure_seed(*a) for a in args]
    rows = [row for m in measurements for row in m.rows]
    by_k: dict[int, list[float]] = {}
    for row in rows:
        by_k.setdefault(row.k, []).append(row.affected_total)
    summary = ratio_summary(by_k, cfg.n)
    summary["builds"] = [(m.seed, m.rounds, m.initial_work) for m in measurements]
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            _write_csv(fh, rows, summary)
    return rows, summary


def _write_csv(fh, rows: list[StatsRow], summary: Optional[dict] = None) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_list())
    if summary is not None:
        fh.write(f"# c_star={summary['c_star']:.4f} median_ratio={summary['median_ratio']:.4f} "
                 f"drift_ok={summary['drift_ok']}\n")


def rows_to_csv(rows: list[StatsRow], summary: Optional[dict] = None) -> str:
    buf = io.StringIO()
    _write_csv(buf, rows, summary)
    return buf.getvalue()
