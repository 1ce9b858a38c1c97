"""Batch-dynamic undirected tree contraction.

Each round, every live vertex either finalizes (isolated), rakes (a leaf
merging into its neighbour, lower id winning between adjacent leaves),
compresses (degree two, both neighbours non-leaves, heads while both
neighbours tail), or stays alive and republishes its adjacency for the next
round.  Adjacency is held in fixed arrays of three slots per vertex; every
entry carries the neighbour, the back-position of this vertex in the
neighbour's array, and the compress bypass tag, so slot updates are O(1) and
every next-round slot has exactly one writer.

Arbitrary-degree forests are handled by splitting each high-degree vertex
into a chain of internal vertices (one per neighbour).  Chains grow lazily as
links arrive and never shrink.  Adjacency slot, leaf flag, and death-round cells are keyed by
packed ints (see adj_key, leaf_key, death_key).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .coins import CoinOracle
from .engine import CellStore, Program, PropagationDelta, PropagationStats, Trace, propagate, run

T_SLOTS = 3


class ForestError(ValueError):
    pass


@dataclass
class ForestInput:
    """An undirected forest: ``edges`` entries are (u, v) or (u, v, weight)."""

    n: int
    edges: list = field(default_factory=list)
    vertex_weights: Optional[dict] = None

    def normalized_edges(self) -> list[tuple[int, int, Any]]:
        out = []
        for e in self.edges:
            if len(e) == 2:
                u, v = e
                w = None
            else:
                u, v, w = e
            out.append((u, v, w))
        return out

    def validate(self) -> None:
        leader = list(range(self.n))

        def find(x):
            while leader[x] != x:
                leader[x] = leader[leader[x]]
                x = leader[x]
            return x

        seen = set()
        for u, v, _ in self.normalized_edges():
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ForestError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ForestError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ForestError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            ru, rv = find(u), find(v)
            if ru == rv:
                raise ForestError(f"edges contain a cycle through ({u}, {v})")
            leader[ru] = rv


@dataclass
class DegreeReductionMap:
    original_to_chain: list[list[int]]
    internal_to_original: list[int]


@dataclass
class UpdateReport:
    """What one batch link/cut did, for instrumentation and query-layer upkeep."""

    stats: Optional[PropagationStats] = None
    dirty_vertices: set[int] = field(default_factory=set)
    added_edges: set[tuple[int, int]] = field(default_factory=set)
    removed_edges: set[tuple[int, int]] = field(default_factory=set)
    added_vertices: set[int] = field(default_factory=set)


# Cell keys are packed ints (cheaper to build and hash than tuples in the
# per-round hot path): vertex << 14 | slot << 12 | round << 2 | kind, with
# kind 0 = adjacency slot, 1 = leaf flag, 2 = death round.  Rounds therefore
# must stay below 1 << 10, far above any contraction this engine finishes.
_ROUND_LIMIT = (1 << 10) - 2


def adj_key(i: int, u: int, j: int) -> int:
    return (u << 14) | (j << 12) | (i << 2)


def leaf_key(i: int, u: int) -> int:
    return (u << 14) | (i << 2) | 1


def death_key(u: int) -> int:
    return (u << 14) | 2


def _describe_key(key: int) -> str:
    kind = key & 3
    u = key >> 14
    i = (key >> 2) & 0x3FF
    if kind == 0:
        return f"A[{i}][{u}][{(key >> 12) & 3}]"
    if kind == 1:
        return f"leaf[{i}][{u}]"
    return f"D[{u}]"


def _reduced_chains(forest: ForestInput):
    """Chain layout shared by reduce_degree and DynamicForest: vertices of
    degree > 3 become one chain vertex per neighbour, others stay single."""
    edges = forest.normalized_edges()
    degree = [0] * forest.n
    for u, v, _ in edges:
        degree[u] += 1
        degree[v] += 1
    chains = [[u] for u in range(forest.n)]
    owner = list(range(forest.n))
    next_id = forest.n
    for u in range(forest.n):
        if degree[u] > T_SLOTS:
            for _ in range(degree[u] - 1):
                chains[u].append(next_id)
                owner.append(u)
                next_id += 1
    return edges, degree, chains, owner, next_id


def reduce_degree(forest: ForestInput) -> tuple[ForestInput, DegreeReductionMap]:
    """Split every vertex of degree > 3 into a chain, one vertex per
    neighbour.  Chain edges carry no weight; the original vertex id serves as
    the first chain vertex, so vertex weights stay where they were."""
    forest.validate()
    edges, degree, chains, owner, next_id = _reduced_chains(forest)
    out_edges: list[tuple[int, int, Any]] = []
    for u in range(forest.n):
        for a, b in zip(chains[u], chains[u][1:]):
            out_edges.append((a, b, None))
    cursor = [0] * forest.n

    def attach(u: int) -> int:
        if degree[u] <= T_SLOTS:
            return u
        iu = chains[u][cursor[u]]
        cursor[u] += 1
        return iu

    for u, v, w in edges:
        out_edges.append((attach(u), attach(v), w))
    reduced = ForestInput(next_id, out_edges, dict(forest.vertex_weights or {}))
    return reduced, DegreeReductionMap(chains, owner)


class DynamicForest:
    """Tree contraction record maintained under batches of links and cuts.

    Public vertex ids are the original 0..n-1; internal ids at n and above
    are chain vertices introduced by degree reduction.  Chain vertices use
    slot 0 for the previous link, slot 1 for the next link, and slot 2 for
    their one real edge; unsplit vertices use all three slots freely.
    """

    def __init__(self, forest: ForestInput, seed: int = 0, threads: int = 1):
        forest.validate()
        self.n_original = forest.n
        self.coins = CoinOracle(seed)
        self.seed = seed
        self.threads = threads
        self.vertex_weight = dict(forest.vertex_weights or {})

        edges, degree, self.chains, self.owner, next_id = _reduced_chains(forest)
        self.adj0: list[list] = [[None] * T_SLOTS for _ in range(next_id)]
        self.edge_slots: dict[tuple[int, int], tuple[int, int, int, int]] = {}
        self.edge_weight: dict[tuple[int, int], Any] = {}
        for u in range(forest.n):
            chain = self.chains[u]
            for a, b in zip(chain, chain[1:]):
                self.adj0[a][1] = (b, 0, None)
                self.adj0[b][0] = (a, 1, None)
        self._cursor = {u: 0 for u in range(forest.n) if len(self.chains[u]) > 1}
        for u, v, w in edges:
            self._place_edge(u, v, w, None, None)
        self._cursor = None

        self.store = CellStore()
        self.program = Program(self._compute_round, "tree-contraction", _describe_key)
        for iu in range(len(self.adj0)):
            self._install_vertex_cells(iu)
        self.trace: Trace = run(self.program, range(len(self.adj0)), self.store, threads=threads)

    # -- slot management ------------------------------------------------------

    def _new_internal(self, orig: int) -> int:
        iu = len(self.adj0)
        self.adj0.append([None] * T_SLOTS)
        self.owner.append(orig)
        self.chains[orig].append(iu)
        return iu

    def _edge_pair(self, a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _set_slot(self, iu: int, j: int, entry, changes: Optional[set]) -> None:
        self.adj0[iu][j] = entry
        if changes is not None:
            changes.add((iu, j))

    def _free_slot(self, orig: int, changes: Optional[set], log: Optional["UpdateReport"]) -> tuple[int, int]:
        chain = self.chains[orig]
        if len(chain) == 1:
            anchor = chain[0]
            row = self.adj0[anchor]
            for j in range(T_SLOTS):
                if row[j] is None:
                    return anchor, j
            self._restructure(orig, changes, log)
        else:
            if self._cursor is not None and orig in self._cursor:
                # build time: chains are pre-sized with one slot per edge
                iu = chain[self._cursor[orig]]
                self._cursor[orig] += 1
                return iu, 2
            for iu in chain:
                if self.adj0[iu][2] is None:
                    return iu, 2
        # chain full (or just restructured): grow it by one vertex
        chain = self.chains[orig]
        last = chain[-1]
        iu = self._new_internal(orig)
        self._set_slot(last, 1, (iu, 0, None), changes)
        self.adj0[iu][0] = (last, 1, None)
        if log is not None:
            log.added_edges.add(self._edge_pair(last, iu))
        return iu, 2

    def _restructure(self, orig: int, changes: Optional[set], log: Optional["UpdateReport"]) -> None:
        """Convert a full unsplit vertex into a canonical chain (one edge per
        chain vertex), rewriting the moved edges' back-positions."""
        entries = list(self.adj0[orig])
        c1 = self._new_internal(orig)
        c2 = self._new_internal(orig)
        self._set_slot(orig, 0, None, changes)
        self._set_slot(orig, 1, (c1, 0, None), changes)
        self.adj0[c1][0] = (orig, 1, None)
        self.adj0[c1][1] = (c2, 0, None)
        self.adj0[c2][0] = (c1, 1, None)
        if log is not None:
            log.added_edges.add(self._edge_pair(orig, c1))
            log.added_edges.add(self._edge_pair(c1, c2))
        for entry, (target, slot) in zip(entries, ((orig, 2), (c1, 2), (c2, 2))):
            v, p, via = entry
            self._set_slot(target, slot, (v, p, via), changes)
            self._set_slot(v, p, (target, slot, via), changes)
            pair = self._edge_pair(orig, self.owner[v])
            iu, ju, iv, jv = self.edge_slots[pair]
            if (iu, ju) in ((orig, 0), (orig, 1), (orig, 2)):
                self.edge_slots[pair] = (target, slot, iv, jv)
            else:
                self.edge_slots[pair] = (iu, ju, target, slot)
            if log is not None and target != orig:
                log.removed_edges.add(self._edge_pair(orig, v))
                log.added_edges.add(self._edge_pair(target, v))

    def _place_edge(
        self, u: int, v: int, w: Any, changes: Optional[set], log: Optional["UpdateReport"]
    ) -> None:
        iu, ju = self._free_slot(u, changes, log)
        iv, jv = self._free_slot(v, changes, log)
        self._set_slot(iu, ju, (iv, jv, None), changes)
        self._set_slot(iv, jv, (iu, ju, None), changes)
        pair = self._edge_pair(u, v)
        self.edge_slots[pair] = (iu, ju, iv, jv)
        self.edge_weight[pair] = w
        if log is not None:
            log.added_edges.add(self._edge_pair(iu, iv))

    def _degree(self, iu: int) -> int:
        row = self.adj0[iu]
        return (row[0] is not None) + (row[1] is not None) + (row[2] is not None)

    def _install_vertex_cells(self, iu: int) -> None:
        row = self.adj0[iu]
        store = self.store
        base = iu << 14
        store.install_input(base, row[0])
        store.install_input(base | (1 << 12), row[1])
        store.install_input(base | (2 << 12), row[2])
        store.install_input(base | 1, self._degree(iu) == 1)

    # -- the round computation --------------------------------------------------

    def _compute_round(self, i: int, u: int, h) -> None:
        if i > _ROUND_LIMIT:
            raise ForestError(f"contraction exceeded {_ROUND_LIMIT} rounds")
        read = h.read
        write = h.write
        here = (u << 14) | (i << 2)
        e0 = read(here)
        e1 = read(here | (1 << 12))
        e2 = read(here | (2 << 12))
        leaf = read(here | 1)
        # explicit degree dispatch: first holds the sole entry of a leaf, or
        # with second the two entries of a degree-2 vertex
        if e0 is not None:
            if e1 is not None:
                first, second = (e0, e1) if e2 is None else (e0, None)
            elif e2 is not None:
                first, second = e0, e2
            else:
                first, second = e0, None
        elif e1 is not None:
            first, second = (e1, e2) if e2 is not None else (e1, None)
        elif e2 is not None:
            first, second = e2, None
        else:
            write((u << 14) | 2, i)  # finalize
            h.retire()
            return
        if leaf:
            v, p, via = first
            if (not read((v << 14) | (i << 2) | 1)) or u < v:
                write((v << 14) | (p << 12) | ((i + 1) << 2), None)  # rake into v
                write((u << 14) | 2, i)
                h.retire()
                return
        elif second is not None:
            v, p, via = first
            v2, p2, via2 = second
            heads = self.coins.heads
            if (
                not read((v << 14) | (i << 2) | 1)
                and not read((v2 << 14) | (i << 2) | 1)
                and heads(i, u)
                and not heads(i, v)
                and not heads(i, v2)
            ):
                # compress: the two neighbours bypass through u
                write((v << 14) | (p << 12) | ((i + 1) << 2), (v2, p2, u))
                write((v2 << 14) | (p2 << 12) | ((i + 1) << 2), (v, p, u))
                write((u << 14) | 2, i)
                h.retire()
                return
        # stay alive: republish each incident entry into the neighbour's slot
        inext = (i + 1) << 2
        nonleaves = 0
        j = 0
        for e in (e0, e1, e2):
            if e is None:
                write((u << 14) | (j << 12) | inext, None)
            else:
                v, p, via = e
                write((v << 14) | (p << 12) | inext, (u, j, via))
                if not read((v << 14) | (i << 2) | 1):
                    nonleaves += 1
            j += 1
        write((u << 14) | inext | 1, nonleaves == 1)

    # -- batch updates -------------------------------------------------------------

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n_original:
            raise ForestError(f"unknown vertex {v}")

    def _finish_update(self, changes: set, added_vertices: set) -> PropagationStats:
        changed_keys = set()
        touched = set()
        for iu, j in changes:
            touched.add(iu)
            if iu in added_vertices:
                continue  # fresh cells were installed, not rewritten
            key = adj_key(0, iu, j)
            if self.store.rewrite_input(key, self.adj0[iu][j]):
                changed_keys.add(key)
        for iu in touched:
            if iu in added_vertices:
                continue
            # leaf flag rewritten only when its value really changed
            if self.store.rewrite_input(leaf_key(0, iu), self._degree(iu) == 1):
                changed_keys.add(leaf_key(0, iu))
        propagate(
            self.program,
            self.trace,
            self.store,
            PropagationDelta(changed_keys, set(added_vertices)),
            threads=self.threads,
        )
        return self.trace.last_propagation

    def batch_link(self, edges: Iterable) -> UpdateReport:
        """Insert a batch of weighted or unweighted edges; the batch together
        with the current forest must stay acyclic."""
        batch = []
        seen = set()
        for e in edges:
            u, v, w = e if len(e) == 3 else (e[0], e[1], None)
            self._check_vertex(u)
            self._check_vertex(v)
            if u == v:
                raise ForestError(f"self-loop at vertex {u}")
            pair = self._edge_pair(u, v)
            if pair in self.edge_slots:
                raise ForestError(f"edge ({u}, {v}) already present")
            if pair in seen:
                raise ForestError(f"duplicate edge ({u}, {v}) in batch")
            seen.add(pair)
            batch.append((u, v, w))
        # cycle check: component representatives plus union-find over the batch
        leader: dict[int, int] = {}

        def find(x):
            while leader.get(x, x) != x:
                leader[x] = leader.get(leader[x], leader[x])
                x = leader[x]
            return x

        for u, v, _ in batch:
            ru = find(self._representative_internal(u))
            rv = find(self._representative_internal(v))
            if ru == rv:
                raise ForestError(f"edge ({u}, {v}) would create a cycle")
            leader[ru] = rv

        first_new = len(self.adj0)
        changes: set = set()
        report = UpdateReport(stats=None)
        for u, v, w in batch:
            self._place_edge(u, v, w, changes, report)
        added_vertices = set(range(first_new, len(self.adj0)))
        for iu in added_vertices:
            self._install_vertex_cells(iu)
        report.stats = self._finish_update(changes, added_vertices)
        report.dirty_vertices = set(report.stats.affected_processes) | added_vertices
        report.added_vertices = added_vertices
        return report

    def batch_cut(self, edges: Iterable[tuple[int, int]]) -> UpdateReport:
        """Delete a batch of currently present edges."""
        pairs = []
        seen = set()
        for u, v in edges:
            self._check_vertex(u)
            self._check_vertex(v)
            pair = self._edge_pair(u, v)
            if pair not in self.edge_slots:
                raise ForestError(f"edge ({u}, {v}) is not present")
            if pair in seen:
                raise ForestError(f"duplicate edge ({u}, {v}) in batch")
            seen.add(pair)
            pairs.append(pair)
        changes: set = set()
        removed_internal = set()
        for pair in pairs:
            iu, ju, iv, jv = self.edge_slots.pop(pair)
            self.edge_weight.pop(pair, None)
            removed_internal.add(self._edge_pair(iu, iv))
            self._set_slot(iu, ju, None, changes)
            self._set_slot(iv, jv, None, changes)
        stats = self._finish_update(changes, set())
        return UpdateReport(
            stats=stats,
            dirty_vertices=set(stats.affected_processes),
            removed_edges=removed_internal,
        )

    def _internal_edge(self, u: int, v: int) -> tuple[int, int]:
        iu, ju, iv, jv = self.edge_slots[self._edge_pair(u, v)]
        return self._edge_pair(iu, iv)

    # -- record access -----------------------------------------------------------

    def death_round(self, iu: int) -> int:
        return self.store.peek(death_key(iu))

    def death_entries(self, iu: int) -> list:
        d = self.store.peek(death_key(iu))
        peek = self.store.peek
        return [e for e in (peek(adj_key(d, iu, j)) for j in range(T_SLOTS)) if e is not None]

    def _representative_internal(self, v: int) -> int:
        # jump along the contraction: rake target or either compress neighbour
        # is alive strictly longer, so this converges to the finalizer
        cur = v
        peek = self.store.peek
        while True:
            d = peek(death_key(cur))
            for j in range(T_SLOTS):
                e = peek(adj_key(d, cur, j))
                if e is not None:
                    cur = e[0]
                    break
            else:
                return cur

    def representative(self, v: int) -> int:
        """An original vertex identifying v's component (the finalizer's owner)."""
        self._check_vertex(v)
        return self.owner[self._representative_internal(v)]

    def connected(self, u: int, v: int) -> bool:
        return self.representative(u) == self.representative(v)

    def internal_count(self) -> int:
        return len(self.adj0)

    def internal_weight(self, iu: int) -> Any:
        # the anchor (original id) carries the vertex weight, chain extras none
        if iu < self.n_original:
            return self.vertex_weight.get(iu, 0)
        return 0

    def internal_edge_weight(self, a: int, b: int) -> Any:
        # chain edges between two internals of one original carry no weight
        if self.owner[a] == self.owner[b]:
            return None
        return self.edge_weight.get(self._edge_pair(self.owner[a], self.owner[b]))

    def reduction_map(self) -> DegreeReductionMap:
        return DegreeReductionMap([list(c) for c in self.chains], list(self.owner))

    def current_forest(self) -> ForestInput:
        """The logical (original-id) forest currently represented."""
        edges = [(u, v, self.edge_weight[(u, v)]) for u, v in sorted(self.edge_slots)]
        return ForestInput(self.n_original, edges, dict(self.vertex_weight))


def build_forest(forest: ForestInput, seed: int = 0, threads: int = 1) -> DynamicForest:
    return DynamicForest(forest, seed, threads)
