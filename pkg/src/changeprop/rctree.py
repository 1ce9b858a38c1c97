"""Rake-compress query forest derived from a contraction record.

Every vertex and edge of the (internal, degree-reduced) forest is a base
cluster.  When a vertex dies, the clusters having it as a boundary vertex
merge with its base cluster into a composite cluster represented by that
vertex: a rake forms a unary cluster, a compress a binary cluster, a finalize
the nullary root of its component.  Children, boundaries, and payloads are
derived from the record's death rounds and death-round adjacency entries, so
the whole structure can be rebuilt from scratch or refreshed in place after a
propagation, reusing every untouched cluster object by identity.

Payloads maintained per cluster: total inside vertex weight (subtree sums),
the heaviest real edge on the boundary path of binary clusters (path maxima),
and the first real edge seen from each boundary end (used to orient subtree
queries across virtual chain vertices).
"""

from __future__ import annotations

import heapq
from typing import Any, Iterable, Optional

from .treecontract import DynamicForest


class QueryError(ValueError):
    pass


class BaseVertex:
    __slots__ = ("vertex", "weight", "parent")

    def __init__(self, vertex: int, weight):
        self.vertex = vertex
        self.weight = weight
        self.parent: Optional[Cluster] = None

    @property
    def nodekey(self):
        return ("v", self.vertex)

    @property
    def w_in(self):
        return self.weight


class BaseEdge:
    __slots__ = ("ends", "weight", "real", "parent")
    w_in = 0

    def __init__(self, ends: tuple[int, int], weight, real: bool):
        self.ends = ends
        self.weight = weight  # None when unweighted
        self.real = real  # False for virtual chain links from degree reduction
        self.parent: Optional[Cluster] = None

    @property
    def nodekey(self):
        return ("e",) + self.ends

    @property
    def path_payload(self):
        return None if self.weight is None else (self.weight, self.ends)

    def first_real(self, end: int):
        return self.ends if self.real else None


class Cluster:
    """A composite cluster; one permanent object per representative vertex."""

    __slots__ = (
        "rep",
        "kind",
        "boundary",
        "children",
        "edge_children",
        "parent",
        "round_formed",
        "w_in",
        "path_payload",
        "_first_real",
    )

    def __init__(self, rep: int):
        self.rep = rep
        self.kind = "nullary"
        self.boundary: tuple[int, ...] = ()
        self.children: list = []
        self.edge_children: list = []  # (boundary end, edge cluster), aligned
        self.parent: Optional[Cluster] = None
        self.round_formed = -1
        self.w_in = 0
        self.path_payload = None
        self._first_real: dict[int, Any] = {}

    @property
    def nodekey(self):
        return ("c", self.rep)

    def first_real(self, end: int):
        return self._first_real[end]

    def payload_tuple(self):
        return (self.w_in, self.path_payload, tuple(sorted(self._first_real.items())))


def _max_edge(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a[0] >= b[0] else b


class RCForest:
    """Cluster hierarchy over a DynamicForest, kept consistent by refresh()."""

    def __init__(self, forest: DynamicForest):
        self.forest = forest
        self.base_v: dict[int, BaseVertex] = {}
        self.base_e: dict[tuple[int, int], BaseEdge] = {}
        self.comp: dict[int, Cluster] = {}
        self.death_sig: dict[int, tuple] = {}
        self.rakers: dict[int, set[int]] = {}
        self.rake_target: dict[int, Optional[int]] = {}
        self.roots: set[int] = set()
        self.last_batch_nodes_touched = 0
        self._full_build()

    # -- construction and maintenance ----------------------------------------

    def _internal_edges(self) -> Iterable[tuple[int, int]]:
        forest = self.forest
        for pair in forest.edge_slots:
            yield forest._internal_edge(*pair)
        for chain in forest.chains:
            for a, b in zip(chain, chain[1:]):
                yield (a, b) if a < b else (b, a)

    def _make_base_edge(self, ends: tuple[int, int]) -> BaseEdge:
        forest = self.forest
        real = forest.owner[ends[0]] != forest.owner[ends[1]]
        return BaseEdge(ends, forest.internal_edge_weight(*ends), real)

    def _full_build(self) -> None:
        forest = self.forest
        for iu in range(forest.internal_count()):
            self.base_v[iu] = BaseVertex(iu, forest.internal_weight(iu))
            self.rakers[iu] = set()
        for ends in self._internal_edges():
            self.base_e[ends] = self._make_base_edge(ends)
        for iu in range(forest.internal_count()):
            sig = (forest.death_round(iu), tuple(forest.death_entries(iu)))
            self.death_sig[iu] = sig
            target = sig[1][0][0] if len(sig[1]) == 1 else None
            self.rake_target[iu] = target
            if target is not None:
                self.rakers[target].add(iu)
            self.comp[iu] = Cluster(iu)
        self._rebuild_clusters(range(forest.internal_count()))

    def refresh(self, report) -> None:
        """Bring the cluster forest in line with the record after one batch
        update, rebuilding only clusters whose derivation changed."""
        forest = self.forest
        for ends in report.removed_edges:
            self.base_e.pop(ends, None)
        for ends in report.added_edges:
            self.base_e[ends] = self._make_base_edge(ends)
        for iu in report.added_vertices:
            self.base_v[iu] = BaseVertex(iu, forest.internal_weight(iu))
            self.rakers[iu] = set()
            self.comp[iu] = Cluster(iu)
            self.rake_target[iu] = None
        structure_dirty = set(report.added_vertices)
        for iu in sorted(report.dirty_vertices | report.added_vertices):
            sig = (forest.death_round(iu), tuple(forest.death_entries(iu)))
            if sig == self.death_sig.get(iu):
                continue
            self.death_sig[iu] = sig
            structure_dirty.add(iu)
            target = sig[1][0][0] if len(sig[1]) == 1 else None
            old_target = self.rake_target.get(iu)
            if old_target != target:
                if old_target is not None:
                    self.rakers[old_target].discard(iu)
                    structure_dirty.add(old_target)
                if target is not None:
                    self.rakers[target].add(iu)
                    structure_dirty.add(target)
                self.rake_target[iu] = target
        self._rebuild_clusters(sorted(structure_dirty))

    def _edge_cluster(self, u: int, entry):
        v, _p, via = entry
        if via is not None:
            return self.comp[via]
        ends = (u, v) if u < v else (v, u)
        return self.base_e[ends]

    def _rebuild_clusters(self, dirty: Iterable[int]) -> None:
        payload_queue: list[tuple[int, int]] = []
        for iu in dirty:
            d, entries = self.death_sig[iu]
            c = self.comp[iu]
            if c.round_formed >= 0 and c.kind == "nullary":
                self.roots.discard(iu)
            c.round_formed = d
            c.kind = ("nullary", "unary", "binary")[len(entries)]
            c.boundary = tuple(e[0] for e in entries)
            c.edge_children = [(e[0], self._edge_cluster(iu, e)) for e in entries]
            c.children = [self.base_v[iu]]
            c.children.extend(self.comp[w] for w in sorted(self.rakers[iu]))
            c.children.extend(ec for _, ec in c.edge_children)
            for child in c.children:
                child.parent = c
            if c.kind == "nullary":
                # a nullary cluster is never anyone's child: it is the root
                # of its component, so any stale parent link must go
                self.roots.add(iu)
                c.parent = None
            payload_queue.append((d, iu))

        # payloads bottom-up: every cluster forms strictly later than its
        # children, so a (round, rep) heap sees children before parents, and
        # payload changes bubble to ancestors that were not rebuilt themselves
        heapq.heapify(payload_queue)
        queued = {iu for _, iu in payload_queue}
        while payload_queue:
            _, iu = heapq.heappop(payload_queue)
            queued.discard(iu)
            c = self.comp[iu]
            before = c.payload_tuple()
            self._compute_payload(c)
            if c.payload_tuple() != before and c.parent is not None:
                parent = c.parent
                if parent.rep not in queued:
                    heapq.heappush(payload_queue, (parent.round_formed, parent.rep))
                    queued.add(parent.rep)

    def _compute_payload(self, c: Cluster) -> None:
        c.w_in = sum(child.w_in for child in c.children)
        if c.kind == "binary":
            (b1, e1), (b2, e2) = c.edge_children
            c.path_payload = _max_edge(e1.path_payload, e2.path_payload)
            fr1 = e1.first_real(b1)
            fr2 = e2.first_real(b2)
            c._first_real = {
                b1: fr1 if fr1 is not None else e2.first_real(c.rep),
                b2: fr2 if fr2 is not None else e1.first_real(c.rep),
            }
        else:
            c.path_payload = None
            c._first_real = {}

    # -- representatives and connectivity ---------------------------------------

    def _root_cluster(self, v: int) -> Cluster:
        node = self.base_v[v].parent
        while node.parent is not None:
            node = node.parent
        return node

    def find_representative(self, v: int) -> int:
        """A canonical original vertex for v's connected component."""
        self.forest._check_vertex(v)
        return self.forest.owner[self._root_cluster(v).rep]

    def batch_find_representatives(self, batch: Iterable[int]) -> dict[int, int]:
        """Answers equal per-vertex find_representative; walks share their
        upward paths, so the number of distinct clusters visited (available as
        last_batch_nodes_touched) stays near k*log(1+n/k) rather than k*log n."""
        answers: dict[int, int] = {}
        cache: dict = {}
        for v in batch:
            self.forest._check_vertex(v)
            node = self.base_v[v]
            path = []
            while True:
                key = node.nodekey
                if key in cache:
                    result = cache[key]
                    break
                path.append(key)
                if node.parent is None:
                    result = self.forest.owner[node.rep]
                    break
                node = node.parent
            for key in path:
                cache[key] = result
            answers[v] = result
        self.last_batch_nodes_touched = len(cache)
        return answers

    def connected(self, u: int, v: int) -> bool:
        return self.find_representative(u) == self.find_representative(v)

    def batch_connected(self, pairs: Iterable[tuple[int, int]]) -> list[bool]:
        pairs = list(pairs)
        reps = self.batch_find_representatives({x for p in pairs for x in p})
        return [reps[u] == reps[v] for u, v in pairs]

    # -- the meet walk -------------------------------------------------------------

    def _walk_states(self, x: int, step) -> dict:
        """Climb from composite(x) to the root, recording for every visited
        cluster the walk's value at that cluster's representative (the value
        of the path from x to the representative).  ``step(value_at_rep,
        edge_cluster, rep, b)`` extends a value across one boundary edge
        chain toward boundary vertex b."""
        states = {}
        cluster = self.comp[x]
        vals: dict[int, Any] = {}
        val_rep = None
        while True:
            states[cluster.nodekey] = val_rep
            new_vals = {}
            for b, ec in cluster.edge_children:
                new_vals[b] = vals[b] if b in vals else step(val_rep, ec, cluster.rep, b)
            if cluster.parent is None:
                return states
            vals = new_vals
            cluster = cluster.parent
            val_rep = vals[cluster.rep]

    def _meet(self, iu: int, iv: int, step_u, step_v):
        """Climb from both composites until the walks share a cluster; the
        u-v path inside that cluster passes through its representative, so
        return (rep, u's value to the rep, v's value to the rep)."""
        states_u = self._walk_states(iu, step_u)
        cluster = self.comp[iv]
        vals: dict[int, Any] = {}
        val_rep = None
        while True:
            key = cluster.nodekey
            if key in states_u:
                return cluster.rep, states_u[key], val_rep
            new_vals = {}
            for b, ec in cluster.edge_children:
                new_vals[b] = vals[b] if b in vals else step_v(val_rep, ec, cluster.rep, b)
            if cluster.parent is None:
                raise QueryError(f"vertices {iu} and {iv} are not connected")
            vals = new_vals
            cluster = cluster.parent
            val_rep = vals[cluster.rep]

    # -- queries ---------------------------------------------------------------------

    def path_max(self, u: int, v: int):
        """Heaviest edge on the unique u..v path: (weight, original edge) or
        None when the path is empty.  Virtual chain edges never win."""
        forest = self.forest
        forest._check_vertex(u)
        forest._check_vertex(v)
        if u == v:
            return None
        if self.find_representative(u) != self.find_representative(v):
            raise QueryError(f"vertices {u} and {v} are not connected")

        def step(val, ec, w, b):
            return _max_edge(val, ec.path_payload)

        _w, from_u, from_v = self._meet(u, v, step, step)
        best = _max_edge(from_u, from_v)
        if best is None:
            return None
        weight, ends = best
        a, b = forest.owner[ends[0]], forest.owner[ends[1]]
        return weight, ((a, b) if a < b else (b, a))

    def _first_hop(self, u: int, r: int) -> tuple[int, int]:
        """The first real edge (internal ends) on the path from u toward r."""

        def step_fwd(val, ec, w, b):
            return val if val is not None else ec.first_real(w)

        def step_rev(val, ec, w, b):
            fr = ec.first_real(b)
            return fr if fr is not None else val

        _w, from_u, from_r = self._meet(u, r, step_fwd, step_rev)
        hop = from_u if from_u is not None else from_r
        assert hop is not None, "distinct originals are separated by a real edge"
        return hop

    def subtree_sum(self, root: int, sub: int):
        """Total vertex weight of the subtree rooted at ``sub`` when ``sub``'s
        component is rooted at ``root``.  Virtual vertices weigh nothing."""
        forest = self.forest
        forest._check_vertex(root)
        forest._check_vertex(sub)
        if self.find_representative(root) != self.find_representative(sub):
            raise QueryError(f"vertices {root} and {sub} are not connected")
        if root == sub:
            return self._root_cluster(root).w_in
        hop = self._first_hop(sub, root)
        masses = self._edge_side_masses(hop)
        a, b = hop
        sub_side = a if forest.owner[a] == sub else b
        assert forest.owner[sub_side] == sub
        return masses[sub_side]

    def _edge_side_masses(self, ends: tuple[int, int]) -> dict[int, Any]:
        """Split the component's vertex weight across the two sides of an
        edge by climbing from its base cluster: everything a newly formed
        ancestor adds hangs off the dying boundary vertex, hence lands on
        that vertex's side."""
        node = self.base_e[ends]
        a, b = ends
        side = {a: a, b: b}
        mass = {a: 0, b: 0}
        while node.parent is not None:
            parent = node.parent
            w = parent.rep
            mass[side[w]] += parent.w_in - node.w_in
            side = {bd: side[bd] if bd in side else side[w] for bd in parent.boundary}
            node = parent
        return mass

    # -- inspection ------------------------------------------------------------------

    def component_weight(self, v: int):
        return self._root_cluster(v).w_in

    def node_count(self) -> int:
        return len(self.base_v) + len(self.base_e) + len(self.comp)

    def canonical(self) -> dict:
        """Structure + payload fingerprint for equivalence comparisons."""
        return {
            "clusters": {
                rep: (
                    c.kind,
                    c.boundary,
                    tuple(sorted(child.nodekey for child in c.children)),
                    c.round_formed,
                    c.w_in,
                    c.path_payload,
                    tuple(sorted(c._first_real.items())),
                )
                for rep, c in self.comp.items()
            },
            "roots": set(self.roots),
            "vertices": {v: bv.weight for v, bv in self.base_v.items()},
            "edges": {e: (be.weight, be.real) for e, be in self.base_e.items()},
        }
