"""Batch-dynamic sequences via dynamized list contraction.

Random-mate contraction over disjoint linked lists: each round, a node with a
right neighbour splices itself out when it flips heads and its right
neighbour flips tails; isolated nodes finalize; tails never splice.  The
per-round neighbour cells (L, R), death rounds (D), and running segment
accumulators (ac) form a contraction record that change propagation keeps
consistent under batched splits, joins, and value updates, and that queries
walk after the fact.

The accumulator invariant: ac[i][u] is the fold (under the record's operator)
of the values of u and every dead node strictly between u and its round-i
right neighbour.  A splice of u merges its segment into its left neighbour's;
a node's accumulator cell is always written by its right neighbour (or by
itself when it has none), which keeps every cell single-writer.
"""

from __future__ import annotations

import operator
from typing import Any, Callable, Iterable, Sequence

from .coins import CoinOracle
from .engine import CellStore, Program, PropagationDelta, Trace, propagate, run


class SequenceError(ValueError):
    pass


# Packed int cell keys: node << 12 | round << 2 | kind, with kind
# 0 = left link, 1 = right link, 2 = accumulator, 3 = death round.
_ROUND_LIMIT = (1 << 10) - 2


def l_key(i: int, u: int) -> int:
    return (u << 12) | (i << 2)


def r_key(i: int, u: int) -> int:
    return (u << 12) | (i << 2) | 1


def acc_key(i: int, u: int) -> int:
    return (u << 12) | (i << 2) | 2


def d_key(u: int) -> int:
    return (u << 12) | 3


def _describe_key(key: int) -> str:
    kind = key & 3
    u = key >> 12
    i = (key >> 2) & 0x3FF
    return (f"L[{i}][{u}]", f"R[{i}][{u}]", f"ac[{i}][{u}]", f"D[{u}]")[kind]


class DynamicSequence:
    """A collection of sequences supporting batched joins, splits, value
    updates, and associative range queries."""

    def __init__(self, nodes: Sequence[tuple], op: Callable = operator.add, seed: int = 0, threads: int = 1):
        """``nodes[u] = (prev, next, value)`` with prev/next node ids or None.

        The links must form disjoint simple chains and ``op`` must be
        associative on the value domain.
        """
        self.n = len(nodes)
        self.op = op
        self.threads = threads
        self.coins = CoinOracle(seed)
        self.l0: list = [prev for prev, _, _ in nodes]
        self.r0: list = [nxt for _, nxt, _ in nodes]
        self.values: list = [value for _, _, value in nodes]
        self._validate_links()
        self.store = CellStore()
        self.program = Program(self._compute_round, "list-contraction", _describe_key)
        for u in range(self.n):
            self.store.install_input(l_key(0, u), self.l0[u])
            self.store.install_input(r_key(0, u), self.r0[u])
            self.store.install_input(acc_key(0, u), self.values[u])
        self.trace: Trace = run(self.program, range(self.n), self.store, threads=threads)

    def _validate_links(self) -> None:
        for u in range(self.n):
            nxt = self.r0[u]
            if nxt is not None and self.l0[nxt] != u:
                raise SequenceError(f"node {u}.next = {nxt} but {nxt}.prev = {self.l0[nxt]}")
            prev = self.l0[u]
            if prev is not None and self.r0[prev] != u:
                raise SequenceError(f"node {u}.prev = {prev} but {prev}.next = {self.r0[prev]}")
        seen = [False] * self.n
        for u in range(self.n):
            if self.l0[u] is None:
                v = u
                while v is not None:
                    if seen[v]:
                        raise SequenceError("links contain a cycle")
                    seen[v] = True
                    v = self.r0[v]
        if not all(seen):
            raise SequenceError("links contain a cycle (no head reachable)")

    # -- the round computation (Alg. 5 shape) -------------------------------

    def _compute_round(self, i: int, u: int, h) -> None:
        if i > _ROUND_LIMIT:
            raise SequenceError(f"contraction exceeded {_ROUND_LIMIT} rounds")
        read = h.read
        write = h.write
        i2 = i << 2
        inext = (i + 1) << 2
        left = read((u << 12) | i2)
        right = read((u << 12) | i2 | 1)
        heads = self.coins.heads
        if right is not None:
            if heads(i, u) and not heads(i, right):
                # splice u out: bypass links, merge u's segment leftwards
                write((right << 12) | inext, left)
                if left is not None:
                    write((left << 12) | inext | 1, right)
                    acc_l = read((left << 12) | i2 | 2)
                    acc_u = read((u << 12) | i2 | 2)
                    write((left << 12) | inext | 2, self.op(acc_l, acc_u))
                write((u << 12) | 3, i)
                h.retire()
                return
        elif left is None:
            write((u << 12) | 3, i)  # isolated: finalize
            h.retire()
            return
        # stay alive: re-publish links for the next round
        if right is not None:
            write((right << 12) | inext, u)
        else:
            write((u << 12) | inext | 1, None)
            write((u << 12) | inext | 2, read((u << 12) | i2 | 2))
        if left is not None:
            write((left << 12) | inext | 1, u)
            write((left << 12) | inext | 2, read((left << 12) | i2 | 2))
        else:
            write((u << 12) | inext, None)

    # -- batch updates -------------------------------------------------------

    def _propagate(self, changed: set) -> None:
        propagate(self.program, self.trace, self.store, PropagationDelta(changed), threads=self.threads)

    def batch_split(self, nodes: Iterable[int]) -> None:
        """Break every sequence immediately after each of the given nodes."""
        nodes = set(nodes)
        for u in nodes:
            self._check_node(u)
            if self.r0[u] is None:
                raise SequenceError(f"node {u} is already a tail")
        changed = set()
        for u in nodes:
            v = self.r0[u]
            self.r0[u] = None
            self.l0[v] = None
            if self.store.rewrite_input(r_key(0, u), None):
                changed.add(r_key(0, u))
            if self.store.rewrite_input(l_key(0, v), None):
                changed.add(l_key(0, v))
        self._propagate(changed)

    def batch_join(self, pairs: Iterable[tuple[int, int]]) -> None:
        """Concatenate sequences: each (u, v) glues tail u to head v."""
        pairs = set(pairs)
        tails = [u for u, _ in pairs]
        heads = [v for _, v in pairs]
        if len(set(tails)) != len(tails) or len(set(heads)) != len(heads):
            raise SequenceError("join endpoints must be distinct")
        for u, v in pairs:
            self._check_node(u)
            self._check_node(v)
            if self.r0[u] is not None:
                raise SequenceError(f"node {u} is not a tail")
            if self.l0[v] is not None:
                raise SequenceError(f"node {v} is not a head")
        # cycle check: joining within one list (directly or through the rest
        # of the batch) would close a ring
        leader = {}

        def find(x):
            while leader.get(x, x) != x:
                leader[x] = leader.get(leader[x], leader[x])
                x = leader[x]
            return x

        for u, v in pairs:
            ru, rv = find(self.representative(u)), find(self.representative(v))
            if ru == rv:
                raise SequenceError(f"join ({u}, {v}) would create a cycle")
            leader[ru] = rv
        changed = set()
        for u, v in pairs:
            self.r0[u] = v
            self.l0[v] = u
            if self.store.rewrite_input(r_key(0, u), v):
                changed.add(r_key(0, u))
            if self.store.rewrite_input(l_key(0, v), u):
                changed.add(l_key(0, v))
        self._propagate(changed)

    def batch_update_value(self, pairs: Iterable[tuple[int, Any]]) -> None:
        changed = set()
        for u, value in dict(pairs).items():
            self._check_node(u)
            self.values[u] = value
            if self.store.rewrite_input(acc_key(0, u), value):
                changed.add(acc_key(0, u))
        self._propagate(changed)

    # -- queries -------------------------------------------------------------

    def _check_node(self, u: int) -> None:
        if not 0 <= u < self.n:
            raise SequenceError(f"unknown node {u}")

    def representative(self, u: int) -> int:
        """The node that finalized in u's list (equal for the whole list)."""
        self._check_node(u)
        peek = self.store.peek
        cur = u
        while True:
            d = peek(d_key(cur))
            left = peek(l_key(d, cur))
            right = peek(r_key(d, cur))
            if left is not None:
                cur = left  # spliced into its left neighbour
            elif right is not None:
                cur = right  # head spliced out: its segment hands over rightwards
            else:
                return cur  # finalized

    def same_list(self, u: int, v: int) -> bool:
        return self.representative(u) == self.representative(v)

    def query_value(self, u: int, v: int) -> Any:
        """Fold of the values over the subsequence u..v inclusive.

        Walks the contraction record upwards from both endpoints, extending
        u's running fold to the right as its covering segment absorbs spliced
        neighbours and prepending segments to v's fold as its covering node
        merges leftwards, until the two covering nodes meet.
        """
        self._check_node(u)
        self._check_node(v)
        if not self.same_list(u, v):
            raise SequenceError(f"nodes {u} and {v} are in different lists")
        peek = self.store.peek
        if u == v:
            return peek(acc_key(0, u))
        op = self.op
        cur_u, cur_v = u, v
        fold_u = peek(acc_key(0, u))  # fold of u .. end of cur_u's segment
        fold_v = peek(acc_key(0, v))  # fold of cur_v .. v
        i = 0
        while i <= self.trace.rounds_executed:
            dies_u = peek(d_key(cur_u)) == i
            dies_v = peek(d_key(cur_v)) == i
            l_u = peek(l_key(i, cur_u))
            r_u = peek(r_key(i, cur_u))
            l_v = peek(l_key(i, cur_v))
            jumps_u = dies_u and l_u is None  # head splice: segment hands over rightwards
            # meets (the two covering segments become adjacent and merge)
            if dies_v and l_v == cur_u:
                return op(fold_u, fold_v)
            if jumps_u and r_u == cur_v:
                return op(fold_u, fold_v)
            if jumps_u and dies_v and l_v == r_u:
                return op(op(fold_u, peek(acc_key(i, r_u))), fold_v)
            # inversions (v's segment sits left of u's)
            if dies_u and l_u == cur_v:
                raise SequenceError(f"node {v} does not follow node {u}")
            if dies_v and l_v is None:
                raise SequenceError(f"node {v} does not follow node {u}")
            # independent transitions
            if dies_v:
                fold_v = op(peek(acc_key(i, l_v)), fold_v)
                cur_v = l_v
            if jumps_u:
                fold_u = op(fold_u, peek(acc_key(i, r_u)))
                cur_u = r_u
                r_next = peek(r_key(i, cur_u))
                if r_next is not None and peek(d_key(r_next)) == i:
                    fold_u = op(fold_u, peek(acc_key(i, r_next)))
            elif dies_u:
                cur_u = l_u
            elif r_u is not None and peek(d_key(r_u)) == i:
                fold_u = op(fold_u, peek(acc_key(i, r_u)))  # absorb spliced right neighbour
            if cur_u == cur_v:
                raise AssertionError("walk states collided without a meet event")
            i += 1
        raise AssertionError("query walk did not converge")

    def batch_query_value(self, pairs: Sequence[tuple[int, int]]) -> list:
        return [self.query_value(u, v) for u, v in pairs]

    def death_round(self, u: int) -> int:
        return self.store.peek(d_key(u))


def build_chains(
    chains: Sequence[Sequence[Any]], op: Callable = operator.add, seed: int = 0, threads: int = 1
) -> tuple[DynamicSequence, list[list[int]]]:
    """Build a DynamicSequence from explicit chains of values; returns the
    record plus the node ids assigned to each chain, in order."""
    nodes = []
    ids: list[list[int]] = []
    next_id = 0
    for chain in chains:
        row = []
        for k, value in enumerate(chain):
            prev = next_id - 1 if k > 0 else None
            nxt = next_id + 1 if k + 1 < len(chain) else None
            nodes.append((prev, nxt, value))
            row.append(next_id)
            next_id += 1
        ids.append(row)
    return DynamicSequence(nodes, op, seed, threads), ids
