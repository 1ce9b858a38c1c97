"""Dynamized map-reduce: a bottom-up reduction tree over a sequence.

Builds f(a_0) + f(a_1) + ... + f(a_{n-1}) for an associative operator,
keeping every partial so that single or batched element updates re-execute
only the leaf-to-root paths that changed, and so that range queries can be
answered from O(log n) stored partials.

Cell layout: ("A", p) holds the input element, ("V", r, p) the partial over
the block of 2^r elements starting at p * 2^r.  Round r > 0 combines
V[r-1][2p] and V[r-1][2p+1]; after round r only processes below n / 2^(r+1)
survive.  (The indexing is pinned by hand-simulated build traces in the
tests; see test_mapreduce.)
"""

from __future__ import annotations

from typing import Any, Callable, Iterable, Sequence

from .engine import CellStore, Program, PropagationDelta, Trace, propagate, run


def _describe_key(key) -> str:
    if isinstance(key, tuple) and key and key[0] == "A":
        return f"A[{key[1]}]"
    if isinstance(key, tuple) and key and key[0] == "V":
        return f"V[{key[1]}][{key[2]}]"
    return repr(key)


class ReductionInstance:
    """One built reduction over a padded power-of-two array."""

    def __init__(self, seq: Sequence, f: Callable, op: Callable, identity: Any, threads: int = 1):
        self.original_length = len(seq)
        self.n = 1 if self.original_length <= 1 else 1 << (self.original_length - 1).bit_length()
        self.f = f
        self.op = op
        self.identity = identity
        self.rounds = self.n.bit_length() - 1  # reduction rounds after round 0
        self.threads = threads
        self.values = list(seq) + [identity] * (self.n - self.original_length)
        self.store = CellStore()
        self.program = Program(self._compute_round, "map-reduce", _describe_key)
        for p, value in enumerate(self.values):
            self.store.install_input(("A", p), value)
        self.trace: Trace = run(self.program, range(self.n), self.store, threads=threads)

    def _compute_round(self, r: int, p: int, h) -> None:
        if r == 0:
            value = h.read(("A", p))
            # Padding slots hold the operator identity directly; f is only
            # applied to real elements (f(identity) need not be the identity).
            h.write(("V", 0, p), self.f(value) if p < self.original_length else self.identity)
        else:
            left = h.read(("V", r - 1, 2 * p))
            right = h.read(("V", r - 1, 2 * p + 1))
            h.write(("V", r, p), self.op(left, right))
        if p >= self.n >> (r + 1):
            h.retire()


def mr_build(seq: Sequence, f: Callable, op: Callable, identity: Any, threads: int = 1) -> ReductionInstance:
    """Run the reduction from scratch.  ``op`` must be associative with
    ``identity`` on the value domain (padding slots hold the identity)."""
    return ReductionInstance(seq, f, op, identity, threads)


def mr_update(inst: ReductionInstance, batch: Iterable[tuple[int, Any]]) -> None:
    """Rewrite input elements and propagate along the changed paths."""
    changed = set()
    for idx, value in batch:
        if not 0 <= idx < inst.original_length:
            raise IndexError(f"update index {idx} out of range 0..{inst.original_length - 1}")
        if inst.store.rewrite_input(("A", idx), value):
            changed.add(("A", idx))
        inst.values[idx] = value
    propagate(inst.program, inst.trace, inst.store, PropagationDelta(changed), threads=inst.threads)


def mr_query_total(inst: ReductionInstance) -> Any:
    return inst.store.peek(("V", inst.rounds, 0))


def mr_query_range(inst: ReductionInstance, i: int, j: int) -> Any:
    """Fold of f over elements i..j inclusive, from O(log n) stored partials."""
    if not 0 <= i <= j < inst.original_length:
        raise IndexError(f"range ({i}, {j}) invalid for length {inst.original_length}")
    store = inst.store
    op = inst.op

    def descend(r: int, p: int, lo: int, hi: int):
        if i <= lo and hi <= j:
            return store.peek(("V", r, p))
        mid = (lo + hi) // 2
        if j <= mid:
            return descend(r - 1, 2 * p, lo, mid)
        if i > mid:
            return descend(r - 1, 2 * p + 1, mid + 1, hi)
        return op(descend(r - 1, 2 * p, lo, mid), descend(r - 1, 2 * p + 1, mid + 1, hi))

    return descend(inst.rounds, 0, 0, inst.n - 1)
