"""Round-synchronous execution with dependency tracking and change propagation.

A client program runs in rounds: every live process executes one round
computation that reads shared cells written in strictly earlier rounds and
buffers writes that become visible at the round boundary.  The engine records
all reads, writes, and retirements so that a later batch of input changes can
be pushed through the old execution, re-running only the computations whose
inputs actually changed.
"""

from __future__ import annotations

import gc
import heapq
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Optional

Key = Hashable
Computation = tuple[int, int]  # (round, process-id)

_MISSING = object()


class EngineError(Exception):
    pass


@contextmanager
def _gc_paused():
    """The hot loops allocate millions of small long-lived tuples; cyclic GC
    passes over them dominate runtime, and the engine's structures are
    acyclic, so collection is paused for the duration of a run."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


class WriteConflictError(EngineError):
    """A shared cell received two committed writes in the same epoch."""


class MissingLocationError(EngineError):
    """A computation read a cell that has never been written."""


class VisibilityError(EngineError):
    """A computation read a cell written in the same or a later round."""


class DeltaError(EngineError):
    """A propagation delta named a cell or process it is not allowed to."""


@dataclass
class Program:
    """A client algorithm: one callable executed per (round, process).

    ``compute_round(r, p, handle)`` must be deterministic given the values it
    reads through ``handle``; any randomness has to come from a seeded oracle
    keyed on (round, process).
    """

    compute_round: Callable[[int, int, "RoundHandle"], None]
    description: str = ""
    # Optional pretty-printer for location keys in diagnostics (clients that
    # pack keys into ints can supply one).
    describe_key: Callable[[Key], str] = repr


@dataclass
class PropagationDelta:
    """A batch of input changes: rewritten cells plus process add/removals."""

    changed_locations: set = field(default_factory=set)
    added_processes: set = field(default_factory=set)
    removed_processes: set = field(default_factory=set)

    def __post_init__(self):
        if self.added_processes & self.removed_processes:
            raise DeltaError("added and removed process sets must be disjoint")


@dataclass
class RunStats:
    rounds: int = 0
    computations_per_round: list[int] = field(default_factory=list)
    total_computations: int = 0


@dataclass
class PropagationStats:
    """Counts of re-executed (affected) computations, bucketed by round."""

    affected_per_round: dict[int, int] = field(default_factory=dict)
    total_affected: int = 0
    round0_affected: int = 0
    rounds_visited: int = 0
    affected_processes: set = field(default_factory=set)

    def record(self, r: int, run_set) -> None:
        if run_set:
            self.affected_per_round[r] = len(run_set)
            self.total_affected += len(run_set)
            if r == 0:
                self.round0_affected = len(run_set)
            self.affected_processes.update(run_set)
        self.rounds_visited += 1


class CellStore:
    """Write-once shared memory plus per-cell reader subscriptions.

    Each cell record is ``(value, writer, epoch)`` where ``writer`` is the
    (round, process) that committed it, or None for an input cell installed by
    the client.  The epoch distinguishes writes of the current run/propagation
    from surviving historical writes: rewriting a historical cell during
    re-execution is legal, two writes within one epoch are not.
    """

    __slots__ = ("cells", "subs", "epoch")

    def __init__(self):
        self.cells: dict[Key, tuple[Any, Optional[Computation], int]] = {}
        self.subs: dict[Key, tuple[Computation, ...]] = {}
        self.epoch = 0

    # -- client-side input management -------------------------------------

    def install_input(self, key: Key, value: Any) -> None:
        if key in self.cells:
            raise DeltaError(f"input cell {key!r} already exists")
        self.cells[key] = (value, None, 0)

    def rewrite_input(self, key: Key, value: Any) -> bool:
        """Overwrite an input cell; returns False when the value is unchanged.

        Unchanged rewrites are dropped so callers can exclude them from the
        propagation delta (a cell only counts as modified when the new value
        actually differs).
        """
        rec = self.cells.get(key)
        if rec is None:
            raise DeltaError(f"cell {key!r} was never written")
        if rec[1] is not None:
            raise DeltaError(f"cell {key!r} is not an input location (writer {rec[1]})")
        if rec[0] == value:
            return False
        self.cells[key] = (value, None, 0)
        return True

    # -- inspection --------------------------------------------------------

    def peek(self, key: Key, default: Any = _MISSING) -> Any:
        """Untracked read, for post-hoc inspection of a finished execution."""
        rec = self.cells.get(key)
        if rec is None:
            if default is _MISSING:
                raise MissingLocationError(f"cell {key!r} was never written")
            return default
        return rec[0]

    def __contains__(self, key: Key) -> bool:
        return key in self.cells

    def values_snapshot(self) -> dict[Key, Any]:
        return {k: rec[0] for k, rec in self.cells.items()}

    def input_cells(self) -> dict[Key, Any]:
        return {k: rec[0] for k, rec in self.cells.items() if rec[1] is None}

    # -- subscription maintenance -------------------------------------------

    def subscribe(self, key: Key, rp: Computation) -> None:
        subs = self.subs
        cur = subs.get(key)
        if cur is None:
            subs[key] = (rp,)
        elif rp not in cur:
            subs[key] = cur + (rp,)

    def unsubscribe(self, key: Key, rp: Computation) -> None:
        cur = self.subs.get(key)
        if cur and rp in cur:
            rest = tuple(x for x in cur if x != rp)
            if rest:
                self.subs[key] = rest
            else:
                del self.subs[key]


class Trace:
    """Replayable record of one execution: reads, writes, and retire flags."""

    __slots__ = (
        "reads",
        "writes",
        "retired",
        "initial_processes",
        "_round_counts",
        "rounds_executed",
        "run_stats",
        "last_propagation",
        "read_values",
    )

    def __init__(self, initial_processes: Iterable[int]):
        self.reads: dict[Computation, list[Key]] = {}
        self.writes: dict[Computation, list[Key]] = {}
        self.retired: dict[Computation, bool] = {}
        self.initial_processes: set[int] = set(initial_processes)
        self._round_counts: dict[int, int] = {}
        self.rounds_executed = 0
        self.run_stats: Optional[RunStats] = None
        self.last_propagation: Optional[PropagationStats] = None
        # Optional (round, process) -> tuple of values read, recorded only when
        # an execution is started with record_read_values=True.
        self.read_values: Optional[dict[Computation, tuple]] = None

    def _record(self, rp: Computation, reads, writes, retired: bool) -> None:
        fresh = rp not in self.reads
        self.reads[rp] = reads
        self.writes[rp] = writes
        self.retired[rp] = retired
        if fresh:
            r = rp[0]
            self._round_counts[r] = self._round_counts.get(r, 0) + 1
            if r >= self.rounds_executed:
                self.rounds_executed = r + 1

    def _remove(self, rp: Computation) -> None:
        del self.reads[rp]
        del self.writes[rp]
        del self.retired[rp]
        if self.read_values is not None:
            self.read_values.pop(rp, None)
        r = rp[0]
        left = self._round_counts[r] - 1
        if left:
            self._round_counts[r] = left
        else:
            del self._round_counts[r]
            while self.rounds_executed and self._round_counts.get(self.rounds_executed - 1, 0) == 0:
                self.rounds_executed -= 1

    def has(self, rp: Computation) -> bool:
        return rp in self.reads

    def computations(self) -> Iterable[Computation]:
        return self.reads.keys()

    def snapshot(self):
        """Canonical copy for equality comparisons in tests and audits."""
        return (
            dict(self.reads),
            dict(self.writes),
            dict(self.retired),
            frozenset(self.initial_processes),
            self.rounds_executed,
        )


class RoundHandle:
    """Tracked memory view given to one round computation."""

    __slots__ = ("_cells", "_describe", "r", "p", "reads", "writes", "retired", "_read_vals")

    def __init__(self, store: CellStore, describe_key):
        self._cells = store.cells
        self._describe = describe_key
        self.r = 0
        self.p = 0
        self.reads: list[Key] = []
        self.writes: list[tuple[Key, Any]] = []
        self.retired = False
        self._read_vals: Optional[list] = None

    def _begin(self, r: int, p: int, record_values: bool) -> None:
        self.r = r
        self.p = p
        self.reads = []
        self.writes = []
        self.retired = False
        self._read_vals = [] if record_values else None

    def read(self, key: Key) -> Any:
        rec = self._cells.get(key)
        if rec is None:
            raise MissingLocationError(
                f"round {self.r}, process {self.p}: read of absent cell {self._describe(key)}"
            )
        writer = rec[1]
        if writer is not None and writer[0] >= self.r:
            raise VisibilityError(
                f"round {self.r}, process {self.p}: cell {self._describe(key)} "
                f"was written by {writer} and is not yet visible"
            )
        reads = self.reads
        if key not in reads:
            reads.append(key)
            if self._read_vals is not None:
                self._read_vals.append(rec[0])
        return rec[0]

    def write(self, key: Key, value: Any) -> None:
        for k, _ in self.writes:
            if k == key:
                raise WriteConflictError(
                    f"round {self.r}, process {self.p}: double write to {self._describe(key)}"
                )
        self.writes.append((key, value))

    def retire(self) -> None:
        self.retired = True


def _commit(
    store: CellStore,
    trace: Trace,
    executed: list[tuple[Computation, list, list, bool, Optional[list]]],
    describe_key,
    changed: Optional[set],
    stash: Optional[dict],
) -> None:
    """Barrier commit: publish buffered writes and subscribe recorded reads.

    ``executed`` entries are processed in ascending process order so write
    conflicts are reported deterministically.  When ``changed`` is given,
    committed cells whose value differs from the pre-round value (including
    values stashed by invalidation purges) are collected into it.
    """
    cells = store.cells
    subs = store.subs
    epoch = store.epoch
    for rp, reads, writes, retired, read_vals in executed:
        write_keys = []
        for key, value in writes:
            rec = cells.get(key)
            if rec is not None:
                if rec[2] == epoch:
                    raise WriteConflictError(
                        f"cell {describe_key(key)} written by both {rec[1]} and {rp}"
                    )
                if rec[1] is None:
                    raise WriteConflictError(
                        f"computation {rp} overwrote input cell {describe_key(key)}"
                    )
                if changed is not None and rec[0] != value:
                    changed.add(key)
            elif changed is not None and (stash is None or stash.get(key, _MISSING) != value):
                changed.add(key)
            cells[key] = (value, rp, epoch)
            write_keys.append(key)
        trace._record(rp, reads, write_keys, retired)
        if read_vals is not None:
            trace.read_values[rp] = tuple(read_vals)
        for key in reads:
            cur = subs.get(key)
            if cur is None:
                subs[key] = (rp,)
            elif rp not in cur:
                subs[key] = cur + (rp,)


def _round_executor(program: Program, store: CellStore, record_values: bool, threads: int):
    """Executes one round's computations.  Within a round, computations are
    independent (reads see only earlier rounds, writes are buffered until the
    barrier commit), so they may run concurrently; results are merged in
    ascending process order either way."""
    if threads <= 1:
        handle = RoundHandle(store, program.describe_key)
        compute = program.compute_round

        def execute(r: int, procs):
            executed = []
            for p in procs:
                handle._begin(r, p, record_values)
                compute(r, p, handle)
                executed.append(((r, p), handle.reads, handle.writes, handle.retired, handle._read_vals))
            return executed

        return execute, None

    from concurrent.futures import ThreadPoolExecutor

    pool = ThreadPoolExecutor(max_workers=threads)

    def execute(r: int, procs):
        def one(p):
            h = RoundHandle(store, program.describe_key)
            h._begin(r, p, record_values)
            program.compute_round(r, p, h)
            return ((r, p), h.reads, h.writes, h.retired, h._read_vals)

        return list(pool.map(one, procs))

    return execute, pool


def run(
    program: Program,
    initial: Iterable[int],
    store: CellStore,
    *,
    max_rounds: int = 1 << 20,
    record_read_values: bool = False,
    threads: int = 1,
) -> Trace:
    """Execute the program from scratch, tracking every read and write.

    Rounds run until every process has retired.  The store must already hold
    every input cell the round-0 computations read.
    """
    trace = Trace(initial)
    if record_read_values:
        trace.read_values = {}
    store.epoch += 1
    stats = RunStats()
    execute, pool = _round_executor(program, store, record_read_values, threads)
    live = sorted(trace.initial_processes)
    r = 0
    try:
        with _gc_paused():
            while live:
                if r >= max_rounds:
                    raise EngineError(f"no convergence after {max_rounds} rounds")
                executed = execute(r, live)
                _commit(store, trace, executed, program.describe_key, None, None)
                stats.computations_per_round.append(len(live))
                stats.total_computations += len(live)
                live = [rp[1] for rp, _, _, retired, _ in executed if not retired]
                r += 1
    finally:
        if pool is not None:
            pool.shutdown()
    stats.rounds = r
    trace.run_stats = stats
    trace.rounds_executed = max(trace.rounds_executed, r)
    return trace


def _validate_delta(trace: Trace, store: CellStore, delta: PropagationDelta) -> None:
    for m in delta.changed_locations:
        rec = store.cells.get(m)
        if rec is None:
            raise DeltaError(f"delta names cell {m!r} which was never written")
        if rec[1] is not None:
            raise DeltaError(f"delta names cell {m!r} which is not an input location")
    for p in delta.removed_processes:
        if (0, p) not in trace.reads:
            raise DeltaError(f"removed process {p} never ran")
    for p in delta.added_processes:
        if (0, p) in trace.reads:
            raise DeltaError(f"added process {p} already exists")


def propagate(
    program: Program,
    trace: Trace,
    store: CellStore,
    delta: PropagationDelta,
    *,
    max_rounds: int = 1 << 20,
    threads: int = 1,
) -> Trace:
    """Push a batch of input changes through a prior execution.

    The caller must already have rewritten ``delta.changed_locations`` in the
    store (dropping cells whose value did not change).  Affected computations
    are re-executed round by round; processes that now retire earlier have
    their stale future computations invalidated, and processes that live
    longer (or are newly added) keep running until they retire.  The result is
    output-equivalent to a from-scratch run on the new input.
    """
    _validate_delta(trace, store, delta)
    store.epoch += 1
    describe = program.describe_key
    record_values = trace.read_values is not None
    stats = PropagationStats()

    U: set = set(delta.changed_locations)
    died_early: set[int] = set(delta.removed_processes)
    lives_longer: set[int] = set(delta.added_processes)
    trace.initial_processes |= delta.added_processes
    trace.initial_processes -= delta.removed_processes

    buckets: dict[int, set[int]] = {}
    bucket_heap: list[int] = []
    execute, pool = _round_executor(program, store, record_values, threads)

    r = 0
    with _gc_paused():
        while True:
            if U:
                subs = store.subs
                for m in U:
                    for rp in subs.get(m, ()):
                        r2 = rp[0]
                        if r2 < r:
                            raise EngineError(
                                f"cell {describe(m)} changed at round {r} but has a "
                                f"subscriber at earlier round {r2}"
                            )
                        b = buckets.get(r2)
                        if b is None:
                            buckets[r2] = {rp[1]}
                            heapq.heappush(bucket_heap, r2)
                        else:
                            b.add(rp[1])
                U = set()
            if not died_early and not lives_longer:
                # Nothing forces round-by-round processing: jump to the next
                # round that has affected computations.
                while bucket_heap and bucket_heap[0] not in buckets:
                    heapq.heappop(bucket_heap)
                if not bucket_heap:
                    break
                r = max(r, bucket_heap[0])
            if r >= max_rounds:
                raise EngineError(f"propagation did not converge after {max_rounds} rounds")

            rerun = buckets.pop(r, set())
            rerun -= died_early

            # Invalidate the prior round-r computations of everything re-run or
            # now dead: forget their reads, purge their surviving writes (keeping
            # the old values around for value-diff suppression at commit time).
            stash: dict = {}
            prev_retired: dict[int, bool] = {}
            cells = store.cells
            for p in sorted(rerun | died_early):
                rp = (r, p)
                old_reads = trace.reads.get(rp)
                if old_reads is None:
                    if p in rerun:
                        raise EngineError(f"stale subscription: computation {rp} does not exist")
                    continue
                prev_retired[p] = trace.retired[rp]
                for key in old_reads:
                    store.unsubscribe(key, rp)
                for key in trace.writes[rp]:
                    rec = cells.get(key)
                    if rec is not None and rec[1] == rp:
                        if key not in stash:
                            stash[key] = rec[0]
                        del cells[key]
                if p in died_early:
                    trace._remove(rp)

            run_set = sorted(rerun | lives_longer)
            executed = execute(r, run_set)
            changed: set = set()
            _commit(store, trace, executed, describe, changed, stash)
            U = changed
            stats.record(r, run_set)

            for p in rerun:
                was = prev_retired[p]
                now = trace.retired[(r, p)]
                if was and not now:
                    lives_longer.add(p)
                elif now and not was:
                    died_early.add(p)
            if lives_longer:
                lives_longer = {p for p in lives_longer if not trace.retired.get((r, p), False)}
            if died_early:
                died_early = {p for p in died_early if not prev_retired.get(p, False)}

            r += 1
            if not (U or died_early or lives_longer or buckets):
                break

    if pool is not None:
        pool.shutdown()
    trace.last_propagation = stats
    return trace


def fresh_run(program: Program, trace: Trace, store: CellStore, **kwargs) -> tuple[Trace, CellStore]:
    """From-scratch re-execution of the current inputs, for consistency checks."""
    new_store = CellStore()
    for key, value in store.input_cells().items():
        new_store.install_input(key, value)
    new_trace = run(program, set(trace.initial_processes), new_store, **kwargs)
    return new_trace, new_store


@dataclass
class RestrictedReport:
    """Audit of the restricted-model rules over a finished trace."""

    restricted: bool
    max_reads_per_computation: int
    max_writes_per_computation: int
    max_readers_per_location: int
    reads_one_round_after_write: bool
    violations: list[str] = field(default_factory=list)


def check_restricted(trace: Trace, max_violations: int = 5) -> RestrictedReport:
    """Check that every read targets the directly preceding round's writes.

    A location read at round r must have been written at round r-1, or be an
    input location read at round 0.  Also reports the per-computation read and
    write maxima and the per-location reader maximum.
    """
    writer_round: dict[Key, int] = {}
    for (r, _p), keys in trace.writes.items():
        for key in keys:
            writer_round[key] = r

    max_reads = 0
    max_writes = 0
    violations: list[str] = []
    readers: dict[Key, int] = {}
    one_round = True
    for rp, keys in trace.reads.items():
        r = rp[0]
        if len(keys) > max_reads:
            max_reads = len(keys)
        w = len(trace.writes[rp])
        if w > max_writes:
            max_writes = w
        for key in keys:
            readers[key] = readers.get(key, 0) + 1
            wr = writer_round.get(key)
            if wr is None:
                ok = r == 0
            else:
                ok = wr == r - 1
            if not ok:
                one_round = False
                if len(violations) < max_violations:
                    violations.append(
                        f"computation {rp} reads {key!r} "
                        f"({'input' if wr is None else f'written at round {wr}'})"
                    )
    max_readers = max(readers.values(), default=0)
    return RestrictedReport(
        restricted=one_round,
        max_reads_per_computation=max_reads,
        max_writes_per_computation=max_writes,
        max_readers_per_location=max_readers,
        reads_one_round_after_write=one_round,
        violations=violations,
    )
