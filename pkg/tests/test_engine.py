"""Engine-level tests: tracking, write-once discipline, propagation semantics.

The consistency oracle used throughout: after any delta, the propagated
(store, trace) must equal a from-scratch run on the new inputs exactly.
"""

import random

import pytest

from changeprop.engine import (
    CellStore,
    DeltaError,
    MissingLocationError,
    Program,
    PropagationDelta,
    Trace,
    VisibilityError,
    WriteConflictError,
    check_restricted,
    fresh_run,
    propagate,
    run,
)


def build_countdown(lifetimes):
    """Each process p runs for lifetimes[p] rounds, writing one cell per round.

    The lifetime is re-read from the input cell every round, so changing it
    exercises both the died-earlier and lived-longer propagation paths.
    """

    def compute(r, p, h):
        n = h.read(("n", p))
        h.write(("out", r, p), (r, n))
        if r + 1 >= n:
            h.retire()

    store = CellStore()
    for p, n in enumerate(lifetimes):
        store.install_input(("n", p), n)
    program = Program(compute, "countdown")
    return program, store


def countdown_consistency(lifetimes, new_lifetimes, added=(), removed=()):
    program, store = build_countdown(lifetimes)
    trace = run(program, range(len(lifetimes)), store)
    changed = set()
    for p, n in enumerate(new_lifetimes):
        key = ("n", p)
        if key not in store:
            store.install_input(key, n)
        elif store.rewrite_input(key, n):
            changed.add(key)
    delta = PropagationDelta(changed, set(added), set(removed))
    propagate(program, trace, store, delta)
    expect_trace, expect_store = fresh_run(program, trace, store)
    assert store.values_snapshot() == expect_store.values_snapshot()
    assert trace.snapshot() == expect_trace.snapshot()
    return trace, store


def test_all_retire_round_zero():
    def compute(r, p, h):
        h.write(("done", p), True)
        h.retire()

    store = CellStore()
    trace = run(Program(compute, "instant"), {0, 1, 2}, store)
    assert trace.rounds_executed == 1
    assert all(trace.retired.values())
    assert trace.run_stats.computations_per_round == [3]


def test_empty_initial_set_runs_zero_rounds():
    store = CellStore()
    trace = run(Program(lambda r, p, h: h.retire(), "noop"), set(), store)
    assert trace.rounds_executed == 0
    assert store.values_snapshot() == {}


def test_read_tracks_and_subscribes():
    program, store = build_countdown([2])
    trace = run(program, {0}, store)
    assert ("n", 0) in trace.reads[(0, 0)]
    assert (0, 0) in store.subs[("n", 0)]
    assert (1, 0) in store.subs[("n", 0)]
    # re-reads are idempotent in the read set
    assert trace.reads[(0, 0)].count(("n", 0)) == 1


def test_read_absent_location_fails():
    def compute(r, p, h):
        h.read(("nope",))

    store = CellStore()
    with pytest.raises(MissingLocationError, match="round 0, process 0"):
        run(Program(compute, "bad"), {0}, store)


def test_same_round_write_not_visible():
    # process 0 writes ("x",) in round 0; process 1 reads it in round 0
    def compute(r, p, h):
        if p == 0:
            h.write(("x",), 1)
            h.retire()
        else:
            h.read(("x",))

    store = CellStore()
    with pytest.raises(MissingLocationError):
        run(Program(compute, "same-round"), {0, 1}, store)

    # and once committed, a read in the *same* round as the writer is rejected
    store = CellStore()
    store.cells[("y",)] = (5, (3, 7), 0)
    h_reads = []

    def compute2(r, p, h):
        if r < 3:
            h.write(("t", r), r)
            return
        h_reads.append(h.read(("y",)))
        h.retire()

    with pytest.raises(VisibilityError):
        run(Program(compute2, "visibility"), {0}, store)


def test_write_once_violation_names_both_writers():
    def compute(r, p, h):
        h.write(("shared",), p)
        h.retire()

    store = CellStore()
    with pytest.raises(WriteConflictError, match=r"\(0, 0\).*\(0, 1\)"):
        run(Program(compute, "conflict"), {0, 1}, store)


def test_double_write_same_computation():
    def compute(r, p, h):
        h.write(("x",), 1)
        h.write(("x",), 2)

    store = CellStore()
    with pytest.raises(WriteConflictError, match="double write"):
        run(Program(compute, "dup"), {0}, store)


def test_computation_cannot_overwrite_input():
    def compute(r, p, h):
        h.write(("n", 0), 99)
        h.retire()

    program, store = build_countdown([1])
    with pytest.raises(WriteConflictError, match="input"):
        run(Program(compute, "clobber"), {0}, store)


def test_empty_delta_reexecutes_nothing():
    program, store = build_countdown([3, 1, 2])
    trace = run(program, range(3), store)
    before = (store.values_snapshot(), trace.snapshot())
    propagate(program, trace, store, PropagationDelta())
    assert trace.last_propagation.total_affected == 0
    assert (store.values_snapshot(), trace.snapshot()) == before


def test_unchanged_rewrite_is_suppressed():
    program, store = build_countdown([3])
    run(program, {0}, store)
    assert store.rewrite_input(("n", 0), 3) is False


def test_delta_validation():
    program, store = build_countdown([2])
    trace = run(program, {0}, store)
    with pytest.raises(DeltaError):
        propagate(program, trace, store, PropagationDelta({("ghost",)}))
    with pytest.raises(DeltaError):
        # ("out", 0, 0) exists but is computation-written, not an input
        propagate(program, trace, store, PropagationDelta({("out", 0, 0)}))
    with pytest.raises(DeltaError):
        propagate(program, trace, store, PropagationDelta(set(), set(), {17}))
    with pytest.raises(DeltaError):
        propagate(program, trace, store, PropagationDelta(set(), {0}, set()))
    with pytest.raises(DeltaError):
        PropagationDelta(set(), {4}, {4})


def test_lived_longer_and_died_earlier():
    # longer lifetime: process re-runs at its old retire round, then keeps going
    trace, store = countdown_consistency([2, 5], [6, 5])
    assert store.peek(("out", 5, 0)) == (5, 6)
    # shorter lifetime: stale tail computations must be purged
    trace, store = countdown_consistency([6, 3], [2, 3])
    assert ("out", 4, 0) not in store
    assert not trace.has((3, 0))


def test_added_and_removed_processes():
    program, store = build_countdown([2, 2])
    trace = run(program, range(2), store)
    store.install_input(("n", 2), 3)
    propagate(program, trace, store, PropagationDelta(set(), added_processes={2}))
    assert store.peek(("out", 2, 2)) == (2, 3)
    expect_trace, expect_store = fresh_run(program, trace, store)
    assert store.values_snapshot() == expect_store.values_snapshot()

    propagate(program, trace, store, PropagationDelta(set(), removed_processes={0}))
    assert ("out", 0, 0) not in store
    expect_trace, expect_store = fresh_run(program, trace, store)
    assert store.values_snapshot() == expect_store.values_snapshot()
    assert trace.snapshot() == expect_trace.snapshot()


def test_determinism_bit_equal_traces():
    program1, store1 = build_countdown([3, 1, 4, 1, 5])
    program2, store2 = build_countdown([3, 1, 4, 1, 5])
    t1 = run(program1, range(5), store1)
    t2 = run(program2, range(5), store2)
    assert t1.snapshot() == t2.snapshot()
    assert store1.values_snapshot() == store2.values_snapshot()


def subscriber_soundness(trace, store):
    expect = {}
    for (r, p), keys in trace.reads.items():
        for key in keys:
            expect.setdefault(key, set()).add((r, p))
    actual = {k: set(v) for k, v in store.subs.items()}
    assert actual == expect


def test_random_countdown_consistency_and_subscribers():
    rng = random.Random(7)
    for _ in range(120):
        k = rng.randint(1, 6)
        old = [rng.randint(1, 7) for _ in range(k)]
        new = [rng.randint(1, 7) for _ in range(k)]
        trace, store = countdown_consistency(old, new)
        subscriber_soundness(trace, store)


def test_propagation_reexecutes_exactly_the_affected_computations():
    # Oracle: diff two instrumented from-scratch runs; a computation is
    # affected when it exists in only one trace or reads different values.
    rng = random.Random(3)
    for _ in range(60):
        k = rng.randint(1, 5)
        old = [rng.randint(1, 6) for _ in range(k)]
        new = [o if rng.random() < 0.5 else rng.randint(1, 6) for o in old]

        program, store = build_countdown(old)
        old_trace = run(program, range(k), store, record_read_values=True)
        old_values = dict(old_trace.read_values)
        old_comps = set(old_trace.computations())

        changed = {("n", p) for p in range(k) if store.rewrite_input(("n", p), new[p])}
        propagate(program, old_trace, store, PropagationDelta(changed))

        program2, store2 = build_countdown(new)
        new_trace = run(program2, range(k), store2, record_read_values=True)
        affected_and_present = {
            rp
            for rp in new_trace.computations()
            if rp not in old_comps or old_values[rp] != new_trace.read_values[rp]
        }
        stats = old_trace.last_propagation
        assert stats.total_affected == len(affected_and_present), (old, new)


def test_producer_consumer_pipeline():
    def compute(r, p, h):
        if p == 0:
            if r == 0:
                h.write(("v", 1, 0), h.read(("in",)) * 2)
                h.retire()
        else:
            if r == 0:
                pass
            else:
                h.write(("res",), h.read(("v", 1, 0)) + 1)
                h.retire()

    store = CellStore()
    store.install_input(("in",), 10)
    program = Program(compute, "pipeline")
    trace = run(program, {0, 1}, store)
    assert store.peek(("res",)) == 21
    store.rewrite_input(("in",), 20)
    propagate(program, trace, store, PropagationDelta({("in",)}))
    assert store.peek(("res",)) == 41
    assert trace.last_propagation.total_affected == 2


def test_rounds_with_no_affected_computations_are_skipped():
    # Ten processes with lifetime 12; only process 9 reads an extra deep cell.
    def compute(r, p, h):
        h.read(("n", p))
        if p == 9 and r == 11:
            h.write(("deep",), h.read(("x",)))
        if r + 1 >= 12:
            h.retire()

    store = CellStore()
    for p in range(10):
        store.install_input(("n", p), 12)
    store.install_input(("x",), 1)
    program = Program(compute, "deep-read")
    trace = run(program, range(10), store)
    store.rewrite_input(("x",), 2)
    propagate(program, trace, store, PropagationDelta({("x",)}))
    assert store.peek(("deep",)) == 2
    stats = trace.last_propagation
    assert stats.total_affected == 1
    assert stats.rounds_visited == 1  # rounds 0..10 skipped outright


def test_check_restricted_reports():
    # restricted: every read targets the previous round's write
    def compute(r, p, h):
        if r == 0:
            h.write(("s", 1, p), h.read(("i", p)))
        elif r < 3:
            h.write(("s", r + 1, p), h.read(("s", r, p)) + 1)
        else:
            h.retire()

    store = CellStore()
    store.install_input(("i", 0), 5)
    trace = run(Program(compute, "chain"), {0}, store)
    report = check_restricted(trace)
    assert report.restricted
    assert report.max_reads_per_computation == 1
    assert report.max_readers_per_location == 1

    # violation: a round-2 computation reads a cell written at round 0
    def compute2(r, p, h):
        if r == 0:
            h.write(("a", p), 1)
        elif r == 2:
            h.read(("a", p))
            h.retire()

    store = CellStore()
    trace = run(Program(compute2, "skip-round"), {0}, store)
    report = check_restricted(trace)
    assert not report.restricted
    assert report.violations

    # inputs read after round 0 also break the restricted rule
    program, store = build_countdown([3])
    trace = run(program, {0}, store)
    assert not check_restricted(trace).restricted


def test_threaded_execution_matches_sequential():
    program1, store1 = build_countdown([3, 1, 4, 2])
    t1 = run(program1, range(4), store1)
    program2, store2 = build_countdown([3, 1, 4, 2])
    t2 = run(program2, range(4), store2, threads=3)
    assert t1.snapshot() == t2.snapshot()
    assert store1.values_snapshot() == store2.values_snapshot()
    for p, n in enumerate([5, 1, 2, 2]):
        store1.rewrite_input(("n", p), n)
        store2.rewrite_input(("n", p), n)
    delta = {("n", p) for p in range(4)}
    propagate(program1, t1, store1, PropagationDelta(set(delta)))
    propagate(program2, t2, store2, PropagationDelta(set(delta)), threads=3)
    assert t1.snapshot() == t2.snapshot()
    assert store1.values_snapshot() == store2.values_snapshot()
