"""List-contraction tests: hand-pinned examples, trace audits, rebuild oracle."""

import operator
import random
from functools import reduce

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from changeprop.coins import CoinOracle
from changeprop.engine import check_restricted, fresh_run
from changeprop.listseq import DynamicSequence, SequenceError, build_chains, l_key, r_key


def rebuild(seq: DynamicSequence) -> DynamicSequence:
    nodes = [(seq.l0[u], seq.r0[u], seq.values[u]) for u in range(seq.n)]
    return DynamicSequence(nodes, seq.op, seq.coins.seed)


def assert_matches_rebuild(seq: DynamicSequence):
    fresh = rebuild(seq)
    assert seq.store.values_snapshot() == fresh.store.values_snapshot()
    assert seq.trace.snapshot() == fresh.trace.snapshot()


def chains_of(seq: DynamicSequence) -> list[list[int]]:
    heads = [u for u in range(seq.n) if seq.l0[u] is None]
    out = []
    for h in heads:
        row, v = [], h
        while v is not None:
            row.append(v)
            v = seq.r0[v]
        out.append(row)
    return out


def live_nodes_per_round(seq: DynamicSequence) -> list[set[int]]:
    rounds = seq.trace.rounds_executed
    live = [set() for _ in range(rounds)]
    for (r, p) in seq.trace.computations():
        live[r].add(p)
    return live


def test_single_node_finalizes_round_zero():
    seq = DynamicSequence([(None, None, 7)], seed=3)
    assert seq.death_round(0) == 0
    assert seq.trace.rounds_executed == 1
    assert seq.representative(0) == 0


def test_empty_input():
    seq = DynamicSequence([], seed=1)
    assert seq.trace.rounds_executed == 0
    assert seq.store.values_snapshot() == {}


def test_two_node_chain_splice_round_matches_coins():
    seed = 11
    seq, [ids] = build_chains([[1, 2]], seed=seed)
    u, v = ids
    coins = CoinOracle(seed)
    expect = next(r for r in range(1000) if coins.heads(r, u) and not coins.heads(r, v))
    assert seq.death_round(u) == expect
    assert seq.death_round(v) == expect + 1  # tail finalizes once isolated
    assert seq.query_value(u, v) == 3


def test_inconsistent_links_rejected():
    with pytest.raises(SequenceError, match="prev"):
        DynamicSequence([(None, 1, 0), (None, None, 0)])
    with pytest.raises(SequenceError, match="cycle"):
        DynamicSequence([(1, 1, 0), (0, 0, 0)])


def test_split_middle_of_three_chain():
    seq, [ids] = build_chains([[10, 20, 30]], seed=5)
    a, b, c = ids
    seq.batch_split([b])
    assert seq.same_list(a, b)
    assert not seq.same_list(b, c)
    assert seq.query_value(a, b) == 30
    assert_matches_rebuild(seq)


def test_split_every_node_of_eight_chain():
    seq, [ids] = build_chains([list(range(8))], seed=9)
    seq.batch_split(ids[:-1])
    assert all(seq.death_round(u) == 0 for u in ids)
    assert_matches_rebuild(seq)


def test_split_tail_rejected_and_empty_batch():
    seq, [ids] = build_chains([[1, 2]], seed=0)
    with pytest.raises(SequenceError, match="tail"):
        seq.batch_split([ids[-1]])
    seq.batch_split([])
    assert seq.trace.last_propagation.total_affected == 0


def test_join_two_singletons():
    seq, [[a], [b]] = build_chains([[4], [6]], seed=2)
    seq.batch_join([(a, b)])
    assert seq.same_list(a, b)
    assert seq.query_value(a, b) == 10
    assert_matches_rebuild(seq)


def test_join_validations():
    seq, [ida, idb, idc] = build_chains([[1, 2], [3, 4], [5]], seed=7)
    with pytest.raises(SequenceError, match="not a tail"):
        seq.batch_join([(ida[0], idb[0])])
    with pytest.raises(SequenceError, match="not a head"):
        seq.batch_join([(ida[1], idb[1])])
    with pytest.raises(SequenceError, match="cycle"):
        seq.batch_join([(ida[1], ida[0])])
    # cycle through the batch itself: a->b and b->a
    with pytest.raises(SequenceError, match="cycle"):
        seq.batch_join([(ida[1], idb[0]), (idb[1], ida[0])])
    # one tail joined to two different heads
    with pytest.raises(SequenceError, match="distinct"):
        seq.batch_join([(ida[1], idb[0]), (ida[1], idc[0])])


def test_join_pairs_of_two_chains():
    k = 8
    seq, ids = build_chains([[i, i + 1] for i in range(k)], seed=13)
    seq.batch_join([(ids[i][1], ids[i + 1][0]) for i in range(0, k, 2)])
    assert [len(c) for c in chains_of(seq)] == [4] * (k // 2)
    assert_matches_rebuild(seq)
    for i in range(0, k, 2):
        assert seq.query_value(ids[i][0], ids[i + 1][1]) == 4 * i + 4


def test_update_value_and_suppression():
    seq, [ids] = build_chains([[1, 2, 3, 4]], seed=21)
    seq.batch_update_value([(ids[2], 9)])
    assert seq.query_value(ids[0], ids[3]) == 16
    seq.batch_update_value([(ids[2], 9)])  # unchanged value: nothing re-runs
    assert seq.trace.last_propagation.total_affected == 0
    seq.batch_update_value([])
    assert seq.trace.last_propagation.total_affected == 0
    assert_matches_rebuild(seq)


def test_query_single_and_whole_chain():
    seq, [ids] = build_chains([[1, 2, 3, 4]], seed=4)
    assert seq.query_value(ids[1], ids[1]) == 2
    assert seq.query_value(ids[0], ids[3]) == 10
    assert seq.batch_query_value([(ids[0], ids[1]), (ids[2], ids[3])]) == [3, 7]


def test_query_error_cases():
    seq, [ida, idb] = build_chains([[1, 2, 3], [4]], seed=8)
    with pytest.raises(SequenceError, match="different lists"):
        seq.query_value(ida[0], idb[0])
    with pytest.raises(SequenceError, match="does not follow"):
        seq.query_value(ida[2], ida[0])
    with pytest.raises(SequenceError, match="unknown"):
        seq.query_value(0, 99)


def test_same_list_examples():
    seq, [ida, idb] = build_chains([[1, 2], [3]], seed=6)
    assert seq.same_list(ida[0], ida[0])
    assert not seq.same_list(ida[0], idb[0])
    seq.batch_join([(ida[1], idb[0])])
    assert seq.same_list(ida[0], idb[0])
    assert_matches_rebuild(seq)


def audit_chain_shape(seq: DynamicSequence):
    """Per round: L/R mutually consistent over live nodes; no two adjacent
    splices; tails never splice."""
    peek = seq.store.peek
    for r, live in enumerate(live_nodes_per_round(seq)):
        spliced = set()
        for u in live:
            left, right = peek(l_key(r, u)), peek(r_key(r, u))
            if right is not None:
                assert right in live
                assert peek(l_key(r, right)) == u
            if left is not None:
                assert left in live
                assert peek(r_key(r, left)) == u
            if seq.death_round(u) == r:
                if right is None:
                    assert left is None, f"tail {u} spliced at round {r}"
                elif left is None and right is None:
                    pass
                else:
                    spliced.add(u)
        for u in spliced:
            right = peek(r_key(r, u))
            assert right not in spliced, f"adjacent nodes {u}, {right} both spliced"


def fold_slice(values, op):
    return reduce(op, values)


@given(
    lengths=st.lists(st.integers(1, 12), min_size=1, max_size=4),
    seed=st.integers(0, 2**32),
    op_name=st.sampled_from(["sum", "max"]),
)
@settings(max_examples=40, deadline=None)
def test_random_chain_queries_match_fold_oracle(lengths, seed, op_name):
    rng = random.Random(seed)
    op = operator.add if op_name == "sum" else max
    chains = [[rng.randint(-50, 50) for _ in range(m)] for m in lengths]
    seq, ids = build_chains(chains, op=op, seed=seed)
    audit_chain_shape(seq)
    for chain, row in zip(chains, ids):
        for i in range(len(row)):
            for j in range(i, len(row)):
                assert seq.query_value(row[i], row[j]) == fold_slice(chain[i : j + 1], op)
        rep = seq.representative(row[0])
        assert all(seq.representative(u) == rep for u in row)


def test_random_mutations_match_rebuild():
    rng = random.Random(99)
    for trial in range(25):
        n = rng.randint(2, 24)
        values = [rng.randint(-9, 9) for _ in range(n)]
        # start as one chain, then mutate randomly
        seq, [ids] = build_chains([values], seed=trial)
        model = {u: values[k] for k, u in enumerate(ids)}
        for _ in range(4):
            op = rng.choice(["split", "join", "update"])
            if op == "split":
                cands = [u for u in range(seq.n) if seq.r0[u] is not None]
                if cands:
                    seq.batch_split(rng.sample(cands, rng.randint(1, min(3, len(cands)))))
            elif op == "join":
                tails = [u for u in range(seq.n) if seq.r0[u] is None]
                heads = [u for u in range(seq.n) if seq.l0[u] is None]
                rng.shuffle(tails)
                joins = []
                used_heads = set()
                leaders = {}

                def find(x):
                    while leaders.get(x, x) != x:
                        x = leaders.get(x, x)
                    return x

                for t in tails[: rng.randint(1, 3)]:
                    options = [
                        h
                        for h in heads
                        if h not in used_heads and find(seq.representative(h)) != find(seq.representative(t))
                    ]
                    if options:
                        h = rng.choice(options)
                        used_heads.add(h)
                        joins.append((t, h))
                        leaders[find(seq.representative(t))] = find(seq.representative(h))
                if joins:
                    seq.batch_join(joins)
            else:
                batch = [(rng.randrange(n), rng.randint(-9, 9)) for _ in range(rng.randint(1, 3))]
                seq.batch_update_value(batch)
                for u, v in dict(batch).items():
                    model[u] = v
            assert_matches_rebuild(seq)
            audit_chain_shape(seq)
            # spot-check folds against the mirror structure
            for row in chains_of(seq):
                i = rng.randrange(len(row))
                j = rng.randrange(i, len(row))
                expect = fold_slice([model[u] for u in row[i : j + 1]], seq.op)
                assert seq.query_value(row[i], row[j]) == expect


def test_convergence_round_bound():
    rng = random.Random(1)
    for seed in range(12):
        n = rng.choice([64, 256, 1024])
        seq, _ = build_chains([list(range(n))], seed=seed)
        logn = (n - 1).bit_length()
        assert seq.trace.rounds_executed <= 3 * logn + 10


def test_restricted_model():
    seq, _ = build_chains([list(range(32))], seed=5)
    report = check_restricted(seq.trace)
    assert report.restricted
    assert report.max_reads_per_computation <= 4
    assert report.max_writes_per_computation <= 5
    assert report.max_readers_per_location <= 2


def test_propagation_affected_counts_stay_small():
    # one value change touches O(1) computations per round
    n = 512
    seq, [ids] = build_chains([[0] * n], seed=17)
    seq.batch_update_value([(ids[n // 2], 5)])
    stats = seq.trace.last_propagation
    assert stats.round0_affected <= 2
    assert all(c <= 4 for c in stats.affected_per_round.values())
