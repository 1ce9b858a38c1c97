"""Map-reduce client tests, pinned by hand simulation and a direct fold oracle."""

import operator
import random
from functools import reduce

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from changeprop.engine import check_restricted
from changeprop.mapreduce import mr_build, mr_query_range, mr_query_total, mr_update


def fold_oracle(values, f, op, identity):
    return reduce(op, (f(v) for v in values), identity)


def test_build_sum_of_four():
    # Hand-executed build on [1,2,3,4]: rounds 0,1,2; the total lands in the
    # round-2 root cell.
    inst = mr_build([1, 2, 3, 4], lambda x: x, operator.add, 0)
    assert inst.trace.rounds_executed == 3
    assert inst.store.peek(("V", 2, 0)) == 10
    assert mr_query_total(inst) == 10
    assert inst.trace.run_stats.total_computations == 7  # 4 + 2 + 1 <= 2n


def test_build_round_shape_n4():
    inst = mr_build([1, 2, 3, 4], lambda x: x, operator.add, 0)
    assert inst.trace.run_stats.computations_per_round == [4, 2, 1]
    # partials: V[1][0] = 1+2, V[1][1] = 3+4
    assert inst.store.peek(("V", 1, 0)) == 3
    assert inst.store.peek(("V", 1, 1)) == 7


def test_build_singleton():
    inst = mr_build([5], lambda x: x, operator.add, 0)
    assert mr_query_total(inst) == 5
    assert inst.trace.rounds_executed == 1


def test_build_pads_to_power_of_two():
    inst = mr_build([1, 2, 3], lambda x: x, operator.add, 0)
    assert inst.n == 4
    assert mr_query_total(inst) == 6


def test_padding_uses_identity_not_f_of_identity():
    # f(identity) differs from the identity here; padding must not apply f
    inst = mr_build([2, 3, 4], lambda x: x * x, operator.add, 0)
    assert mr_query_total(inst) == 4 + 9 + 16


def test_max_operator():
    inst = mr_build([3, 1, 4, 1], lambda x: x, max, float("-inf"))
    assert mr_query_total(inst) == 4


def test_update_single_element():
    inst = mr_build([1] * 8, lambda x: x, operator.add, 0)
    mr_update(inst, {(5, 3)})
    assert mr_query_total(inst) == 10
    # one affected computation per round on the leaf-to-root path
    assert inst.trace.last_propagation.total_affected == 4


def test_update_examples_from_build():
    inst = mr_build([1, 2, 3, 4], lambda x: x, operator.add, 0)
    mr_update(inst, {(2, 7)})
    assert mr_query_total(inst) == 14
    assert mr_query_range(inst, 2, 2) == 7
    assert mr_query_range(inst, 0, 3) == 14
    assert mr_query_range(inst, 1, 2) == 9


def test_update_empty_batch():
    inst = mr_build([1, 2], lambda x: x, operator.add, 0)
    mr_update(inst, set())
    assert inst.trace.last_propagation.total_affected == 0


def test_update_to_same_value_suppressed():
    inst = mr_build([1, 2, 3, 4], lambda x: x, operator.add, 0)
    mr_update(inst, {(2, 3)})
    assert inst.trace.last_propagation.total_affected == 0


def test_update_all_elements_bounded_by_full_recompute():
    n = 64
    inst = mr_build(list(range(n)), lambda x: x, operator.add, 0)
    mr_update(inst, {(i, i + 1) for i in range(n)})
    assert mr_query_total(inst) == sum(range(1, n + 1))
    assert inst.trace.last_propagation.total_affected <= 2 * n


def test_update_out_of_range():
    inst = mr_build([1, 2, 3], lambda x: x, operator.add, 0)
    with pytest.raises(IndexError):
        mr_update(inst, {(3, 9)})  # padding slot is not addressable


def test_range_query_errors():
    inst = mr_build([1, 2, 3], lambda x: x, operator.add, 0)
    with pytest.raises(IndexError):
        mr_query_range(inst, 1, 3)
    with pytest.raises(IndexError):
        mr_query_range(inst, -1, 1)
    with pytest.raises(IndexError):
        mr_query_range(inst, 2, 1)


def test_restricted_model():
    inst = mr_build(list(range(16)), lambda x: x, operator.add, 0)
    report = check_restricted(inst.trace)
    assert report.restricted
    assert report.max_reads_per_computation <= 2
    assert report.max_readers_per_location == 1


OPS = {
    "sum": (operator.add, 0),
    "max": (max, float("-inf")),
    "min": (min, float("inf")),
}


@given(
    values=st.lists(st.integers(-1000, 1000), min_size=1, max_size=70),
    op_name=st.sampled_from(sorted(OPS)),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_total_and_ranges_match_fold_oracle(values, op_name, data):
    op, identity = OPS[op_name]
    inst = mr_build(values, lambda x: x, op, identity)
    assert mr_query_total(inst) == fold_oracle(values, lambda x: x, op, identity)
    m = len(values)
    i = data.draw(st.integers(0, m - 1))
    j = data.draw(st.integers(i, m - 1))
    assert mr_query_range(inst, i, j) == fold_oracle(values[i : j + 1], lambda x: x, op, identity)


@given(
    values=st.lists(st.integers(-50, 50), min_size=1, max_size=40),
    updates=st.lists(st.tuples(st.integers(0, 1000), st.integers(-50, 50)), max_size=8),
)
@settings(max_examples=60, deadline=None)
def test_updates_match_rebuilt_oracle(values, updates):
    inst = mr_build(values, lambda x: x, operator.add, 0)
    batch = {(idx % len(values), v) for idx, v in updates}
    batch = {idx: v for idx, v in batch}.items()  # one value per index
    mr_update(inst, batch)
    current = list(values)
    for idx, v in batch:
        current[idx] = v
    assert mr_query_total(inst) == sum(current)
    for i in range(len(values)):
        assert mr_query_range(inst, i, len(values) - 1) == sum(current[i:])


def test_affected_bounds_for_k_updates():
    rng = random.Random(11)
    n = 256
    logn = 8
    for k in (1, 2, 5, 17, 64):
        inst = mr_build([0] * n, lambda x: x, operator.add, 0)
        idxs = rng.sample(range(n), k)
        mr_update(inst, {(i, 1) for i in idxs})
        affected = inst.trace.last_propagation.total_affected
        assert affected <= k * (logn + 1)
        assert affected >= logn + 1


def test_larger_random_arrays_against_oracle():
    rng = random.Random(5)
    for _ in range(5):
        n = rng.randint(200, 1024)
        values = [rng.randint(-10**6, 10**6) for _ in range(n)]
        inst = mr_build(values, lambda x: x, operator.add, 0)
        assert mr_query_total(inst) == sum(values)
        batch = {rng.randrange(n): rng.randint(-100, 100) for _ in range(10)}
        mr_update(inst, batch.items())
        for idx, v in batch.items():
            values[idx] = v
        assert mr_query_total(inst) == sum(values)
        i = rng.randrange(n)
        j = rng.randrange(i, n)
        assert mr_query_range(inst, i, j) == sum(values[i : j + 1])


def test_padding_invariance():
    # building the padded array explicitly gives the same query answers
    values = [4, 7, 9, 2, 1]
    a = mr_build(values, lambda x: x, operator.add, 0)
    b = mr_build(values + [0, 0, 0], lambda x: x, operator.add, 0)
    for i in range(len(values)):
        for j in range(i, len(values)):
            assert mr_query_range(a, i, j) == mr_query_range(b, i, j)
