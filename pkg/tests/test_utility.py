"""Cost algebra and utility aggregation tests."""

from __future__ import annotations

import random

import pytest

from shovebt.flow import Parallel
from shovebt.node import Node
from shovebt.tree import TreeEnvironment
from shovebt.utility import (
    Cost,
    INFEASIBLE,
    INFEASIBLE_BOUNDS,
    UNKNOWN,
    UNKNOWN_BOUNDS,
    UtilityBounds,
    aggregate_fallback,
    aggregate_parallel,
    aggregate_sequence,
    bounds_from_json,
    bounds_to_json,
    compare_utility,
    cost_add,
    parallel_cases,
    tree_utility,
    utility_sort_key,
)

from helpers import (
    bounds_to_oracle,
    oracle_fallback,
    oracle_parallel,
    oracle_sequence,
    oracle_to_bounds,
)

B = UtilityBounds.of
TABLE_CHILD = B(1, 10, 2, 5)


def random_cost(rng: random.Random) -> Cost:
    roll = rng.random()
    if roll < 0.2:
        return INFEASIBLE
    if roll < 0.4:
        return UNKNOWN
    return Cost.finite(rng.randint(-20, 20))


def random_bounds(rng: random.Random) -> UtilityBounds:
    roll = rng.random()
    if roll < 0.15:
        return INFEASIBLE_BOUNDS
    def pair():
        lo = rng.choice([UNKNOWN, Cost.finite(rng.randint(0, 10))])
        if lo.is_unknown:
            return lo, rng.choice([UNKNOWN, Cost.finite(rng.randint(0, 20))])
        return lo, rng.choice([UNKNOWN, Cost.finite(lo.value + rng.randint(0, 10))])
    smin, smax = pair()
    fmin, fmax = pair()
    return UtilityBounds(smin, smax, fmin, fmax)


# -- cost algebra -----------------------------------------------------------------


def test_cost_add_examples():
    assert cost_add(Cost.finite(1), Cost.finite(2)) == Cost.finite(3)
    assert cost_add(INFEASIBLE, Cost.finite(5)) == INFEASIBLE
    assert cost_add(UNKNOWN, Cost.finite(3)) == UNKNOWN
    assert cost_add(UNKNOWN, INFEASIBLE) == INFEASIBLE


def test_cost_rejects_non_finite_reals():
    with pytest.raises(ValueError):
        Cost.finite(float("inf"))
    with pytest.raises(ValueError):
        Cost.finite(float("nan"))


def test_cost_add_properties_random_triples():
    rng = random.Random(2024)
    failures = 0
    for _ in range(1000):
        a, b, c = (random_cost(rng) for _ in range(3))
        if cost_add(a, b) != cost_add(b, a):
            failures += 1
        if cost_add(cost_add(a, b), c) != cost_add(a, cost_add(b, c)):
            failures += 1
        if cost_add(a, INFEASIBLE) != INFEASIBLE:
            failures += 1
        if a.is_finite and cost_add(a, Cost.finite(0)) != a:
            failures += 1
        if not a.is_infeasible and not b.is_infeasible and (a.is_unknown or b.is_unknown):
            if not cost_add(a, b).is_unknown:
                failures += 1
    assert failures == 0


def test_mixed_infeasible_bounds_rejected():
    with pytest.raises(ValueError):
        UtilityBounds(INFEASIBLE, Cost.finite(1), Cost.finite(1), Cost.finite(1))
    with pytest.raises(ValueError):
        UtilityBounds(Cost.finite(5), Cost.finite(1), Cost.finite(1), Cost.finite(1))


# -- parallel aggregation -----------------------------------------------------------


def test_table_of_parallel_cases_two_children():
    """Six resolved paths for two identical children at threshold 1."""
    cases = parallel_cases([TABLE_CHILD, TABLE_CHILD], k=1)
    rows = {
        (c.child_states, c.outcome): (c.cost_min.value, c.cost_max.value) for c in cases
    }
    assert rows == {
        (("succeeded", "succeeded"), "succeeded"): (2, 20),
        (("succeeded", "failed"), "succeeded"): (3, 15),
        (("succeeded", "running"), "succeeded"): (1, 10),
        (("running", "succeeded"), "succeeded"): (1, 10),
        (("failed", "succeeded"), "succeeded"): (3, 15),
        (("failed", "failed"), "failed"): (4, 10),
    }


def test_parallel_aggregation_two_children_footer():
    assert aggregate_parallel([TABLE_CHILD, TABLE_CHILD], k=1) == B(1, 20, 4, 10)


def test_parallel_single_child_passthrough():
    assert aggregate_parallel([TABLE_CHILD], k=1) == TABLE_CHILD


def test_parallel_three_identical_children():
    child = B(1, 1, 1, 1)
    got = aggregate_parallel([child] * 3, k=1)
    assert bounds_to_oracle(got) == oracle_parallel([(1, 1, 1, 1)] * 3, 1)


def test_parallel_matches_bruteforce_oracle():
    rng = random.Random(90210)
    for _ in range(300):
        n = rng.randint(1, 4)
        children = [random_bounds(rng) for _ in range(n)]
        k = rng.randint(1, n)
        got = aggregate_parallel(children, k)
        expected = oracle_parallel([bounds_to_oracle(c) for c in children], k)
        assert got == oracle_to_bounds(expected), (children, k)


def test_parallel_threshold_validation():
    with pytest.raises(ValueError):
        aggregate_parallel([TABLE_CHILD], k=2)
    with pytest.raises(ValueError):
        aggregate_parallel([TABLE_CHILD], k=0)


def test_parallel_with_one_infeasible_child():
    got = aggregate_parallel([TABLE_CHILD, INFEASIBLE_BOUNDS], k=1)
    assert got.succ_min == Cost.finite(1)
    assert got.succ_max == Cost.finite(10)
    assert got.fail_min == UNKNOWN and got.fail_max == UNKNOWN
    assert aggregate_parallel([INFEASIBLE_BOUNDS, INFEASIBLE_BOUNDS], k=1) == INFEASIBLE_BOUNDS


# -- sequence / fallback aggregation ---------------------------------------------------


def test_sequence_single_child_passthrough():
    assert aggregate_sequence([TABLE_CHILD]) == TABLE_CHILD


def test_sequence_two_children():
    # success path 1+1 / 10+10; failure paths: fail first (2,5) or
    # succeed-then-fail (1+2, 10+5)
    assert aggregate_sequence([TABLE_CHILD, TABLE_CHILD]) == B(2, 20, 2, 15)


def test_fallback_two_children():
    # success paths: first succeeds (1,10) or fail-then-succeed (2+1, 5+10)
    assert aggregate_fallback([TABLE_CHILD, TABLE_CHILD]) == B(1, 15, 4, 10)


def test_sequence_with_infeasible_child_is_infeasible():
    assert aggregate_sequence([TABLE_CHILD, INFEASIBLE_BOUNDS]) == INFEASIBLE_BOUNDS
    assert aggregate_sequence([INFEASIBLE_BOUNDS, TABLE_CHILD]) == INFEASIBLE_BOUNDS


def test_fallback_with_later_infeasible_child_keeps_earlier_paths():
    got = aggregate_fallback([TABLE_CHILD, INFEASIBLE_BOUNDS])
    assert got.succ_min == Cost.finite(1) and got.succ_max == Cost.finite(10)
    assert got.fail_min == UNKNOWN and got.fail_max == UNKNOWN


def test_sequence_fallback_match_bruteforce_oracle():
    rng = random.Random(777)
    for _ in range(300):
        n = rng.randint(1, 4)
        children = [random_bounds(rng) for _ in range(n)]
        oracle_children = [bounds_to_oracle(c) for c in children]
        assert aggregate_sequence(children) == oracle_to_bounds(oracle_sequence(oracle_children))
        assert aggregate_fallback(children) == oracle_to_bounds(oracle_fallback(oracle_children))


def test_all_or_nothing_infeasibility_preserved_by_aggregation():
    rng = random.Random(31)
    for _ in range(400):
        n = rng.randint(1, 4)
        children = [random_bounds(rng) for _ in range(n)]
        for agg in (
            lambda c: aggregate_parallel(c, rng.randint(1, len(c))),
            aggregate_sequence,
            aggregate_fallback,
        ):
            got = agg(children)
            fields = got.as_tuple()
            assert all(f.is_infeasible for f in fields) or not any(
                f.is_infeasible for f in fields
            )
            for lo, hi in ((fields[0], fields[1]), (fields[2], fields[3])):
                if lo.is_finite and hi.is_finite:
                    assert lo.value <= hi.value


# -- node/tree utility -----------------------------------------------------------------


class CostLeaf(Node):
    KIND = "CostLeaf"
    MAX_CHILDREN = 0
    OPTIONS = {"bounds": "list<float>"}
    OPTION_DEFAULTS = {"bounds": []}

    def utility(self, env):
        vals = self.option("bounds")
        return UtilityBounds.of(*vals) if vals else UNKNOWN_BOUNDS


def test_leaf_utility_defaults_to_unknown():
    env = TreeEnvironment()
    env.add_node(CostLeaf("leaf"))
    assert tree_utility(env) == UNKNOWN_BOUNDS


def test_tree_utility_of_parallel_example():
    env = TreeEnvironment()
    env.add_node(Parallel("root"))
    env.add_child("root", CostLeaf("c1", {"bounds": [1, 10, 2, 5]}))
    env.add_child("root", CostLeaf("c2", {"bounds": [1, 10, 2, 5]}))
    assert tree_utility(env) == B(1, 20, 4, 10)


class InfeasibleLeaf(Node):
    KIND = "InfeasibleLeaf"
    MAX_CHILDREN = 0

    def utility(self, env):
        return INFEASIBLE_BOUNDS


def test_tree_utility_single_infeasible_leaf():
    env = TreeEnvironment()
    env.add_node(InfeasibleLeaf("leaf"))
    assert tree_utility(env) == INFEASIBLE_BOUNDS


def test_tree_utility_matches_recursive_oracle():
    rng = random.Random(13)
    for _ in range(50):
        env = TreeEnvironment()
        env.add_node(Parallel("n0"))
        count = rng.randint(2, 10)
        parents = ["n0"]
        kinds = {"n0": "parallel"}
        for i in range(1, count):
            parent = rng.choice(parents)
            node_id = f"n{i}"
            if rng.random() < 0.4:
                from shovebt.flow import Fallback, Sequence

                cls = rng.choice([Sequence, Fallback, Parallel])
                env.add_child(parent, cls(node_id))
                parents.append(node_id)
                kinds[node_id] = cls.KIND.lower()
            else:
                env.add_child(
                    parent,
                    CostLeaf(node_id, {"bounds": [1.0, 2.0, 1.0, 2.0]}),
                )
                kinds[node_id] = "leaf"
        for parent in parents:
            if not env.graph.children(parent):
                env.add_child(parent, CostLeaf(f"{parent}_pad", {"bounds": [1.0, 2.0, 1.0, 2.0]}))

        def evaluate(node_id: str):
            children = env.graph.children(node_id)
            if not children:
                return bounds_to_oracle(env.nodes[node_id].utility(env))
            child_bounds = [evaluate(c) for c in children]
            kind = kinds[node_id]
            if kind == "parallel":
                return oracle_parallel(child_bounds, 1)
            if kind == "sequence":
                return oracle_sequence(child_bounds)
            return oracle_fallback(child_bounds)

        assert bounds_to_oracle(tree_utility(env)) == evaluate("n0")


# -- ordering ---------------------------------------------------------------------------


def test_infeasible_ranks_strictly_worst():
    assert compare_utility(INFEASIBLE_BOUNDS, B(1, 1, 1, 1)) == 1
    assert compare_utility(B(1, 1, 1, 1), INFEASIBLE_BOUNDS) == -1
    assert compare_utility(INFEASIBLE_BOUNDS, UNKNOWN_BOUNDS) == 1


def test_identical_bounds_tie():
    assert compare_utility(TABLE_CHILD, TABLE_CHILD) == 0


def test_tie_on_mean_broken_by_success_max():
    a = B(1, 3, 0, 0)
    b = B(2, 2, 0, 0)
    assert compare_utility(a, b) == 1  # same mean, smaller max wins


def test_compare_against_exhaustive_grid():
    """Spot-check the documented rule on a full 5-value grid."""
    grid = [0.0, 1.0, 2.0, 3.0, 4.0]
    pessimistic = 1e6
    bounds = [B(lo, hi, 0, 0) for lo in grid for hi in grid if lo <= hi]
    for a in bounds:
        for b in bounds:
            mean_a = (a.succ_min.value + a.succ_max.value) / 2
            mean_b = (b.succ_min.value + b.succ_max.value) / 2
            if mean_a != mean_b:
                expected = -1 if mean_a < mean_b else 1
            elif a.succ_max.value != b.succ_max.value:
                expected = -1 if a.succ_max.value < b.succ_max.value else 1
            else:
                expected = 0
            assert compare_utility(a, b, pessimistic) == expected


def test_compare_is_total_preorder_on_random_sample():
    rng = random.Random(55)
    sample = [random_bounds(rng) for _ in range(60)]
    for a in sample:
        for b in sample:
            assert compare_utility(a, b) == -compare_utility(b, a)
    for a in sample:
        for b in sample:
            for c in sample:
                if compare_utility(a, b) <= 0 and compare_utility(b, c) <= 0:
                    assert compare_utility(a, c) <= 0


def test_sort_key_handles_unknowns_pessimistically():
    finite = B(1, 2, 1, 2)
    unknown_heavy = UtilityBounds(UNKNOWN, UNKNOWN, UNKNOWN, UNKNOWN)
    assert utility_sort_key(finite) < utility_sort_key(unknown_heavy)
    assert utility_sort_key(unknown_heavy) < utility_sort_key(INFEASIBLE_BOUNDS)


# -- wire encoding ------------------------------------------------------------------------


def test_bounds_json_round_trip():
    for bounds in (TABLE_CHILD, INFEASIBLE_BOUNDS, UNKNOWN_BOUNDS, B(0, 0, 0, 0)):
        assert bounds_from_json(bounds_to_json(bounds)) == bounds
