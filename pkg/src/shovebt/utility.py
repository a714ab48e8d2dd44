"""Execution-cost algebra and utility aggregation.

Costs live in the reals extended with two markers: infeasible (the node
cannot execute at all in the current world) and unknown (it can execute
but no estimate exists). A node's utility is a 4-tuple of cost bounds,
(success min/max, failure min/max); lower is better. Flow controls
aggregate child bounds by enumerating the possible execution paths and
folding each path's summed cost.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Iterable, NamedTuple, Sequence

if TYPE_CHECKING:
    from .tree import TreeEnvironment

#: Pessimistic stand-in used when ordering bounds that contain unknowns.
DEFAULT_UNKNOWN_COST = 1e6


@dataclass(frozen=True)
class Cost:
    """A point in R extended with infeasible and unknown markers."""

    marker: str  # "finite" | "infeasible" | "unknown"
    value: float = 0.0

    @staticmethod
    def finite(value: float) -> "Cost":
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"finite cost must be a finite real, got {value}")
        return Cost("finite", value)

    @property
    def is_finite(self) -> bool:
        return self.marker == "finite"

    @property
    def is_infeasible(self) -> bool:
        return self.marker == "infeasible"

    @property
    def is_unknown(self) -> bool:
        return self.marker == "unknown"

    def __repr__(self) -> str:
        if self.is_finite:
            return f"Cost({self.value})"
        return f"Cost.{self.marker.upper()}"


INFEASIBLE = Cost("infeasible")
UNKNOWN = Cost("unknown")


def cost_add(a: Cost, b: Cost) -> Cost:
    """Addition over extended costs: infeasible absorbs, unknown sticks."""
    if a.is_infeasible or b.is_infeasible:
        return INFEASIBLE
    if a.is_finite and b.is_finite:
        return Cost.finite(a.value + b.value)
    return UNKNOWN


def cost_sum(costs: Iterable[Cost]) -> Cost:
    total = Cost.finite(0.0)
    for c in costs:
        total = cost_add(total, c)
    return total


def _fold(costs: Sequence[Cost], pick) -> Cost:
    """Min/max over case costs; any unknown member makes the fold unknown."""
    if any(c.is_infeasible for c in costs):
        return INFEASIBLE
    if any(c.is_unknown for c in costs):
        return UNKNOWN
    return Cost.finite(pick(c.value for c in costs))


@dataclass(frozen=True)
class UtilityBounds:
    succ_min: Cost
    succ_max: Cost
    fail_min: Cost
    fail_max: Cost

    def __post_init__(self) -> None:
        fields = (self.succ_min, self.succ_max, self.fail_min, self.fail_max)
        if any(c.is_infeasible for c in fields) and not all(c.is_infeasible for c in fields):
            raise ValueError("an infeasible field requires all four fields infeasible")
        for lo, hi in ((self.succ_min, self.succ_max), (self.fail_min, self.fail_max)):
            if lo.is_finite and hi.is_finite and lo.value > hi.value:
                raise ValueError(f"bounds out of order: {lo} > {hi}")

    @staticmethod
    def of(
        succ_min: float | Cost,
        succ_max: float | Cost,
        fail_min: float | Cost,
        fail_max: float | Cost,
    ) -> "UtilityBounds":
        def coerce(v: float | Cost) -> Cost:
            return v if isinstance(v, Cost) else Cost.finite(v)

        return UtilityBounds(coerce(succ_min), coerce(succ_max), coerce(fail_min), coerce(fail_max))

    @property
    def is_infeasible(self) -> bool:
        return self.succ_min.is_infeasible

    def as_tuple(self) -> tuple[Cost, Cost, Cost, Cost]:
        return (self.succ_min, self.succ_max, self.fail_min, self.fail_max)


INFEASIBLE_BOUNDS = UtilityBounds(INFEASIBLE, INFEASIBLE, INFEASIBLE, INFEASIBLE)
UNKNOWN_BOUNDS = UtilityBounds(UNKNOWN, UNKNOWN, UNKNOWN, UNKNOWN)

# Child outcomes considered when enumerating execution paths. RUNNING
# marks a child that did not finish (and contributes no cost) in the
# cycle the parent resolved.
_SUCC = "succeeded"
_FAIL = "failed"
_RUN = "running"


class ExecutionCase(NamedTuple):
    """One resolved execution path of a flow control."""

    child_states: tuple[str, ...]
    outcome: str  # succeeded | failed
    cost_min: Cost
    cost_max: Cost


def _case_cost(
    children: Sequence[UtilityBounds], states: Sequence[str]
) -> tuple[Cost, Cost]:
    mins: list[Cost] = []
    maxes: list[Cost] = []
    for bounds, state in zip(children, states):
        if state == _SUCC:
            mins.append(bounds.succ_min)
            maxes.append(bounds.succ_max)
        elif state == _FAIL:
            mins.append(bounds.fail_min)
            maxes.append(bounds.fail_max)
    return cost_sum(mins), cost_sum(maxes)


def _feasible(children: Sequence[UtilityBounds], states: Sequence[str]) -> bool:
    """A case is possible iff every child it executes is feasible."""
    return all(
        not bounds.is_infeasible
        for bounds, state in zip(children, states)
        if state in (_SUCC, _FAIL)
    )


def parallel_cases(children: Sequence[UtilityBounds], k: int = 1) -> list[ExecutionCase]:
    """All resolved execution paths of a parallel node with threshold k."""
    n = len(children)
    if not 1 <= k <= n:
        raise ValueError(f"threshold k={k} outside [1, {n}]")
    cases: list[ExecutionCase] = []
    for states in itertools.product((_SUCC, _FAIL, _RUN), repeat=n):
        succ = states.count(_SUCC)
        fail = states.count(_FAIL)
        if succ >= k:
            outcome = _SUCC
        elif fail > n - k:
            outcome = _FAIL
        else:
            continue  # still running, not a resolved path
        if not _feasible(children, states):
            continue
        lo, hi = _case_cost(children, states)
        cases.append(ExecutionCase(states, outcome, lo, hi))
    return cases


def _bounds_from_cases(cases: Iterable[ExecutionCase]) -> UtilityBounds:
    succ = [c for c in cases if c.outcome == _SUCC]
    fail = [c for c in cases if c.outcome == _FAIL]
    # A node that cannot possibly succeed is useless to schedule: report
    # it infeasible outright. A node that cannot fail keeps feasibility
    # but has no failure estimate.
    if not succ:
        return INFEASIBLE_BOUNDS
    fail_min = _fold([c.cost_min for c in fail], min) if fail else UNKNOWN
    fail_max = _fold([c.cost_max for c in fail], max) if fail else UNKNOWN
    return UtilityBounds(
        _fold([c.cost_min for c in succ], min),
        _fold([c.cost_max for c in succ], max),
        fail_min,
        fail_max,
    )


def aggregate_parallel(children: Sequence[UtilityBounds], k: int = 1) -> UtilityBounds:
    return _bounds_from_cases(parallel_cases(children, k))


def sequence_cases(children: Sequence[UtilityBounds]) -> list[ExecutionCase]:
    """Execution paths of a sequence: all succeed, or a prefix then a failure."""
    n = len(children)
    if n == 0:
        raise ValueError("sequence needs at least one child")
    cases = []
    all_succ = tuple(_SUCC for _ in range(n))
    if _feasible(children, all_succ):
        lo, hi = _case_cost(children, all_succ)
        cases.append(ExecutionCase(all_succ, _SUCC, lo, hi))
    for i in range(n):
        states = tuple(
            _SUCC if j < i else (_FAIL if j == i else _RUN) for j in range(n)
        )
        if _feasible(children, states):
            lo, hi = _case_cost(children, states)
            cases.append(ExecutionCase(states, _FAIL, lo, hi))
    return cases


def aggregate_sequence(children: Sequence[UtilityBounds]) -> UtilityBounds:
    return _bounds_from_cases(sequence_cases(children))


def fallback_cases(children: Sequence[UtilityBounds]) -> list[ExecutionCase]:
    """Execution paths of a fallback: a failing prefix then a success, or all fail."""
    n = len(children)
    if n == 0:
        raise ValueError("fallback needs at least one child")
    cases = []
    for i in range(n):
        states = tuple(
            _FAIL if j < i else (_SUCC if j == i else _RUN) for j in range(n)
        )
        if _feasible(children, states):
            lo, hi = _case_cost(children, states)
            cases.append(ExecutionCase(states, _SUCC, lo, hi))
    all_fail = tuple(_FAIL for _ in range(n))
    if _feasible(children, all_fail):
        lo, hi = _case_cost(children, all_fail)
        cases.append(ExecutionCase(all_fail, _FAIL, lo, hi))
    return cases


def aggregate_fallback(children: Sequence[UtilityBounds]) -> UtilityBounds:
    return _bounds_from_cases(fallback_cases(children))


def tree_utility(env: "TreeEnvironment", root_id: str | None = None) -> UtilityBounds:
    """Utility of the tree = utility of its root node."""
    root = root_id if root_id is not None else env.root_id()
    return env.nodes[root].utility(env)


# -- ordering ---------------------------------------------------------------


def _scalar(cost: Cost, unknown_cost: float) -> float:
    return cost.value if cost.is_finite else unknown_cost


def utility_sort_key(
    bounds: UtilityBounds, unknown_cost: float = DEFAULT_UNKNOWN_COST
) -> tuple[int, float, float]:
    """Sort key: infeasible ranks strictly worst, then mean success cost,
    ties broken by the success maximum."""
    if bounds.is_infeasible:
        return (1, math.inf, math.inf)
    mean = (_scalar(bounds.succ_min, unknown_cost) + _scalar(bounds.succ_max, unknown_cost)) / 2.0
    return (0, mean, _scalar(bounds.succ_max, unknown_cost))


def compare_utility(
    a: UtilityBounds, b: UtilityBounds, unknown_cost: float = DEFAULT_UNKNOWN_COST
) -> int:
    """-1 if a is the better (cheaper) choice, 1 if b, 0 on a tie."""
    ka, kb = utility_sort_key(a, unknown_cost), utility_sort_key(b, unknown_cost)
    return -1 if ka < kb else (1 if ka > kb else 0)


# -- wire encoding ------------------------------------------------------------


def cost_to_json(cost: Cost) -> Any:
    return cost.value if cost.is_finite else cost.marker


def cost_from_json(value: Any) -> Cost:
    if value == "infeasible":
        return INFEASIBLE
    if value == "unknown":
        return UNKNOWN
    return Cost.finite(value)


def bounds_to_json(bounds: UtilityBounds) -> list[Any]:
    return [cost_to_json(c) for c in bounds.as_tuple()]


def bounds_from_json(values: Sequence[Any]) -> UtilityBounds:
    if len(values) != 4:
        raise ValueError(f"utility bounds need 4 entries, got {len(values)}")
    a, b, c, d = (cost_from_json(v) for v in values)
    return UtilityBounds(a, b, c, d)
