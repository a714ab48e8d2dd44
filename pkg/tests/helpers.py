"""Shared test fixtures: scripted node types, independent oracles, and
random tree generators.

The oracles here are deliberately written against plain Python data
(floats, strings, dicts) rather than the library's types, so they stay
independent of the code paths they check.
"""

from __future__ import annotations

import random
from typing import Any

from shovebt.dataflow import Ref
from shovebt.engine import EngineConfig, TickEngine
from shovebt.flow import Fallback, Parallel, Sequence
from shovebt.node import Node
from shovebt.states import NodeState
from shovebt.tree import TreeEnvironment
from shovebt import utility


# -- scripted node types -------------------------------------------------------


class ScriptedLeaf(Node):
    """Leaf that replays a scripted list of tick results.

    The script restarts after an untick-to-idle or a reset, and holds
    its position while paused; the last entry repeats once exhausted.
    """

    KIND = "ScriptedLeaf"
    MAX_CHILDREN = 0
    OPTIONS = {"script": "list<string>"}

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._pos = 0

    def on_tick(self, ctx):
        script = self.option("script")
        state = script[min(self._pos, len(script) - 1)]
        self._pos += 1
        return NodeState(state)

    def on_untick(self, ctx):
        self._pos = 0
        return None

    def on_reset(self, ctx):
        self._pos = 0


class OutputLeaf(Node):
    """Leaf that writes a constant to its output when ticked."""

    KIND = "OutputLeaf"
    MAX_CHILDREN = 0
    OPTIONS = {"value_type": "type", "value": Ref("value_type")}
    OUTPUTS = {"out": Ref("value_type")}

    def on_tick(self, ctx):
        self.set_output(ctx.env, "out", self.option("value"))
        return NodeState.SUCCEEDED


class InputLeaf(Node):
    """Leaf that records the values of its input when ticked."""

    KIND = "InputLeaf"
    MAX_CHILDREN = 0
    OPTIONS = {"value_type": "type"}
    INPUTS = {"in": Ref("value_type")}

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.seen: list[Any] = []

    def on_tick(self, ctx):
        self.seen.append(self.input(ctx.env, "in"))
        return NodeState.SUCCEEDED


class TaskLeaf(Node):
    """Leaf driving a manually completed background task."""

    KIND = "TaskLeaf"
    MAX_CHILDREN = 0
    OPTIONS = {"pausable": "bool"}
    OPTION_DEFAULTS = {"pausable": False}

    def on_tick(self, ctx):
        if self.task is None or not self.task.live:
            if self.task is not None:
                done = self.task.status
                self._task = None
                if done.value == "done-success":
                    return NodeState.SUCCEEDED
                if done.value == "done-failure":
                    return NodeState.FAILED
            self.start_background(ctx.env, pausable=self.option("pausable"))
        return NodeState.RUNNING


def build_env(*nodes: Node, edges: list[tuple[str, str]] = ()) -> TreeEnvironment:
    env = TreeEnvironment()
    for node in nodes:
        env.add_node(node)
    for parent, child in edges:
        env.add_child(parent, child)
    return env


def scripted_tree(kind: str, scripts: list[list[str]], **options) -> TreeEnvironment:
    """Root of the given flow-control kind over ScriptedLeaf children."""
    root = {"Sequence": Sequence, "Fallback": Fallback, "Parallel": Parallel}[kind](
        "root", options
    )
    env = TreeEnvironment()
    env.add_node(root)
    for i, script in enumerate(scripts):
        env.add_child("root", ScriptedLeaf(f"leaf{i}", {"script": script}))
    return env


def setup_and_engine(env: TreeEnvironment, **config) -> TickEngine:
    engine = TickEngine(env, EngineConfig(**config))
    engine.setup()
    return engine


# -- reference interpreters (independent of the engine) ------------------------


def ref_sequence(child_states: list[str]) -> tuple[str, int]:
    """(result, number of children ticked) for a reactive sequence."""
    for i, state in enumerate(child_states):
        if state == "failed":
            return "failed", i + 1
        if state == "running":
            return "running", i + 1
    return "succeeded", len(child_states)


def ref_fallback(child_states: list[str]) -> tuple[str, int]:
    for i, state in enumerate(child_states):
        if state == "succeeded":
            return "succeeded", i + 1
        if state == "running":
            return "running", i + 1
    return "failed", len(child_states)


def ref_parallel(child_states: list[str], k: int) -> str:
    succ = child_states.count("succeeded")
    fail = child_states.count("failed")
    if succ >= k:
        return "succeeded"
    if fail > len(child_states) - k:
        return "failed"
    return "running"


# -- brute-force utility oracle -------------------------------------------------
# Bounds are 4-tuples over float | "x" | "?" (success min/max, failure min/max).


def _oracle_add(a, b):
    if a == "x" or b == "x":
        return "x"
    if a == "?" or b == "?":
        return "?"
    return a + b


def _oracle_sum(values):
    total = 0.0
    for v in values:
        total = _oracle_add(total, v)
    return total


def _oracle_fold(values, pick):
    if any(v == "x" for v in values):
        return "x"
    if any(v == "?" for v in values):
        return "?"
    return pick(values)


def _oracle_collect(children, assignments):
    """Fold success/failure path costs into a bounds tuple."""
    succ_cases, fail_cases = [], []
    for states, outcome in assignments:
        if any(children[i] == ("x", "x", "x", "x") and states[i] != "running"
               for i in range(len(children))):
            continue  # path would execute an infeasible child
        mins = _oracle_sum(
            children[i][0] if states[i] == "succeeded" else children[i][2]
            for i in range(len(children))
            if states[i] != "running"
        )
        maxes = _oracle_sum(
            children[i][1] if states[i] == "succeeded" else children[i][3]
            for i in range(len(children))
            if states[i] != "running"
        )
        (succ_cases if outcome == "succeeded" else fail_cases).append((mins, maxes))
    if not succ_cases:
        return ("x", "x", "x", "x")
    smin = _oracle_fold([c[0] for c in succ_cases], min)
    smax = _oracle_fold([c[1] for c in succ_cases], max)
    fmin = _oracle_fold([c[0] for c in fail_cases], min) if fail_cases else "?"
    fmax = _oracle_fold([c[1] for c in fail_cases], max) if fail_cases else "?"
    return (smin, smax, fmin, fmax)


def oracle_parallel(children, k):
    n = len(children)
    assignments = []

    def walk(prefix):
        if len(prefix) == n:
            succ = prefix.count("succeeded")
            fail = prefix.count("failed")
            if succ >= k:
                assignments.append((tuple(prefix), "succeeded"))
            elif fail > n - k:
                assignments.append((tuple(prefix), "failed"))
            return
        for state in ("succeeded", "failed", "running"):
            walk(prefix + [state])

    walk([])
    return _oracle_collect(children, assignments)


def oracle_sequence(children):
    n = len(children)
    assignments = [(tuple(["succeeded"] * n), "succeeded")]
    for i in range(n):
        states = ["succeeded"] * i + ["failed"] + ["running"] * (n - i - 1)
        assignments.append((tuple(states), "failed"))
    return _oracle_collect(children, assignments)


def oracle_fallback(children):
    n = len(children)
    assignments = []
    for i in range(n):
        states = ["failed"] * i + ["succeeded"] + ["running"] * (n - i - 1)
        assignments.append((tuple(states), "succeeded"))
    assignments.append((tuple(["failed"] * n), "failed"))
    return _oracle_collect(children, assignments)


def bounds_to_oracle(b: utility.UtilityBounds):
    def enc(c):
        if c.is_finite:
            return c.value
        return "x" if c.is_infeasible else "?"

    return tuple(enc(c) for c in b.as_tuple())


def oracle_to_bounds(t) -> utility.UtilityBounds:
    def dec(v):
        if v == "x":
            return utility.INFEASIBLE
        if v == "?":
            return utility.UNKNOWN
        return utility.Cost.finite(v)

    return utility.UtilityBounds(*(dec(v) for v in t))


# -- random structure generators -------------------------------------------------


VALUE_SAMPLES = {
    "int": lambda rng: rng.randint(-99, 99),
    "string": lambda rng: rng.choice(["red", "green", "door", ""]),
    "pose2d": lambda rng: [rng.randint(0, 9), rng.randint(0, 9)],
}


def random_tree_env(rng: random.Random, max_nodes: int = 50) -> TreeEnvironment:
    """Random valid tree of flow controls over scripted leaves, with
    type-correct wirings between OutputLeaf/InputLeaf pairs of mixed
    value types."""
    env = TreeEnvironment()
    total = rng.randint(1, max_nodes)
    kinds = []
    value_types: dict[str, str] = {}
    for i in range(total):
        roll = rng.random()
        if i == 0 or roll < 0.35:
            kind = rng.choice(["Sequence", "Fallback", "Parallel"])
        elif roll < 0.55:
            kind = "OutputLeaf"
        elif roll < 0.75:
            kind = "InputLeaf"
        else:
            kind = "ScriptedLeaf"
        kinds.append(kind)
    for i, kind in enumerate(kinds):
        node_id = f"n{i}"
        if kind in ("OutputLeaf", "InputLeaf"):
            value_types[node_id] = rng.choice(sorted(VALUE_SAMPLES))
        if kind == "OutputLeaf":
            vt = value_types[node_id]
            node = OutputLeaf(node_id, {"value_type": vt, "value": VALUE_SAMPLES[vt](rng)})
        elif kind == "InputLeaf":
            node = InputLeaf(node_id, {"value_type": value_types[node_id]})
        elif kind == "ScriptedLeaf":
            node = ScriptedLeaf(node_id, {"script": [rng.choice(["succeeded", "failed"])]})
        elif kind == "Parallel":
            node = Parallel(node_id)
        elif kind == "Fallback":
            node = Fallback(node_id)
        else:
            node = Sequence(node_id)
        env.add_node(node)
    flow_ids = [f"n{i}" for i, k in enumerate(kinds) if k in ("Sequence", "Fallback", "Parallel")]
    for i in range(1, total):
        parent = rng.choice([f for f in flow_ids if int(f[1:]) < i] or ["n0"])
        env.add_child(parent, f"n{i}")
    outputs = [f"n{i}" for i, k in enumerate(kinds) if k == "OutputLeaf"]
    inputs = [f"n{i}" for i, k in enumerate(kinds) if k == "InputLeaf"]
    for target in inputs:
        compatible = [o for o in outputs if value_types[o] == value_types[target]]
        if compatible and rng.random() < 0.8:
            env.wire((rng.choice(compatible), "out"), (target, "in"))
    return env


def random_tree_doc(rng: random.Random, max_nodes: int = 20) -> dict:
    """Random valid tree document over the standard node library."""
    total = rng.randint(1, max_nodes)
    nodes = []
    edges = []
    flow_ids: list[str] = []
    pose_sources: list[str] = []
    pose_sinks: list[str] = []
    for i in range(total):
        node_id = f"n{i}"
        roll = rng.random()
        if i == 0 or roll < 0.4:
            kind = rng.choice(["Sequence", "Fallback", "Parallel"])
            options = (
                {"success_threshold": 1} if kind == "Parallel" else {}
            )
            flow_ids.append(node_id)
        elif roll < 0.6:
            kind = "ConstantValue"
            value_type = rng.choice(["int", "string", "pose2d"])
            value = {
                "int": rng.randint(-5, 99),
                "string": rng.choice(["red", "green", "door"]),
                "pose2d": [rng.randint(0, 9), rng.randint(0, 9)],
            }[value_type]
            options = {"value_type": value_type, "value": value}
            if value_type == "pose2d":
                pose_sources.append(node_id)
        elif roll < 0.8:
            kind = "MoveTo"
            options = {}
            pose_sinks.append(node_id)
        else:
            kind = "DoorIsOpen"
            options = {"door": rng.choice(["d1", "d2"])}
        nodes.append({"id": node_id, "kind": kind, "options": options})
        if i > 0:
            parent = rng.choice(flow_ids[: len(flow_ids) - (1 if flow_ids[-1] == node_id else 0)] or [flow_ids[0]])
            if parent == node_id:
                parent = flow_ids[0]
            edges.append({"parent": parent, "child": node_id, "order": len(edges) * 2})
    wirings = []
    for sink in pose_sinks:
        if pose_sources and rng.random() < 0.8:
            wirings.append(
                {
                    "source": {"node": rng.choice(pose_sources), "name": "value"},
                    "target": {"node": sink, "name": "target"},
                }
            )
    return {"version": 1, "nodes": nodes, "edges": edges, "wirings": wirings}


def bfs_reachable(env: TreeEnvironment, root: str) -> set[str]:
    """Independent reachability oracle over the child relation."""
    seen = {root}
    frontier = [root]
    while frontier:
        node = frontier.pop(0)
        for child in env.graph.children(node):
            if child not in seen:
                seen.add(child)
                frontier.append(child)
    return seen
