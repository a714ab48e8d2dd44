"""Tick engine and flow-control semantics."""

from __future__ import annotations

import random
import time

import pytest

from shovebt.engine import EngineConfig, TickEngine, update
from shovebt.errors import RootNotReadyError, TreeStructureError
from shovebt.flow import Fallback, Inverter, Parallel, Sequence
from shovebt.node import Node
from shovebt.states import NodeAction, NodeState

from helpers import (
    ScriptedLeaf,
    TaskLeaf,
    build_env,
    ref_fallback,
    ref_parallel,
    ref_sequence,
    scripted_tree,
    setup_and_engine,
)

S = NodeState


def leaf_states(env, n):
    return [env.world.node_states[f"leaf{i}"] for i in range(n)]


# -- sequence ------------------------------------------------------------------


def test_sequence_all_succeed():
    env = scripted_tree("Sequence", [["succeeded"], ["succeeded"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED


def test_sequence_stops_at_first_failure():
    env = scripted_tree("Sequence", [["succeeded"], ["failed"], ["succeeded"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.FAILED
    # third child was never ticked
    assert env.world.node_states["leaf2"] == S.IDLE


def test_sequence_stops_at_first_running():
    env = scripted_tree("Sequence", [["running"], ["succeeded"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.RUNNING
    assert env.world.node_states["leaf1"] == S.IDLE
    assert "leaf1" not in engine.last_visited


def test_sequence_without_children_errors():
    env = build_env(Sequence("root"))
    engine = setup_and_engine(env)
    engine.tick_cycle()
    assert env.world.node_states["root"] == S.ERROR


# -- fallback ------------------------------------------------------------------


def test_fallback_first_success_short_circuits():
    env = scripted_tree("Fallback", [["succeeded"], ["succeeded"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED
    assert env.world.node_states["leaf1"] == S.IDLE


def test_fallback_all_fail():
    env = scripted_tree("Fallback", [["failed"], ["failed"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.FAILED


def test_fallback_running_child():
    env = scripted_tree("Fallback", [["failed"], ["running"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.RUNNING


def test_fallback_abandons_previously_running_child():
    """Once an earlier child succeeds, the later running child is unticked."""
    env = scripted_tree("Fallback", [["failed", "succeeded"], ["running", "running"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.RUNNING
    assert env.world.node_states["leaf1"] == S.RUNNING
    assert engine.tick_cycle() == S.SUCCEEDED
    assert env.world.node_states["leaf1"] in (S.PAUSED, S.IDLE)


# -- parallel ------------------------------------------------------------------


def test_parallel_one_of_two_succeeds():
    env = scripted_tree("Parallel", [["succeeded"], ["running"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED
    # the still-running child is stopped when the parallel resolves
    assert env.world.node_states["leaf1"] in (S.PAUSED, S.IDLE)


def test_parallel_two_of_two_fails_on_single_failure():
    env = scripted_tree(
        "Parallel", [["succeeded"], ["failed"]], success_threshold=2
    )
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.FAILED


def test_parallel_all_fail():
    env = scripted_tree("Parallel", [["failed"], ["failed"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.FAILED


def test_parallel_does_not_retick_resolved_children():
    env = scripted_tree("Parallel", [["succeeded", "failed"], ["running", "succeeded"]])
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED  # child 0 resolves immediately
    env2 = scripted_tree(
        "Parallel", [["succeeded", "failed"], ["running", "running", "succeeded"]],
        success_threshold=2,
    )
    engine2 = setup_and_engine(env2)
    assert engine2.tick_cycle() == S.RUNNING
    assert engine2.tick_cycle() == S.RUNNING
    assert engine2.tick_cycle() == S.SUCCEEDED
    # leaf0 was ticked once: its second script entry (failed) never used
    assert env2.nodes["leaf0"]._pos == 1


def test_parallel_invalid_threshold_fails_setup():
    env = scripted_tree("Parallel", [["succeeded"]], success_threshold=3)
    engine = TickEngine(env)
    engine.setup()
    assert env.world.node_states["root"] == S.ERROR


def test_flow_results_match_reference_interpreter():
    rng = random.Random(99)
    for _ in range(300):
        n = rng.randint(1, 5)
        states = [rng.choice(["succeeded", "failed", "running"]) for _ in range(n)]
        for kind in ("Sequence", "Fallback"):
            env = scripted_tree(kind, [[s] for s in states])
            engine = setup_and_engine(env)
            got = engine.tick_cycle()
            ref = ref_sequence(states) if kind == "Sequence" else ref_fallback(states)
            assert got.value == ref[0], (kind, states)
            ticked = [i for i in range(n) if f"leaf{i}" in engine.last_visited]
            assert ticked == list(range(ref[1])), (kind, states)
        k = rng.randint(1, n)
        env = scripted_tree("Parallel", [[s] for s in states], success_threshold=k)
        engine = setup_and_engine(env)
        assert engine.tick_cycle().value == ref_parallel(states, k), (states, k)


# -- tick cycle ---------------------------------------------------------------


def test_single_leaf_tree_state():
    env = build_env(ScriptedLeaf("root", {"script": ["succeeded"]}))
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED
    assert env.tree_state() == S.SUCCEEDED


def test_tick_cycle_requires_ready_root():
    env = build_env(ScriptedLeaf("root", {"script": ["succeeded"]}))
    engine = TickEngine(env)
    with pytest.raises(RootNotReadyError):
        engine.tick_cycle()


def test_detect_and_pickup_scenario():
    """Fallback picks the first detector; consumer keeps running."""
    root = Sequence("root")
    env = build_env(root)
    env.add_child("root", Fallback("detectors"))
    env.add_child("detectors", ScriptedLeaf("detect_red", {"script": ["succeeded"]}))
    env.add_child("detectors", ScriptedLeaf("detect_green", {"script": ["succeeded"]}))
    env.add_child("root", ScriptedLeaf("pickup", {"script": ["running"] * 5}))
    engine = setup_and_engine(env)
    for _ in range(3):
        assert engine.tick_cycle() == S.RUNNING
    assert env.world.node_states["detect_red"] == S.SUCCEEDED
    assert env.world.node_states["detect_green"] == S.IDLE
    assert env.world.node_states["pickup"] == S.RUNNING


def test_visitation_is_connected_and_bypassed_nodes_stop():
    rng = random.Random(4242)
    for _ in range(40):
        n = rng.randint(2, 6)
        scripts = [
            [rng.choice(["succeeded", "failed", "running"]) for _ in range(4)]
            for _ in range(n)
        ]
        kind = rng.choice(["Sequence", "Fallback", "Parallel"])
        env = scripted_tree(kind, scripts)
        engine = setup_and_engine(env)
        for _ in range(4):
            engine.tick_cycle()
            visited = engine.last_visited
            assert "root" in visited
            for node_id in visited:
                parent = env.graph.parent(node_id)
                assert parent is None or parent in visited
            for node_id in env.graph.node_ids - visited:
                assert env.world.node_states[node_id] != S.RUNNING


def test_order_determinism():
    def build():
        env = scripted_tree(
            "Sequence",
            [["running", "succeeded"], ["running", "running", "failed"], ["succeeded"]],
        )
        return setup_and_engine(env)

    a, b = build(), build()
    for _ in range(6):
        a.tick_cycle()
        b.tick_cycle()
        assert a.env.snapshot() == b.env.snapshot()


def test_tree_edits_preserve_single_root_and_acyclicity():
    rng = random.Random(11)
    env = build_env(Sequence("n0"))
    ids = ["n0"]
    for i in range(1, 60):
        parent = rng.choice(ids)
        node_id = f"n{i}"
        try:
            env.add_child(parent, Sequence(node_id))
            ids.append(node_id)
        except TreeStructureError:
            continue
        finally:
            assert len(env.graph.roots()) == 1
            assert env.graph.subtree_ids(env.graph.root()) == env.graph.node_ids
    # rejected edits: duplicate parent, self edge, cycle
    with pytest.raises(TreeStructureError):
        env.graph.add_edge("n0", "n1")  # n1 already has a parent
    with pytest.raises(TreeStructureError):
        env.graph.add_edge("n0", "n0")
    child = env.graph.children("n0")[0]
    with pytest.raises(TreeStructureError):
        env.graph.add_edge(child, "n0")


def test_duplicate_order_index_rejected():
    env = build_env(Sequence("root"))
    env.add_child("root", ScriptedLeaf("a", {"script": ["succeeded"]}), order=3)
    with pytest.raises(TreeStructureError):
        env.add_child("root", ScriptedLeaf("b", {"script": ["succeeded"]}), order=3)


def test_decorator_limits_children():
    env = build_env(Inverter("inv"))
    env.add_child("inv", ScriptedLeaf("a", {"script": ["succeeded"]}))
    with pytest.raises(TreeStructureError):
        env.add_child("inv", ScriptedLeaf("b", {"script": ["succeeded"]}))


# -- degradation ---------------------------------------------------------------


class BrokenLeaf(Node):
    KIND = "BrokenLeaf"
    MAX_CHILDREN = 0

    def on_tick(self, ctx):
        raise RuntimeError("sensor exploded")


def test_node_exception_degrades_to_error_and_parent_fails():
    env = build_env(Sequence("root"))
    env.add_child("root", BrokenLeaf("bad"))
    env.add_child("root", ScriptedLeaf("good", {"script": ["succeeded"]}))
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.FAILED
    assert env.world.node_states["bad"] == S.ERROR
    assert any(r.node_id == "bad" for r in env.reports)
    # the engine keeps running on later cycles
    assert engine.tick_cycle() == S.FAILED


class SlowLeaf(Node):
    KIND = "SlowLeaf"
    MAX_CHILDREN = 0

    def on_tick(self, ctx):
        time.sleep(0.02)
        return S.SUCCEEDED


def test_tick_budget_overrun_is_a_node_error():
    env = build_env(SlowLeaf("slow"))
    engine = TickEngine(env, EngineConfig(tick_budget=0.001))
    engine.setup()
    engine.tick_cycle()
    assert env.world.node_states["slow"] == S.ERROR
    assert "budget" in env.reports[-1].reason


def test_budget_charges_own_work_not_child_time(monkeypatch):
    """A composite over slow children stays within budget; only the
    leaf doing the work is accountable for it. Uses a fake clock so the
    accounting is checked exactly, without wall-clock noise."""
    import shovebt.engine as engine_mod

    clock = {"now": 0.0}
    monkeypatch.setattr(engine_mod.time, "perf_counter", lambda: clock["now"])

    class FakeSlowLeaf(Node):
        KIND = "FakeSlowLeaf"
        MAX_CHILDREN = 0

        def on_tick(self, ctx):
            clock["now"] += 0.02  # 20ms of leaf work per tick
            return S.SUCCEEDED

    env = build_env(Sequence("root"))
    for i in range(4):
        env.add_child("root", FakeSlowLeaf(f"slow{i}"))
    engine = TickEngine(env, EngineConfig(tick_budget=0.030))
    engine.setup()
    engine.tick_cycle()  # 80ms of child work; the root itself did none
    assert env.world.node_states["root"] == S.SUCCEEDED
    assert not env.reports
    # a leaf over budget is still caught
    engine2 = TickEngine(build_env(FakeSlowLeaf("leaf")), EngineConfig(tick_budget=0.010))
    engine2.setup()
    engine2.tick_cycle()
    assert engine2.env.world.node_states["leaf"] == S.ERROR


def test_inverter_swaps_results():
    env = build_env(Inverter("inv"))
    env.add_child("inv", ScriptedLeaf("leaf", {"script": ["failed", "succeeded", "running"]}))
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.SUCCEEDED
    assert engine.tick_cycle() == S.FAILED
    assert engine.tick_cycle() == S.RUNNING


# -- background tasks ------------------------------------------------------------


def test_untick_pausable_task_pauses_and_resumes():
    env = build_env(TaskLeaf("t", {"pausable": True}))
    engine = setup_and_engine(env)
    assert engine.tick_cycle() == S.RUNNING
    task = env.nodes["t"].task
    assert task is not None and task.live
    update("t", NodeAction.UNTICK, env)
    assert env.world.node_states["t"] == S.PAUSED
    assert env.nodes["t"].task is task and task.paused
    assert engine.tick_cycle() == S.RUNNING
    assert not task.paused
    task.complete(True)
    assert engine.tick_cycle() == S.SUCCEEDED
    assert env.nodes["t"].task is None


def test_untick_nonpausable_task_cancels_to_idle():
    env = build_env(TaskLeaf("t", {"pausable": False}))
    engine = setup_and_engine(env)
    engine.tick_cycle()
    task = env.nodes["t"].task
    update("t", NodeAction.UNTICK, env)
    assert env.world.node_states["t"] == S.IDLE
    assert env.nodes["t"].task is None
    assert task.status.value == "cancelled"
    # restarts from scratch on the next tick
    assert engine.tick_cycle() == S.RUNNING
    assert env.nodes["t"].task is not task


def test_background_task_start_requires_running():
    from shovebt.errors import LifecycleError

    env = build_env(TaskLeaf("t"))
    with pytest.raises(LifecycleError):
        env.nodes["t"].start_background(env)


def test_random_operation_stress_keeps_invariants():
    """Arbitrary engine-level operation sequences never corrupt state:
    every node state stays valid, rest states hold no tasks, and the
    engine keeps driving cycles whenever the root is ready."""
    from shovebt.states import REST_STATES

    rng = random.Random(987)
    for round_no in range(25):
        n = rng.randint(1, 4)
        scripts = [
            [rng.choice(["succeeded", "failed", "running"]) for _ in range(3)]
            for _ in range(n)
        ]
        kind = rng.choice(["Sequence", "Fallback", "Parallel"])
        env = scripted_tree(kind, scripts)
        env.add_child("root", TaskLeaf("task", {"pausable": bool(round_no % 2)}))
        engine = TickEngine(env)
        engine.setup()
        for _ in range(40):
            op = rng.choice(["cycle", "cycle", "cycle", "untick", "reset", "power"])
            root_state = env.tree_state()
            if op == "cycle":
                if root_state not in (S.UNINITIALIZED, S.ERROR, S.SHUTDOWN):
                    engine.tick_cycle()
            elif op == "untick":
                engine.untick_all()
            elif op == "reset":
                engine.reset()
            else:
                engine.shutdown()
                engine.setup()
            for node_id, state in env.world.node_states.items():
                assert isinstance(state, S)
                node = env.nodes[node_id]
                if state in REST_STATES or state == S.ERROR:
                    assert node.task is None, (round_no, op, node_id, state)
                if state == S.PAUSED and node.task is not None:
                    assert node.task.paused
