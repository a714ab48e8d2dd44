"""The update function and the tick-cycle engine.

``update`` is the only mutator of node states: it gates every action
through the transition table, dispatches to the node's hooks, and
enforces the background-task rules. Illegal pairs or misbehaving hooks
send the node to ``error`` and append a report instead of aborting the
engine; the parent simply sees a failed child on its next tick.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import RootNotReadyError, UnknownNodeError
from .states import NodeAction, NodeState, TICK_RESULTS, allowed_targets
from .tree import TreeEnvironment
from .utility import DEFAULT_UNKNOWN_COST

log = logging.getLogger(__name__)


@dataclass
class EngineConfig:
    tick_budget: float = 0.010  # seconds per tick callback
    hz: float = 10.0
    max_cycles: int = 10_000
    unknown_cost: float = DEFAULT_UNKNOWN_COST
    query_timeout_cycles: int = 5
    ack_timeout_cycles: int = 5


@dataclass(frozen=True)
class TransitionReport:
    node_id: str
    old: NodeState
    action: NodeAction
    new: NodeState
    reason: str


@dataclass
class TickContext:
    """Per-cycle bookkeeping handed to every hook."""

    env: TreeEnvironment
    config: EngineConfig = field(default_factory=EngineConfig)
    visited: set[str] = field(default_factory=set)
    # per-frame time spent in nested updates, so the tick budget charges
    # each node only for its own work, not its children's
    _child_time: list[float] = field(default_factory=list)

    def tick(self, child_id: str) -> NodeState:
        update(child_id, NodeAction.TICK, self.env, self)
        return self.env.world.node_states[child_id]

    def untick(self, child_id: str) -> NodeState:
        update(child_id, NodeAction.UNTICK, self.env, self)
        return self.env.world.node_states[child_id]

    def reset(self, child_id: str) -> NodeState:
        update(child_id, NodeAction.RESET, self.env, self)
        return self.env.world.node_states[child_id]

    def shutdown(self, child_id: str) -> NodeState:
        update(child_id, NodeAction.SHUTDOWN, self.env, self)
        return self.env.world.node_states[child_id]

    def children(self, node_id: str) -> list[str]:
        return self.env.graph.children(node_id)


def _report(env: TreeEnvironment, node_id: str, old: NodeState, action: NodeAction,
            new: NodeState, reason: str) -> None:
    env.reports.append(TransitionReport(node_id, old, action, new, reason))
    log.warning("node %s: %s", node_id, reason)


def _enforce_task_rules(node, new: NodeState) -> None:
    task = node.task
    if task is None:
        return
    if new == NodeState.RUNNING:
        if task.live and task.paused:
            task.resume()
    elif new == NodeState.PAUSED:
        if task.live and not task.paused:
            if task.pausable:
                task.pause()
            else:
                node.stop_background("cancel")
    else:
        # rest states and error/shutdown must hold no task at all
        node.stop_background("cancel")


def update(
    node_id: str,
    action: NodeAction,
    env: TreeEnvironment,
    ctx: Optional[TickContext] = None,
    config: Optional[EngineConfig] = None,
) -> TreeEnvironment:
    """Apply one action to one node, returning the updated environment."""
    started = time.perf_counter()
    try:
        return _update(node_id, action, env, ctx, config)
    finally:
        if ctx is not None and ctx._child_time:
            ctx._child_time[-1] += time.perf_counter() - started


def _update(
    node_id: str,
    action: NodeAction,
    env: TreeEnvironment,
    ctx: Optional[TickContext],
    config: Optional[EngineConfig],
) -> TreeEnvironment:
    node = env.nodes.get(node_id)
    if node is None:
        raise UnknownNodeError(f"unknown node {node_id!r}")
    if ctx is None:
        ctx = TickContext(env, config or EngineConfig())
    old = env.world.node_states[node_id]
    if action == NodeAction.TICK:
        ctx.visited.add(node_id)

    allowed = allowed_targets(old, action)
    if not allowed:
        if old != NodeState.ERROR:
            env.world.node_states[node_id] = NodeState.ERROR
            _enforce_task_rules(node, NodeState.ERROR)
            _report(env, node_id, old, action, NodeState.ERROR,
                    f"illegal action {action.value} in state {old.value}")
        return env

    new = old
    reason = ""
    if action == NodeAction.SETUP:
        try:
            node.on_setup(ctx)
            new = NodeState.IDLE
        except Exception as exc:  # noqa: BLE001 - node bugs must not kill the engine
            new, reason = NodeState.ERROR, f"setup failed: {exc}"
    elif action == NodeAction.TICK:
        new, reason = _do_tick(node, old, ctx)
    elif action == NodeAction.UNTICK:
        if old in (NodeState.IDLE, NodeState.PAUSED):
            new = old  # self loop
        else:
            task = node.task
            default = (
                NodeState.PAUSED
                if task is not None and task.live and task.pausable
                else NodeState.IDLE
            )
            try:
                override = node.on_untick(ctx)
            except Exception as exc:  # noqa: BLE001
                override, reason = None, f"untick hook failed: {exc}"
                new = NodeState.ERROR
            if not reason:
                new = override if override in (NodeState.PAUSED, NodeState.IDLE) else default
    elif action == NodeAction.RESET:
        try:
            node.on_reset(ctx)
            new = NodeState.IDLE
        except Exception as exc:  # noqa: BLE001
            new, reason = NodeState.ERROR, f"reset failed: {exc}"
    elif action == NodeAction.SHUTDOWN:
        try:
            node.on_shutdown(ctx)
            new = NodeState.SHUTDOWN
        except Exception as exc:  # noqa: BLE001
            new, reason = NodeState.ERROR, f"shutdown failed: {exc}"

    env.world.node_states[node_id] = new
    _enforce_task_rules(node, new)
    if reason:
        _report(env, node_id, old, action, new, reason)
    return env


def _do_tick(node, old: NodeState, ctx: TickContext) -> tuple[NodeState, str]:
    env = ctx.env
    task = node.task
    if old == NodeState.PAUSED and task is not None and task.live:
        task.resume()
    missing = node.missing_required_inputs(env)
    if missing:
        return NodeState.FAILED, ""
    node._in_tick = True
    ctx._child_time.append(0.0)
    started = time.perf_counter()
    try:
        result = node.on_tick(ctx)
    except Exception as exc:  # noqa: BLE001
        return NodeState.ERROR, f"tick failed: {exc}"
    finally:
        node._in_tick = False
        nested = ctx._child_time.pop()
    elapsed = time.perf_counter() - started - nested
    if elapsed > ctx.config.tick_budget:
        return (
            NodeState.ERROR,
            f"tick budget exceeded: {elapsed * 1000:.1f} ms"
            f" > {ctx.config.tick_budget * 1000:.1f} ms",
        )
    if result in TICK_RESULTS:
        return result, ""
    if result == NodeState.IDLE:
        # Self-deactivation (used by slots with nothing to host): applied
        # with untick semantics, so the step stays a legal edge.
        if NodeState.IDLE in allowed_targets(old, NodeAction.UNTICK):
            return NodeState.IDLE, ""
        return NodeState.ERROR, f"cannot self-deactivate from {old.value}"
    return NodeState.ERROR, f"tick returned {result!r}"


class TickEngine:
    """Drives whole-tree cycles over one environment."""

    def __init__(self, env: TreeEnvironment, config: EngineConfig | None = None):
        self.env = env
        self.config = config or EngineConfig()
        self.last_visited: set[str] = set()

    def setup(self) -> None:
        for node_id in self.env.graph.dfs_preorder():
            update(node_id, NodeAction.SETUP, self.env, config=self.config)

    def tick_cycle(self) -> NodeState:
        """One cycle: tick the root, untick every bypassed active node."""
        env = self.env
        root = env.root_id()
        root_state = env.world.state(root)
        if root_state in (NodeState.UNINITIALIZED, NodeState.ERROR):
            raise RootNotReadyError(f"root {root!r} is {root_state.value}")
        ctx = TickContext(env, self.config)
        update(root, NodeAction.TICK, env, ctx)
        for node_id in env.graph.dfs_preorder():
            if node_id in ctx.visited:
                continue
            if env.world.node_states[node_id] in (NodeState.RUNNING, NodeState.PAUSED):
                update(node_id, NodeAction.UNTICK, env, ctx)
        self.last_visited = ctx.visited
        env.cycle += 1
        return env.tree_state()

    def tick_until_result(self, max_cycles: int | None = None) -> NodeState:
        limit = max_cycles if max_cycles is not None else self.config.max_cycles
        state = self.env.tree_state()
        for _ in range(limit):
            state = self.tick_cycle()
            if state != NodeState.RUNNING:
                return state
        return state

    def reset(self) -> None:
        for node_id in self.env.graph.dfs_preorder():
            if allowed_targets(self.env.world.node_states[node_id], NodeAction.RESET):
                update(node_id, NodeAction.RESET, self.env, config=self.config)

    def untick_all(self) -> None:
        for node_id in self.env.graph.dfs_preorder():
            if self.env.world.node_states[node_id] in (NodeState.RUNNING, NodeState.PAUSED):
                update(node_id, NodeAction.UNTICK, self.env, config=self.config)

    def shutdown(self) -> None:
        for node_id in self.env.graph.dfs_preorder():
            update(node_id, NodeAction.SHUTDOWN, self.env, config=self.config)
