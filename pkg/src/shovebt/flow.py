"""Standard flow-control and helper nodes: sequence, fallback, parallel,
decorator base, inverter, and the constant-value leaf.

Sequence and fallback are reactive: they re-evaluate from their first
child on every cycle, so a later child that was running is abandoned
(and unticked by the engine) as soon as an earlier child changes the
decision.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from . import utility
from .dataflow import Ref
from .errors import LifecycleError
from .node import Node
from .states import NodeState, NodeAction, allowed_targets

if TYPE_CHECKING:
    from .engine import TickContext
    from .tree import TreeEnvironment


class Composite(Node):
    """Shared child handling for flow controls and decorators."""

    def child_ids(self, ctx: "TickContext") -> list[str]:
        ids = ctx.children(self.id)
        if not ids:
            raise LifecycleError(f"{self.id}: {self.KIND} requires at least one child")
        return ids

    def on_untick(self, ctx: "TickContext") -> NodeState | None:
        for child in ctx.children(self.id):
            if ctx.env.world.node_states[child] in (NodeState.RUNNING, NodeState.PAUSED):
                ctx.untick(child)
        return None

    def on_reset(self, ctx: "TickContext") -> None:
        for child in ctx.children(self.id):
            if allowed_targets(ctx.env.world.node_states[child], NodeAction.RESET):
                ctx.reset(child)

    def on_shutdown(self, ctx: "TickContext") -> None:
        for child in ctx.children(self.id):
            ctx.shutdown(child)

    def child_bounds(self, env: "TreeEnvironment") -> list[utility.UtilityBounds]:
        return [env.nodes[c].utility(env) for c in env.graph.children(self.id)]


class Sequence(Composite):
    """Ticks children in order; fails on the first failure, succeeds when
    all succeed, stops at the first running child."""

    KIND = "Sequence"
    MAX_CHILDREN = None

    def on_tick(self, ctx: "TickContext") -> NodeState:
        for child in self.child_ids(ctx):
            state = ctx.tick(child)
            if state in (NodeState.FAILED, NodeState.ERROR):
                return NodeState.FAILED
            if state == NodeState.RUNNING:
                return NodeState.RUNNING
        return NodeState.SUCCEEDED

    def utility(self, env: "TreeEnvironment") -> utility.UtilityBounds:
        bounds = self.child_bounds(env)
        return utility.aggregate_sequence(bounds) if bounds else utility.INFEASIBLE_BOUNDS


class Fallback(Composite):
    """Dual of the sequence: succeeds on the first success, fails only
    when every child fails."""

    KIND = "Fallback"
    MAX_CHILDREN = None

    def on_tick(self, ctx: "TickContext") -> NodeState:
        for child in self.child_ids(ctx):
            state = ctx.tick(child)
            if state == NodeState.SUCCEEDED:
                return NodeState.SUCCEEDED
            if state == NodeState.RUNNING:
                return NodeState.RUNNING
        return NodeState.FAILED

    def utility(self, env: "TreeEnvironment") -> utility.UtilityBounds:
        bounds = self.child_bounds(env)
        return utility.aggregate_fallback(bounds) if bounds else utility.INFEASIBLE_BOUNDS


class Parallel(Composite):
    """Ticks all children every cycle; succeeds once ``success_threshold``
    children have succeeded, fails once that threshold is unreachable.
    Children that resolved keep their result for the rest of the
    activation and are not re-ticked."""

    KIND = "Parallel"
    MAX_CHILDREN = None
    OPTIONS = {"success_threshold": "int"}
    OPTION_DEFAULTS = {"success_threshold": 1}

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._resolved: dict[str, NodeState] = {}

    def on_setup(self, ctx: "TickContext") -> None:
        k = self.option("success_threshold")
        n = len(ctx.children(self.id))
        if not 1 <= k <= max(n, 1):
            raise LifecycleError(
                f"{self.id}: success_threshold {k} outside [1, {n}]"
            )
        self._resolved.clear()

    def on_tick(self, ctx: "TickContext") -> NodeState:
        children = self.child_ids(ctx)
        k = self.option("success_threshold")
        for child in children:
            if child in self._resolved:
                continue
            state = ctx.tick(child)
            if state == NodeState.SUCCEEDED:
                self._resolved[child] = NodeState.SUCCEEDED
            elif state in (NodeState.FAILED, NodeState.ERROR):
                self._resolved[child] = NodeState.FAILED
        succeeded = sum(1 for s in self._resolved.values() if s == NodeState.SUCCEEDED)
        failed = len(self._resolved) - succeeded
        if succeeded >= k:
            outcome = NodeState.SUCCEEDED
        elif failed > len(children) - k:
            outcome = NodeState.FAILED
        else:
            return NodeState.RUNNING
        for child in children:
            if child not in self._resolved and ctx.env.world.node_states[child] in (
                NodeState.RUNNING,
                NodeState.PAUSED,
            ):
                ctx.untick(child)
        self._resolved.clear()
        return outcome

    def on_untick(self, ctx: "TickContext") -> NodeState | None:
        self._resolved.clear()
        return super().on_untick(ctx)

    def on_reset(self, ctx: "TickContext") -> None:
        self._resolved.clear()
        super().on_reset(ctx)

    def utility(self, env: "TreeEnvironment") -> utility.UtilityBounds:
        bounds = self.child_bounds(env)
        if not bounds:
            return utility.INFEASIBLE_BOUNDS
        return utility.aggregate_parallel(bounds, self.option("success_threshold"))


class Decorator(Composite):
    """Single-child base; the default behavior mirrors the child."""

    MAX_CHILDREN = 1

    def child_id(self, ctx: "TickContext") -> str:
        return self.child_ids(ctx)[0]

    def on_tick(self, ctx: "TickContext") -> NodeState:
        state = ctx.tick(self.child_id(ctx))
        return NodeState.FAILED if state == NodeState.ERROR else state

    def utility(self, env: "TreeEnvironment") -> utility.UtilityBounds:
        bounds = self.child_bounds(env)
        return bounds[0] if bounds else utility.INFEASIBLE_BOUNDS


class Inverter(Decorator):
    """Swaps the child's succeeded and failed results."""

    KIND = "Inverter"

    def on_tick(self, ctx: "TickContext") -> NodeState:
        state = super().on_tick(ctx)
        if state == NodeState.SUCCEEDED:
            return NodeState.FAILED
        if state == NodeState.FAILED:
            return NodeState.SUCCEEDED
        return state


class ConstantValue(Node):
    """Leaf that publishes a fixed, option-typed value on its output."""

    KIND = "ConstantValue"
    MAX_CHILDREN = 0
    OPTIONS = {"value_type": "type", "value": Ref("value_type")}
    OUTPUTS = {"value": Ref("value_type")}

    def on_setup(self, ctx: "TickContext") -> None:
        self.set_output(ctx.env, "value", self.option("value"))

    def on_tick(self, ctx: "TickContext") -> NodeState:
        return NodeState.SUCCEEDED

    def utility(self, env: "TreeEnvironment") -> utility.UtilityBounds:
        return utility.UtilityBounds.of(0.0, 0.0, 0.0, 0.0)
