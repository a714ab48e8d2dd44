"""Mission node library: movement, door and pickup services, door sensing.

Service leaves report infeasible utility whenever their service is
missing from the executing robot's service set, which is what makes a
heterogeneous team split work across executors.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .node import Node
from .states import NodeState
from .utility import INFEASIBLE_BOUNDS, UNKNOWN_BOUNDS, UtilityBounds

if TYPE_CHECKING:
    from .engine import TickContext
    from .sim import SimHandle
    from .tree import TreeEnvironment


def sim_handle(env: "TreeEnvironment") -> "SimHandle":
    handle = env.world.externals.get("sim")
    if handle is None:
        raise RuntimeError("no simulator attached to this executor")
    return handle


class MoveTo(Node):
    """Drives the robot one path cell per cycle until it stands on the
    target cell."""

    KIND = "MoveTo"
    MAX_CHILDREN = 0
    INPUTS = {"target": "pose2d"}

    def on_tick(self, ctx: "TickContext") -> NodeState:
        handle = sim_handle(ctx.env)
        target = tuple(self.input(ctx.env, "target"))
        if handle.pose == target:
            return NodeState.SUCCEEDED
        handle.request_move(target)
        return NodeState.RUNNING

    def utility(self, env: "TreeEnvironment") -> UtilityBounds:
        if env.world.externals.get("sim") is None:
            return UNKNOWN_BOUNDS
        return UtilityBounds.of(1, 20, 1, 20)


class _ServiceLeaf(Node):
    MAX_CHILDREN = 0
    SERVICE = ""

    def utility(self, env: "TreeEnvironment") -> UtilityBounds:
        handle = env.world.externals.get("sim")
        if handle is None:
            return UNKNOWN_BOUNDS
        if self.SERVICE not in handle.services:
            return INFEASIBLE_BOUNDS
        return UtilityBounds.of(2, 10, 2, 10)


class OpenDoorService(_ServiceLeaf):
    """Calls the door service; succeeds when the robot was close enough."""

    KIND = "OpenDoorService"
    OPTIONS = {"door": "string"}
    SERVICE = "open_door"
    OUTPUTS = {"opened": "bool"}

    def on_tick(self, ctx: "TickContext") -> NodeState:
        reply = sim_handle(ctx.env).open_door(self.option("door"))
        self.set_output(ctx.env, "opened", reply.success)
        return NodeState.SUCCEEDED if reply.success else NodeState.FAILED


class PickupObjectService(_ServiceLeaf):
    """Calls the pick-up service on the configured object."""

    KIND = "PickupObjectService"
    OPTIONS = {"object": "string"}
    SERVICE = "pickup_object"

    def on_tick(self, ctx: "TickContext") -> NodeState:
        reply = sim_handle(ctx.env).pickup_object(self.option("object"))
        return NodeState.SUCCEEDED if reply.success else NodeState.FAILED


class DoorIsOpen(Node):
    """Condition leaf: succeeds while the door is open."""

    KIND = "DoorIsOpen"
    MAX_CHILDREN = 0
    OPTIONS = {"door": "string"}

    def on_tick(self, ctx: "TickContext") -> NodeState:
        open_ = sim_handle(ctx.env).door_open(self.option("door"))
        return NodeState.SUCCEEDED if open_ else NodeState.FAILED

    def utility(self, env: "TreeEnvironment") -> UtilityBounds:
        return UtilityBounds.of(0, 1, 0, 1)
