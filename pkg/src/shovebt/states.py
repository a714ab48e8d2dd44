"""Node lifecycle states, actions, and the legal transition relation.

The transition table is the single source of truth for which
(state, action, state) triples a node may take. Applying an action
outside the table sends the node to ``ERROR``, which is absorbing
until ``reset`` or ``shutdown``.
"""

from __future__ import annotations

from enum import Enum


class NodeState(str, Enum):
    UNINITIALIZED = "uninitialized"
    IDLE = "idle"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    PAUSED = "paused"
    SHUTDOWN = "shutdown"
    ERROR = "error"


class NodeAction(str, Enum):
    SETUP = "setup"
    TICK = "tick"
    UNTICK = "untick"
    RESET = "reset"
    SHUTDOWN = "shutdown"


#: States a node may be in after a tick handler returns.
TICK_RESULTS = frozenset({NodeState.RUNNING, NodeState.SUCCEEDED, NodeState.FAILED})

#: States in which a node must hold no live background task.
REST_STATES = frozenset(
    {NodeState.IDLE, NodeState.SUCCEEDED, NodeState.FAILED, NodeState.SHUTDOWN}
)

_ACTIVE = (NodeState.RUNNING, NodeState.SUCCEEDED, NodeState.FAILED)

_TRANSITIONS: dict[tuple[NodeState, NodeAction], frozenset[NodeState]] = {
    (NodeState.UNINITIALIZED, NodeAction.SETUP): frozenset({NodeState.IDLE}),
    (NodeState.UNINITIALIZED, NodeAction.SHUTDOWN): frozenset({NodeState.SHUTDOWN}),
    (NodeState.IDLE, NodeAction.TICK): TICK_RESULTS,
    (NodeState.IDLE, NodeAction.UNTICK): frozenset({NodeState.IDLE}),
    (NodeState.IDLE, NodeAction.RESET): frozenset({NodeState.IDLE}),
    (NodeState.IDLE, NodeAction.SHUTDOWN): frozenset({NodeState.SHUTDOWN}),
    (NodeState.PAUSED, NodeAction.TICK): TICK_RESULTS,
    (NodeState.PAUSED, NodeAction.UNTICK): frozenset({NodeState.PAUSED}),
    (NodeState.PAUSED, NodeAction.RESET): frozenset({NodeState.IDLE}),
    (NodeState.PAUSED, NodeAction.SHUTDOWN): frozenset({NodeState.SHUTDOWN}),
    (NodeState.SHUTDOWN, NodeAction.SETUP): frozenset({NodeState.IDLE}),
    (NodeState.SHUTDOWN, NodeAction.SHUTDOWN): frozenset({NodeState.SHUTDOWN}),
    (NodeState.ERROR, NodeAction.RESET): frozenset({NodeState.IDLE}),
    (NodeState.ERROR, NodeAction.SHUTDOWN): frozenset({NodeState.SHUTDOWN}),
}
for _s in _ACTIVE:
    _TRANSITIONS[(_s, NodeAction.TICK)] = TICK_RESULTS
    _TRANSITIONS[(_s, NodeAction.UNTICK)] = frozenset({NodeState.PAUSED, NodeState.IDLE})
    _TRANSITIONS[(_s, NodeAction.RESET)] = frozenset({NodeState.IDLE})
    _TRANSITIONS[(_s, NodeAction.SHUTDOWN)] = frozenset({NodeState.SHUTDOWN})


def allowed_targets(state: NodeState, action: NodeAction) -> frozenset[NodeState]:
    """Legal successor states for ``action`` in ``state``.

    An empty set means the pair is illegal and the node will be sent
    to ``ERROR``.
    """
    return _TRANSITIONS.get((state, action), frozenset())


def is_legal(state: NodeState, action: NodeAction, target: NodeState) -> bool:
    return target in allowed_targets(state, action)
