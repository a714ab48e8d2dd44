"""Remote subtree execution: the Shovable decorator and the RemoteSlot.

A Shovable, on the first tick of an activation, extracts its child
subtree, queries its own environment and every known neighbor slot for
utility bounds, and either runs the child in place or ships the subtree
to the cheapest executor. A RemoteSlot hosts at most one received
subtree at a time, drives it as part of its own tree, and returns the
final state plus public output values to the sender.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Optional

from . import protocol, utility
from .dataflow import ParamKey, ParamKind, public_inputs, public_outputs
from .errors import BtError, ValidationError
from .flow import Decorator
from .node import Node
from .states import NodeState
from .tree import TreeEnvironment, extract_subtree
from .treefile import build_env, env_to_doc

if TYPE_CHECKING:
    from .engine import TickContext
    from .executor import Comms

log = logging.getLogger(__name__)


# -- envelope -------------------------------------------------------------------


def build_envelope(child_id: str, env: TreeEnvironment, correlation_id: str) -> dict[str, Any]:
    """Serialize the subtree rooted at ``child_id`` plus its public I/O."""
    sub = extract_subtree(child_id, env)
    inputs = public_inputs(sub.graph.node_ids, env.data)
    outputs = public_outputs(sub.graph.node_ids, env.data)
    resolved = (_resolved_type(sub, key) for key in sub.data.params)
    type_names = sorted({vt.name for vt in resolved if vt is not None})
    return {
        "subtree": env_to_doc(sub),
        "publicInputs": [
            {"node": k.node, "name": k.name, "value": env.world.param_values.get(k)}
            for k in inputs
        ],
        "publicOutputs": [{"node": k.node, "name": k.name} for k in outputs],
        "typeNames": type_names,
        "correlationId": correlation_id,
    }


def _resolved_type(env: TreeEnvironment, key: ParamKey):
    from .dataflow import resolve

    param = env.data.params[key]
    return resolve(param.type, param.node, env.world, env.types)


def subtree_shape(child_id: str, env: TreeEnvironment) -> dict[str, Any]:
    """Structure-and-options document used for utility queries."""
    return env_to_doc(extract_subtree(child_id, env))


# -- shovable ---------------------------------------------------------------------


@dataclass
class ShoveStatus:
    """Debug view of the shovable's last selection round."""

    phase: str = "idle"
    correlation_id: str = ""
    local_bounds: Optional[list[Any]] = None
    replies: dict[str, list[Any]] = field(default_factory=dict)
    selected: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "phase": self.phase,
            "correlationId": self.correlation_id,
            "localBounds": self.local_bounds,
            "replies": dict(sorted(self.replies.items())),
            "selected": self.selected,
        }


class Shovable(Decorator):
    """Decorator that may ship its child subtree to a cheaper executor."""

    KIND = "Shovable"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.inbox: list[protocol.Message] = []
        self.status = ShoveStatus()
        self._phase = "idle"
        self._correlation = ""
        self._candidates: list[str] = []
        self._replies: dict[str, utility.UtilityBounds] = {}
        self._local_bounds = utility.INFEASIBLE_BOUNDS
        self._deadline = 0
        self._target = ""

    # -- helpers ---------------------------------------------------------------

    def _comms(self, env: TreeEnvironment) -> Optional["Comms"]:
        return env.world.externals.get("comms")

    def _clear(self, comms: Optional["Comms"]) -> None:
        """Forget the activation's routing state; keeps the debug status."""
        if comms is not None and self._correlation:
            comms.unregister_route(self._correlation)
        self.inbox.clear()
        self._phase = "idle"
        self._correlation = ""
        self._candidates = []
        self._replies = {}
        self._target = ""

    def _finish(self, comms: Optional["Comms"], result: NodeState) -> NodeState:
        self._clear(comms)
        return result

    # -- lifecycle ----------------------------------------------------------------

    def on_tick(self, ctx: "TickContext") -> NodeState:
        env = ctx.env
        comms = self._comms(env)
        child = self.child_id(ctx)

        if self._phase == "idle":
            return self._begin_activation(ctx, env, comms, child)
        if self._phase == "querying":
            return self._collect_replies(ctx, env, comms, child)
        if self._phase in ("awaiting_ack", "remote"):
            return self._track_remote(ctx, env, comms)
        # local execution mirrors the child until it resolves
        state = ctx.tick(child)
        if state == NodeState.ERROR:
            state = NodeState.FAILED
        if state in (NodeState.SUCCEEDED, NodeState.FAILED):
            self.status.phase = f"result:{state.value}"
            return self._finish(comms, state)
        return NodeState.RUNNING

    def _begin_activation(self, ctx, env, comms, child) -> NodeState:
        self._local_bounds = env.nodes[child].utility(env)
        self.status = ShoveStatus(
            phase="querying",
            local_bounds=utility.bounds_to_json(self._local_bounds),
        )
        neighbors = comms.neighbors() if comms is not None else []
        if not neighbors:
            return self._choose(ctx, env, comms, child)
        self._correlation = comms.next_correlation()
        self.status.correlation_id = self._correlation
        comms.register_route(self._correlation, self)
        shape = subtree_shape(child, env)
        self._candidates = sorted(d.id for d in neighbors)
        self._replies = {}
        for descriptor in neighbors:
            comms.send(
                descriptor.id,
                protocol.UTILITY_QUERY,
                {"subtree": shape},
                self._correlation,
            )
        self._phase = "querying"
        self._deadline = env.cycle + ctx.config.query_timeout_cycles
        return NodeState.RUNNING

    def _collect_replies(self, ctx, env, comms, child) -> NodeState:
        for msg in self._drain_inbox(protocol.UTILITY_REPLY):
            try:
                bounds = utility.bounds_from_json(msg.payload["bounds"])
            except (KeyError, ValueError):
                bounds = utility.INFEASIBLE_BOUNDS
            self._replies[msg.sender_id] = bounds
            self.status.replies[msg.sender_id] = utility.bounds_to_json(bounds)
        if len(self._replies) < len(self._candidates) and env.cycle < self._deadline:
            return NodeState.RUNNING
        return self._choose(ctx, env, comms, child)

    def _choose(self, ctx, env, comms, child) -> NodeState:
        unknown_cost = ctx.config.unknown_cost
        # Unanswered queries count as infeasible; local execution wins ties.
        table: list[tuple[tuple, str]] = [
            (
                (utility.utility_sort_key(self._local_bounds, unknown_cost), 0, ""),
                "local",
            )
        ]
        for executor_id in self._candidates:
            bounds = self._replies.get(executor_id, utility.INFEASIBLE_BOUNDS)
            table.append(
                ((utility.utility_sort_key(bounds, unknown_cost), 1, executor_id), executor_id)
            )
        table.sort(key=lambda row: row[0])
        best_key, best = table[0]
        if comms is not None:
            comms.log_event(
                "utility_selection",
                f"node={self.id} local={json.dumps(self.status.local_bounds)}"
                f" replies={json.dumps(dict(sorted(self.status.replies.items())))}"
                f" selected={best if best_key[0][0] == 0 else 'none'}",
            )
        if best_key[0][0] == 1:  # even the best option is infeasible
            log.info("%s: no feasible executor", self.id)
            self.status.phase = "infeasible"
            self.status.selected = ""
            return self._finish(comms, NodeState.FAILED)
        self.status.selected = best
        if best == "local":
            self._phase = "local"
            self.status.phase = "local"
            state = ctx.tick(child)
            if state == NodeState.ERROR:
                state = NodeState.FAILED
            if state in (NodeState.SUCCEEDED, NodeState.FAILED):
                self.status.phase = f"result:{state.value}"
                return self._finish(comms, state)
            return NodeState.RUNNING
        if not self._correlation:
            self._correlation = comms.next_correlation()
            comms.register_route(self._correlation, self)
        envelope = build_envelope(child, env, self._correlation)
        comms.send(best, protocol.SHOVE, envelope, self._correlation)
        self._target = best
        self._phase = "awaiting_ack"
        self.status.phase = "awaiting_ack"
        self._deadline = env.cycle + ctx.config.ack_timeout_cycles
        return NodeState.RUNNING

    def _track_remote(self, ctx, env, comms) -> NodeState:
        for msg in self._drain_inbox(
            protocol.SHOVE_ACK, protocol.SHOVE_REJECT, protocol.RESULT
        ):
            if msg.type == protocol.SHOVE_ACK:
                self._phase = "remote"
                self.status.phase = "remote"
            elif msg.type == protocol.SHOVE_REJECT:
                log.info("%s: shove rejected by %s: %s", self.id, msg.sender_id,
                         msg.payload.get("reason"))
                self._candidates = [c for c in self._candidates if c != msg.sender_id]
                self._replies.pop(msg.sender_id, None)
                child = self.child_id(ctx)
                return self._choose(ctx, env, comms, child)
            elif msg.type == protocol.RESULT:
                return self._apply_result(env, comms, msg)
        if self._phase == "awaiting_ack" and env.cycle >= self._deadline:
            log.warning("%s: shove to %s timed out", self.id, self._target)
            return self._finish(comms, NodeState.FAILED)
        return NodeState.RUNNING

    def _apply_result(self, env, comms, msg) -> NodeState:
        payload = msg.payload
        for entry in payload.get("publicOutputs", []):
            key = ParamKey(entry["node"], ParamKind.OUTPUT, entry["name"])
            if key in env.data.params and entry.get("value") is not None:
                env.propagate(key, entry["value"])
        final = payload.get("finalState", "error")
        self.status.phase = f"result:{final}"
        state = NodeState.SUCCEEDED if final == "succeeded" else NodeState.FAILED
        return self._finish(comms, state)

    def _drain_inbox(self, *types: str) -> list[protocol.Message]:
        taken = [m for m in self.inbox if m.type in types]
        self.inbox = [m for m in self.inbox if m.type not in types]
        return taken

    def on_untick(self, ctx: "TickContext") -> NodeState | None:
        comms = self._comms(ctx.env)
        if self._phase in ("awaiting_ack", "remote") and comms is not None:
            results = self._drain_inbox(protocol.RESULT)
            if results:
                # the subtree already finished remotely: keep its outputs,
                # nothing left to cancel
                self._apply_result(ctx.env, comms, results[-1])
            else:
                comms.send(self._target, protocol.CANCEL, {}, self._correlation)
        elif self._phase != "idle":
            self.status.phase = "idle"
        self._clear(comms)
        return super().on_untick(ctx)

    def on_reset(self, ctx: "TickContext") -> None:
        self._clear(self._comms(ctx.env))
        super().on_reset(ctx)

    def on_shutdown(self, ctx: "TickContext") -> None:
        self._clear(self._comms(ctx.env))
        super().on_shutdown(ctx)


# -- slot --------------------------------------------------------------------------


class RemoteSlot(Node):
    """Leaf that hosts one shoved subtree at a time."""

    KIND = "RemoteSlot"
    MAX_CHILDREN = 0

    #: result-send retry schedule: attempts left and per-attempt backoff base
    MAX_RESULT_ATTEMPTS = 5

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._hosted: Optional[TreeEnvironment] = None
        self._hosted_engine = None
        self._reply_to = ""
        self._correlation = ""
        self._outputs: list[dict[str, str]] = []
        self._cleanup_pending = False
        self._pending_result: Optional[dict[str, Any]] = None
        self._result_attempts = 0
        self._retry_at = 0

    @property
    def occupied(self) -> bool:
        return (
            self._hosted is not None
            or self._cleanup_pending
            or self._pending_result is not None
        )

    def slot_status(self) -> dict[str, Any]:
        return {
            "occupied": self.occupied,
            "correlationId": self._correlation,
            "sender": self._reply_to,
        }

    def receive(self, envelope: dict[str, Any], env: TreeEnvironment,
                sender_id: str, comms: "Comms") -> None:
        """Deserialize and host a shoved subtree; raises on bad envelopes."""
        if self.occupied:
            raise BtError("slot occupied")
        registry = getattr(comms, "registry", None)
        if registry is None:
            raise BtError("slot has no node registry")
        for name in envelope.get("typeNames", []):
            if not env.types.has(name):
                raise ValidationError([f"unknown type {name!r}"])
        problems: list[str] = []
        hosted = build_env(envelope.get("subtree", {}), registry, env.types, collect=problems)
        if problems:
            raise ValidationError(problems)
        hosted.world.externals = env.world.externals  # share sim/services
        from .engine import TickEngine

        engine = TickEngine(hosted, getattr(comms, "config", None))
        engine.setup()
        for entry in envelope.get("publicInputs", []):
            key = ParamKey(entry["node"], ParamKind.INPUT, entry["name"])
            if key in hosted.data.params:
                hosted.set_param(key, entry.get("value"))
        self._hosted = hosted
        self._hosted_engine = engine
        self._reply_to = sender_id
        self._correlation = envelope.get("correlationId", "")
        self._outputs = list(envelope.get("publicOutputs", []))
        self._cleanup_pending = False

    def cancel_hosted(self) -> None:
        if self._hosted_engine is not None:
            self._hosted_engine.untick_all()
            self._hosted_engine.shutdown()
        self._purge()

    def _purge(self) -> None:
        self._hosted = None
        self._hosted_engine = None
        self._reply_to = ""
        self._correlation = ""
        self._outputs = []
        self._cleanup_pending = False
        self._pending_result = None
        self._result_attempts = 0

    def on_tick(self, ctx: "TickContext") -> NodeState:
        if self._pending_result is not None:
            return self._retry_result(ctx)
        if self._cleanup_pending:
            self._purge()
            return NodeState.IDLE
        if self._hosted is None:
            return NodeState.IDLE
        hosted, engine = self._hosted, self._hosted_engine
        root = hosted.root_id()
        root_state = hosted.world.state(root)
        if root_state in (NodeState.UNINITIALIZED, NodeState.ERROR):
            final = NodeState.ERROR
        else:
            final = engine.tick_cycle()
        if final == NodeState.RUNNING:
            return NodeState.RUNNING
        payload = self._result_payload(hosted, final)
        engine.untick_all()
        engine.shutdown()
        self._hosted = None
        self._hosted_engine = None
        if self._try_send_result(ctx, payload):
            self._cleanup_pending = True
        else:
            self._pending_result = payload
            self._result_attempts = 1
            self._retry_at = ctx.env.cycle + 1
        return NodeState.RUNNING

    def _retry_result(self, ctx: "TickContext") -> NodeState:
        if ctx.env.cycle < self._retry_at:
            return NodeState.RUNNING
        if self._try_send_result(ctx, self._pending_result):
            self._pending_result = None
            self._cleanup_pending = True
            return NodeState.RUNNING
        self._result_attempts += 1
        if self._result_attempts >= self.MAX_RESULT_ATTEMPTS:
            log.warning("%s: dropping undeliverable result for %s",
                        self.id, self._reply_to)
            self._purge()
            return NodeState.IDLE
        self._retry_at = ctx.env.cycle + 2 ** self._result_attempts
        return NodeState.RUNNING

    def _result_payload(self, hosted: TreeEnvironment, final: NodeState) -> dict[str, Any]:
        final_name = final.value if final in (
            NodeState.SUCCEEDED, NodeState.FAILED) else "error"
        return {
            "finalState": final_name,
            "publicOutputs": [
                {
                    "node": entry["node"],
                    "name": entry["name"],
                    "value": hosted.world.param_values.get(
                        ParamKey(entry["node"], ParamKind.OUTPUT, entry["name"])
                    ),
                }
                for entry in self._outputs
            ],
            "worldDelta": {
                "nodeStates": {
                    n: s.value for n, s in sorted(hosted.world.node_states.items())
                },
                "paramValues": {
                    str(k): v for k, v in sorted(hosted.world.param_values.items())
                },
            },
        }

    def _try_send_result(self, ctx: "TickContext", payload: dict[str, Any]) -> bool:
        comms = ctx.env.world.externals.get("comms")
        if comms is None:
            return True  # nowhere to report; treat as delivered
        return comms.send(self._reply_to, protocol.RESULT, payload, self._correlation)

    def on_untick(self, ctx: "TickContext") -> NodeState | None:
        if self._hosted is not None:
            self.cancel_hosted()
        return None

    def on_reset(self, ctx: "TickContext") -> None:
        if self._hosted is not None:
            self.cancel_hosted()
        self._purge()

    def on_shutdown(self, ctx: "TickContext") -> None:
        if self._hosted is not None:
            self.cancel_hosted()
        self._purge()
