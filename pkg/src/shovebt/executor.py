"""One executor: a tree, its engine, and the message handlers.

Executors interact only through messages; the inbox drains between
cycles, so ticks never observe half-handled traffic. The executor also
acts as the comms facade that Shovable and RemoteSlot use to send
queries, envelopes, results, and cancels.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Optional, Protocol

from . import protocol, utility
from .distribution import RemoteSlot, Shovable
from .engine import EngineConfig, TickEngine
from .errors import BtError, TransportError
from .node import Node, NodeRegistry
from .protocol import ExecutorDescriptor, Message
from .states import NodeState
from .tree import TreeEnvironment
from .treefile import build_env

log = logging.getLogger(__name__)


def _summary(msg_type: str, payload: dict) -> str:
    """Compact, deterministic payload digest for the event log."""
    if msg_type == protocol.UTILITY_REPLY:
        return f" bounds={payload.get('bounds')}"
    if msg_type == protocol.RESULT:
        return f" finalState={payload.get('finalState')}"
    if msg_type == protocol.SHOVE_REJECT:
        return f" reason={payload.get('reason')}"
    return ""


class Comms(Protocol):
    """What distribution nodes need from their executor."""

    def neighbors(self) -> list[ExecutorDescriptor]: ...

    def send(self, to_id: str, msg_type: str, payload: dict, correlation_id: str) -> bool: ...

    def next_correlation(self) -> str: ...

    def register_route(self, correlation_id: str, node: Node) -> None: ...

    def unregister_route(self, correlation_id: str) -> None: ...

    def log_event(self, event: str, detail: str) -> None: ...


class Executor:
    """A robot's runtime: one tree, one world, one mailbox."""

    def __init__(
        self,
        executor_id: str,
        env: TreeEnvironment,
        registry: NodeRegistry,
        transport,
        *,
        config: EngineConfig | None = None,
        address: str = "",
        mission: bool = True,
        event_sink: Optional[Callable[[str, str, str], None]] = None,
    ):
        self.id = executor_id
        self.env = env
        self.registry = registry
        self.transport = transport
        self.config = config or EngineConfig()
        self.address = address or executor_id
        self.mission = mission
        self.engine = TickEngine(env, self.config)
        self.peers: dict[str, ExecutorDescriptor] = {}
        self._routes: dict[str, Node] = {}
        self._corr_counter = 0
        self._event_sink = event_sink
        env.world.externals["comms"] = self

    # -- comms facade -------------------------------------------------------------

    def neighbors(self) -> list[ExecutorDescriptor]:
        found = sorted(self.peers.values(), key=lambda d: d.id)
        self.env.world.neighbors = found
        return found

    def add_peer(self, descriptor: ExecutorDescriptor) -> None:
        self.peers[descriptor.id] = descriptor

    def next_correlation(self) -> str:
        self._corr_counter += 1
        return f"{self.id}-{self._corr_counter}"

    def register_route(self, correlation_id: str, node: Node) -> None:
        self._routes[correlation_id] = node

    def unregister_route(self, correlation_id: str) -> None:
        self._routes.pop(correlation_id, None)

    def send(self, to_id: str, msg_type: str, payload: dict, correlation_id: str) -> bool:
        descriptor = self.peers.get(to_id)
        address = descriptor.address if descriptor and descriptor.address else to_id
        msg = Message(msg_type, self.id, correlation_id, payload)
        try:
            self.transport.send(address, msg)
        except TransportError as exc:
            log.warning("%s -> %s: %s", self.id, to_id, exc)
            return False
        self._log_event(msg_type.lower(), f"to={to_id} corr={correlation_id}{_summary(msg_type, payload)}")
        return True

    def log_event(self, event: str, detail: str) -> None:
        self._log_event(event, detail)

    def _log_event(self, event: str, detail: str) -> None:
        if self._event_sink is not None:
            self._event_sink(self.id, event, detail)

    # -- message handling ------------------------------------------------------------

    def handle(self, msg: Message) -> None:
        if msg.type == protocol.ANNOUNCE:
            payload = msg.payload
            self.peers[msg.sender_id] = ExecutorDescriptor(
                msg.sender_id,
                payload.get("address", msg.sender_id),
                payload.get("slotAvailable", True),
            )
            return
        if msg.type == protocol.UTILITY_QUERY:
            self._handle_utility_query(msg)
        elif msg.type == protocol.SHOVE:
            self._handle_shove(msg)
        elif msg.type == protocol.CANCEL:
            self._handle_cancel(msg)
        elif msg.type in (
            protocol.UTILITY_REPLY,
            protocol.SHOVE_ACK,
            protocol.SHOVE_REJECT,
            protocol.RESULT,
        ):
            self._log_event(msg.type.lower(), f"from={msg.sender_id} corr={msg.correlation_id}")
            node = self._routes.get(msg.correlation_id)
            if node is not None and hasattr(node, "inbox"):
                node.inbox.append(msg)
            else:
                log.debug("%s: dropping unrouted %s (%s)", self.id, msg.type, msg.correlation_id)
        else:
            log.warning("%s: unknown message type %s", self.id, msg.type)

    def _slots(self) -> list[RemoteSlot]:
        return [n for _, n in sorted(self.env.nodes.items()) if isinstance(n, RemoteSlot)]

    def free_slot(self) -> Optional[RemoteSlot]:
        for slot in self._slots():
            if not slot.occupied:
                return slot
        return None

    def slot_available(self) -> bool:
        return self.free_slot() is not None

    def _handle_utility_query(self, msg: Message) -> None:
        self._log_event("utility_query", f"from={msg.sender_id} corr={msg.correlation_id}")
        bounds = utility.INFEASIBLE_BOUNDS
        if self.slot_available():
            try:
                shape = build_env(msg.payload.get("subtree", {}), self.registry, self.env.types)
                shape.world.externals = self.env.world.externals
                shape_engine = TickEngine(shape, self.config)
                shape_engine.setup()
                bounds = utility.tree_utility(shape)
                shape_engine.shutdown()
            except BtError as exc:
                log.info("%s: cannot evaluate query: %s", self.id, exc)
                bounds = utility.INFEASIBLE_BOUNDS
        self.send(
            msg.sender_id,
            protocol.UTILITY_REPLY,
            {"bounds": utility.bounds_to_json(bounds)},
            msg.correlation_id,
        )

    def _handle_shove(self, msg: Message) -> None:
        self._log_event("shove_received", f"from={msg.sender_id} corr={msg.correlation_id}")
        slot = self.free_slot()
        if slot is None:
            self.send(msg.sender_id, protocol.SHOVE_REJECT, {"reason": "slot occupied"},
                      msg.correlation_id)
            return
        try:
            slot.receive(msg.payload, self.env, msg.sender_id, self)
        except BtError as exc:
            self.send(msg.sender_id, protocol.SHOVE_REJECT, {"reason": str(exc)},
                      msg.correlation_id)
            return
        self.send(msg.sender_id, protocol.SHOVE_ACK, {}, msg.correlation_id)

    def _handle_cancel(self, msg: Message) -> None:
        self._log_event("cancel", f"from={msg.sender_id} corr={msg.correlation_id}")
        for slot in self._slots():
            if slot._correlation == msg.correlation_id and slot._hosted is not None:
                slot.cancel_hosted()

    # -- cycle --------------------------------------------------------------------

    def drain_and_handle(self) -> None:
        for msg in self.transport.drain(self.id):
            self.handle(msg)

    def announce(self) -> None:
        for peer_id in sorted(self.peers):
            msg = Message(
                protocol.ANNOUNCE,
                self.id,
                "",
                {"address": self.address, "slotAvailable": self.slot_available()},
            )
            descriptor = self.peers[peer_id]
            try:
                self.transport.send(descriptor.address or peer_id, msg)
            except TransportError:
                pass

    def resolved(self) -> bool:
        state = self.env.tree_state()
        return state in (NodeState.SUCCEEDED, NodeState.FAILED)

    def run_cycle(self, tick_tree: bool = True) -> NodeState:
        self.drain_and_handle()
        if tick_tree:
            self.engine.tick_cycle()
        self.announce()
        return self.env.tree_state()

    def shove_status(self) -> dict[str, Any]:
        return {
            node_id: node.status.to_json()
            for node_id, node in sorted(self.env.nodes.items())
            if isinstance(node, Shovable)
        }

    def slot_status(self) -> dict[str, Any]:
        return {slot.id: slot.slot_status() for slot in self._slots()}
