"""Debugger control API: snapshot stream plus steering commands.

The server wraps a team scheduler. Clients connect over TCP with the
same length-delimited JSON framing as the executor wire protocol; the
server streams a SNAPSHOT after every cycle and every command, and
answers each COMMAND with an ACK carrying the command's correlation id.
Commands are queued and applied between cycles, never mid-cycle.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from typing import Any

from .engine import update
from .errors import BtError, ValidationError
from .protocol import ACK, COMMAND, SNAPSHOT, FrameDecoder, Message, encode_frame
from .states import NodeAction, NodeState
from .team import TeamScheduler
from .treefile import env_to_doc, load_tree

log = logging.getLogger(__name__)


class _Client:
    def __init__(self, conn: socket.socket, client_id: int):
        self.conn = conn
        self.id = client_id
        self.alive = True

    def send(self, doc: dict[str, Any]) -> None:
        try:
            self.conn.sendall(encode_frame(doc))
        except OSError:
            self.alive = False


class ControlServer:
    def __init__(
        self,
        scheduler: TeamScheduler,
        host: str = "127.0.0.1",
        port: int = 0,
        hz: float = 0.0,
    ):
        self.scheduler = scheduler
        self.hz = hz
        self._server = socket.create_server((host, port))
        self._server.settimeout(0.2)
        self.host = host
        self.port = self._server.getsockname()[1]
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._commands: "queue.Queue[tuple[_Client, Message]]" = queue.Queue()
        self._stopping = False
        self._mode = "idle"  # idle | steps | until_result
        self._pending_steps = 0
        self._next_client = 0
        self._last_event_index = 0

    # -- socket plumbing ---------------------------------------------------------

    def start(self) -> None:
        threading.Thread(target=self._accept_loop, daemon=True).start()

    def _accept_loop(self) -> None:
        while not self._stopping:
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._next_client += 1
            client = _Client(conn, self._next_client)
            with self._clients_lock:
                self._clients.append(client)
            threading.Thread(target=self._read_loop, args=(client,), daemon=True).start()
            # a fresh client immediately gets the current state
            self._commands.put((client, Message(COMMAND, "client", "", {"command": "_hello"})))

    def _read_loop(self, client: _Client) -> None:
        decoder = FrameDecoder()
        with client.conn:
            while not self._stopping:
                try:
                    data = client.conn.recv(65536)
                except OSError:
                    break
                if not data:
                    break
                try:
                    for doc in decoder.feed(data):
                        self._commands.put((client, Message.from_json(doc)))
                except BtError as exc:
                    log.warning("client %d: %s", client.id, exc)
                    break
        client.alive = False

    def _broadcast(self, doc: dict[str, Any]) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            if client.alive:
                client.send(doc)
        with self._clients_lock:
            self._clients = [c for c in self._clients if c.alive]

    # -- snapshots -----------------------------------------------------------------

    def snapshot_doc(self) -> dict[str, Any]:
        snap = self.scheduler.snapshot()
        entries = self.scheduler.log.entries
        snap["events"] = [
            {"tick": t, "actor": a, "event": e, "detail": d}
            for t, a, e, d in entries[self._last_event_index :]
        ]
        self._last_event_index = len(entries)
        snap["trees"] = {
            e.id: env_to_doc(e.env) for e in self.scheduler.executors
        }
        snap["nodeTypes"] = self.scheduler.executors[0].registry.schemas()
        snap["mode"] = self._mode
        return {
            "type": SNAPSHOT,
            "correlationId": "",
            "senderId": "server",
            "payload": snap,
        }

    def _push_snapshot(self) -> None:
        self._broadcast(self.snapshot_doc())

    # -- command handling ---------------------------------------------------------------

    def _ack(self, client: _Client, msg: Message, ok: bool, **extra: Any) -> None:
        client.send(
            {
                "type": ACK,
                "correlationId": msg.correlation_id,
                "senderId": "server",
                "payload": {"ok": ok, **extra},
            }
        )

    def _mission_executor(self):
        for executor in self.scheduler.executors:
            if executor.mission:
                return executor
        return self.scheduler.executors[0]

    def _handle_command(self, client: _Client, msg: Message) -> None:
        payload = msg.payload or {}
        command = payload.get("command", "")
        args = payload.get("args", {}) or {}
        if command != "_hello":
            self.scheduler.log.log(
                self.scheduler.tick,
                "server",
                "command",
                f"cmd={command} client={client.id}",
            )
        try:
            if command == "_hello":
                self._ack(client, msg, True, hello=True)
            elif command == "loadTree":
                self._cmd_load_tree(args)
                self._ack(client, msg, True)
            elif command == "tick":
                self._pending_steps += int(args.get("cycles", 1))
                self._mode = "steps"
                self._ack(client, msg, True)
            elif command == "tickUntilResult":
                self._mode = "until_result"
                self._ack(client, msg, True)
            elif command == "untick":
                for executor in self.scheduler.executors:
                    executor.engine.untick_all()
                self._mode = "idle"
                self._ack(client, msg, True)
            elif command == "reset":
                for executor in self.scheduler.executors:
                    executor.engine.reset()
                self.scheduler._announced.clear()
                self._mode = "idle"
                self._ack(client, msg, True)
            elif command == "shutdown":
                for executor in self.scheduler.executors:
                    executor.engine.shutdown()
                self._ack(client, msg, True)
                self._stopping = True
            elif command == "setOption":
                self._cmd_set_option(args)
                self._ack(client, msg, True)
            elif command == "addWiring":
                executor = self._executor_for(args)
                executor.env.wire(
                    (args["source"]["node"], args["source"]["name"]),
                    (args["target"]["node"], args["target"]["name"]),
                )
                self._ack(client, msg, True)
            elif command == "removeWiring":
                executor = self._executor_for(args)
                removed = executor.env.unwire(
                    (args["source"]["node"], args["source"]["name"]),
                    (args["target"]["node"], args["target"]["name"]),
                )
                self._ack(client, msg, removed)
            elif command == "forceDoor":
                self.scheduler.sim.force_door(args["door"], bool(args.get("open", False)))
                self._ack(client, msg, True)
            elif command == "shoveStatus":
                self._ack(
                    client,
                    msg,
                    True,
                    utilityCache={
                        e.id: e.shove_status() for e in self.scheduler.executors
                    },
                    slotStatus={
                        e.id: e.slot_status() for e in self.scheduler.executors
                    },
                )
            else:
                self._ack(client, msg, False, error=f"unknown command {command!r}")
                return
        except ValidationError as exc:
            self._ack(client, msg, False, errors=exc.violations)
        except (BtError, KeyError, TypeError, ValueError) as exc:
            self._ack(client, msg, False, error=str(exc))
        self._push_snapshot()

    def _executor_for(self, args: dict[str, Any]):
        executor_id = args.get("executor")
        if executor_id:
            for executor in self.scheduler.executors:
                if executor.id == executor_id:
                    return executor
            raise KeyError(f"unknown executor {executor_id!r}")
        return self._mission_executor()

    def _cmd_load_tree(self, args: dict[str, Any]) -> None:
        executor = self._executor_for(args)
        source = args.get("tree")
        if source is None:
            raise KeyError("loadTree needs a 'tree' argument (document or path)")
        env = load_tree(source, executor.registry)
        executor.engine.shutdown()
        sim_handle = executor.env.world.externals.get("sim")
        executor.env = env
        if sim_handle is not None:
            env.world.externals["sim"] = sim_handle
        env.world.externals["comms"] = executor
        from .engine import TickEngine

        executor.engine = TickEngine(env, executor.config)
        executor.engine.setup()
        self.scheduler._announced.pop(executor.id, None)
        self._mode = "idle"

    def _cmd_set_option(self, args: dict[str, Any]) -> None:
        executor = self._executor_for(args)
        env = executor.env
        node_id = args["node"]
        node = env.nodes.get(node_id)
        if node is None:
            raise KeyError(f"unknown node {node_id!r}")
        new_options = dict(node.options)
        new_options[args["option"]] = args["value"]
        rebuilt = executor.registry.create(node.KIND, node_id, new_options, types=env.types)
        update(node_id, NodeAction.SHUTDOWN, env)
        rebuilt._types = env.types
        env.nodes[node_id] = rebuilt
        from .dataflow import ParamKey, ParamKind

        for name in rebuilt.OPTIONS:
            env.world.param_values[ParamKey(node_id, ParamKind.OPTION, name)] = rebuilt.options[name]
        env.world.node_states[node_id] = NodeState.UNINITIALIZED
        update(node_id, NodeAction.SETUP, env)

    # -- main loop -------------------------------------------------------------------------

    def _drain_commands(self) -> None:
        while True:
            try:
                client, msg = self._commands.get_nowait()
            except queue.Empty:
                return
            if msg.type == COMMAND:
                self._handle_command(client, msg)

    def _advance(self) -> bool:
        if self._mode == "steps" and self._pending_steps > 0:
            self.scheduler.run_cycle()
            self._pending_steps -= 1
            if self._pending_steps <= 0:
                self._mode = "idle"
            return True
        if self._mode == "until_result":
            if self.scheduler.done() or self.scheduler.tick >= self.scheduler.config.max_cycles:
                self._mode = "idle"
                return False
            self.scheduler.run_cycle()
            if self.scheduler.done():
                self._mode = "idle"
            return True
        return False

    def serve_forever(self) -> None:
        self.start()
        period = 1.0 / self.hz if self.hz > 0 else 0.0
        try:
            while not self._stopping:
                started = time.monotonic()
                self._drain_commands()
                advanced = self._advance()
                if advanced:
                    self._push_snapshot()
                if period:
                    remainder = period - (time.monotonic() - started)
                    if remainder > 0:
                        time.sleep(remainder)
                elif not advanced:
                    time.sleep(0.005)
        finally:
            self.close()

    def close(self) -> None:
        self._stopping = True
        try:
            self._server.close()
        except OSError:
            pass
        with self._clients_lock:
            for client in self._clients:
                try:
                    client.conn.close()
                except OSError:
                    pass
            self._clients.clear()
