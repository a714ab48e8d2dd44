"""Message transports: in-process channels and TCP, sharing one framing.

The in-process network is what the deterministic simulator uses: sends
are buffered and delivered in order during an explicit flush phase.
The TCP transport carries the identical frames over sockets for real
multi-process deployments.
"""

from __future__ import annotations

import socket
import threading
from typing import Callable

from .errors import TransportError
from .protocol import FrameDecoder, Message, encode_message

Address = str


class LocalNetwork:
    """Deterministic in-process transport shared by a set of executors."""

    def __init__(self) -> None:
        self._inboxes: dict[str, list[Message]] = {}
        self._pending: list[tuple[str, Message]] = []

    def register(self, executor_id: str) -> None:
        self._inboxes.setdefault(executor_id, [])

    def send(self, to: Address, msg: Message) -> None:
        if to not in self._inboxes:
            raise TransportError(f"unknown executor {to!r}")
        self._pending.append((to, msg))

    def flush(self) -> None:
        """Delivery phase: move every buffered message into its inbox."""
        for to, msg in self._pending:
            self._inboxes[to].append(msg)
        self._pending.clear()

    def drain(self, executor_id: str) -> list[Message]:
        inbox = self._inboxes.get(executor_id, [])
        taken, inbox[:] = list(inbox), []
        return taken

    def close(self) -> None:
        self._pending.clear()


class TcpTransport:
    """One executor's TCP endpoint: a listener plus cached peer connections."""

    def __init__(self, executor_id: str, host: str = "127.0.0.1", port: int = 0):
        self.executor_id = executor_id
        self._server = socket.create_server((host, port))
        self._server.settimeout(0.2)
        self._host = host
        self._port = self._server.getsockname()[1]
        self._inbox: list[Message] = []
        self._lock = threading.Lock()
        self._peers: dict[Address, socket.socket] = {}
        self._closing = False
        self._threads: list[threading.Thread] = []
        acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        acceptor.start()
        self._threads.append(acceptor)

    @property
    def address(self) -> Address:
        return f"{self._host}:{self._port}"

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            reader = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            reader.start()
            self._threads.append(reader)

    def _read_loop(self, conn: socket.socket) -> None:
        decoder = FrameDecoder()
        with conn:
            while not self._closing:
                try:
                    data = conn.recv(65536)
                except OSError:
                    return
                if not data:
                    return
                for doc in decoder.feed(data):
                    with self._lock:
                        self._inbox.append(Message.from_json(doc))

    def send(self, to: Address, msg: Message) -> None:
        sock = self._peers.get(to)
        if sock is None:
            host, _, port = to.rpartition(":")
            try:
                sock = socket.create_connection((host, int(port)), timeout=2.0)
            except (OSError, ValueError) as exc:
                raise TransportError(f"cannot reach {to!r}: {exc}") from exc
            self._peers[to] = sock
        try:
            sock.sendall(encode_message(msg))
        except OSError as exc:
            self._peers.pop(to, None)
            raise TransportError(f"send to {to!r} failed: {exc}") from exc

    def flush(self) -> None:
        """TCP delivers eagerly; nothing to do."""

    def drain(self, executor_id: str | None = None) -> list[Message]:
        with self._lock:
            taken, self._inbox = self._inbox, []
        return taken

    def wait_for_messages(self, predicate: Callable[[list[Message]], bool],
                          timeout: float = 2.0) -> bool:
        """Poll the inbox until ``predicate`` holds (testing helper)."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if predicate(list(self._inbox)):
                    return True
            time.sleep(0.005)
        return False

    def close(self) -> None:
        self._closing = True
        try:
            self._server.close()
        except OSError:
            pass
        for sock in self._peers.values():
            try:
                sock.close()
            except OSError:
                pass
        self._peers.clear()
