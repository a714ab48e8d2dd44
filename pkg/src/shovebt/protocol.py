"""Wire protocol: message schema and length-delimited JSON framing.

Every message is a JSON object {type, correlationId, senderId, payload}
preceded by a 4-byte big-endian length. The same framing carries
executor-to-executor traffic and the debugger control API.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ParseError

MAX_FRAME = 64 * 1024 * 1024

# executor-to-executor message types
UTILITY_QUERY = "UTILITY_QUERY"
UTILITY_REPLY = "UTILITY_REPLY"
SHOVE = "SHOVE"
SHOVE_ACK = "SHOVE_ACK"
SHOVE_REJECT = "SHOVE_REJECT"
RESULT = "RESULT"
CANCEL = "CANCEL"
ANNOUNCE = "ANNOUNCE"

# control API message types
COMMAND = "COMMAND"
ACK = "ACK"
SNAPSHOT = "SNAPSHOT"


@dataclass(frozen=True)
class ExecutorDescriptor:
    """A reachable executor: unique id, transport address, slot availability."""

    id: str
    address: str = ""
    slot_available: bool = True

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "address": self.address, "slotAvailable": self.slot_available}

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "ExecutorDescriptor":
        return ExecutorDescriptor(doc["id"], doc.get("address", ""), doc.get("slotAvailable", True))


@dataclass
class Message:
    type: str
    sender_id: str
    correlation_id: str = ""
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "type": self.type,
            "correlationId": self.correlation_id,
            "senderId": self.sender_id,
            "payload": self.payload,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "Message":
        try:
            return Message(
                type=doc["type"],
                sender_id=doc.get("senderId", ""),
                correlation_id=doc.get("correlationId", ""),
                payload=doc.get("payload", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed message: {exc}") from exc


def encode_frame(doc: dict[str, Any]) -> bytes:
    # default=repr keeps snapshot streaming alive when a plugin node
    # stores a non-JSON value in the world
    body = json.dumps(doc, separators=(",", ":"), sort_keys=True, default=repr).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise ParseError(f"frame too large: {len(body)} bytes")
    return len(body).to_bytes(4, "big") + body


def encode_message(msg: Message) -> bytes:
    return encode_frame(msg.to_json())


class FrameDecoder:
    """Incremental decoder for a length-delimited JSON byte stream."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict[str, Any]]:
        self._buf.extend(data)
        out: list[dict[str, Any]] = []
        while True:
            if len(self._buf) < 4:
                return out
            size = int.from_bytes(self._buf[:4], "big")
            if size > MAX_FRAME:
                raise ParseError(f"frame too large: {size} bytes")
            if len(self._buf) < 4 + size:
                return out
            body = bytes(self._buf[4 : 4 + size])
            del self._buf[: 4 + size]
            try:
                out.append(json.loads(body.decode("utf-8")))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ParseError(f"bad frame body: {exc}") from exc


def decode_frames(data: bytes) -> list[dict[str, Any]]:
    """Decode every complete frame in ``data`` (trailing partials ignored)."""
    return FrameDecoder().feed(data)
