"""Shared domain types: sessions, metrics, and the JSON-RPC envelope.

All types here are immutable value objects, safe to share across threads.
The JSON-RPC grammar is one JSON document per transport frame; parsing
and serialization round-trip semantically equal JSON.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from math import isfinite
from typing import Any

from .errors import InvalidMetrics, RpcParseError, UnknownLanguage

RequestId = int | str


class LanguageId(str, Enum):
    """Closed set of supported exercise languages."""

    JAVA = "java"
    PYTHON = "python"
    C = "c"

    @classmethod
    def parse(cls, value: str) -> "LanguageId":
        try:
            return cls(value)
        except ValueError:
            raise UnknownLanguage(f"unsupported language: {value!r}") from None


class ActivityKind(str, Enum):
    """What counts as session activity for the idle-cleanup sweep."""

    LSP_MESSAGE = "lspMessage"
    FILE_MODIFICATION = "fileModification"
    TERMINAL_INPUT = "terminalInput"


class SessionState(str, Enum):
    PROVISIONING = "provisioning"
    ACTIVE = "active"
    CLOSED = "closed"


def new_session_id() -> str:
    """Server-generated opaque session id (UUID format)."""
    return str(uuid.uuid4())


@dataclass(frozen=True)
class SessionDescriptor:
    """One student's live workspace binding."""

    session_id: str
    user_id: str
    exercise_id: str
    language: LanguageId
    node_id: str
    workspace_path: str
    last_activity: int
    state: SessionState = SessionState.ACTIVE

    def touched(self, at: int) -> "SessionDescriptor":
        """Copy with ``last_activity`` advanced; never moves backwards."""
        return replace(self, last_activity=max(self.last_activity, at))


@dataclass(frozen=True)
class ServerMetrics:
    """The five load measurements a language-server node reports.

    Validated at construction so an invalid report can never enter the
    pool: all fields finite, ``cpu_usage`` in [0, 1], memory sizes
    consistent, counts non-negative.
    """

    avg_load: float
    cpu_usage: float
    total_memory: int
    free_memory: int
    active_sessions: int

    def __post_init__(self):
        checks = [
            (isfinite(self.avg_load) and self.avg_load >= 0, "avg_load must be finite and >= 0"),
            (isfinite(self.cpu_usage) and 0 <= self.cpu_usage <= 1, "cpu_usage must be in [0, 1]"),
            (self.total_memory > 0, "total_memory must be > 0"),
            (0 <= self.free_memory <= self.total_memory, "free_memory must be in [0, total_memory]"),
            (self.active_sessions >= 0, "active_sessions must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidMetrics(message)

    FIELD_NAMES = ("avgLoad", "cpuUsage", "totalMemory", "freeMemory", "activeSessions")

    @classmethod
    def from_wire(cls, body: dict) -> "ServerMetrics":
        """Parse a metrics POST body carrying exactly the five fields."""
        if not isinstance(body, dict):
            raise InvalidMetrics("metrics body must be a JSON object")
        missing = [name for name in cls.FIELD_NAMES if name not in body]
        if missing:
            raise InvalidMetrics(f"missing metric fields: {', '.join(missing)}")
        extra = [key for key in body if key not in cls.FIELD_NAMES]
        if extra:
            raise InvalidMetrics(f"unexpected fields: {', '.join(sorted(extra))}")
        try:
            return cls(
                avg_load=float(body["avgLoad"]),
                cpu_usage=float(body["cpuUsage"]),
                total_memory=int(body["totalMemory"]),
                free_memory=int(body["freeMemory"]),
                active_sessions=int(body["activeSessions"]),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidMetrics(f"non-numeric metric value: {exc}") from exc

    def to_wire(self) -> dict:
        return {
            "avgLoad": self.avg_load,
            "cpuUsage": self.cpu_usage,
            "totalMemory": self.total_memory,
            "freeMemory": self.free_memory,
            "activeSessions": self.active_sessions,
        }


class RpcKind(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    NOTIFICATION = "notification"


@dataclass(frozen=True)
class RpcEnvelope:
    """One JSON-RPC message with routing metadata.

    ``payload`` is the opaque body: the ``params`` value for requests and
    notifications, or a ``{"result": ...}`` / ``{"error": ...}`` wrapper
    for responses.
    """

    kind: RpcKind
    session_id: str
    received_at: int
    id: RequestId | None = None
    method: str | None = None
    payload: Any = None

    def __post_init__(self):
        if self.kind in (RpcKind.REQUEST, RpcKind.RESPONSE) and self.id is None:
            raise RpcParseError(f"{self.kind.value} must carry an id")
        if self.kind is RpcKind.NOTIFICATION and self.id is not None:
            raise RpcParseError("notification must not carry an id")
        if self.kind is not RpcKind.RESPONSE and not self.method:
            raise RpcParseError(f"{self.kind.value} must carry a non-empty method")
        if self.kind is RpcKind.RESPONSE and self.method is not None:
            raise RpcParseError("response must not carry a method")

    def with_payload(self, payload: Any) -> "RpcEnvelope":
        return replace(self, payload=payload)


def parse_envelope(frame: str | bytes | dict, session_id: str, received_at: int) -> RpcEnvelope:
    """Parse one JSON-RPC 2.0 text frame into an envelope.

    Raises :class:`RpcParseError` for anything that is not a single
    well-formed request, response, or notification document.
    """
    if isinstance(frame, (str, bytes)):
        try:
            doc = json.loads(frame)
        except json.JSONDecodeError as exc:
            raise RpcParseError(f"frame is not valid JSON: {exc}") from exc
    else:
        doc = frame
    if not isinstance(doc, dict):
        raise RpcParseError("frame must be a single JSON object")
    if doc.get("jsonrpc") != "2.0":
        raise RpcParseError("missing or unsupported jsonrpc version")

    has_id = "id" in doc
    has_method = "method" in doc
    rpc_id = doc.get("id")
    if has_id and not isinstance(rpc_id, (int, str)):
        raise RpcParseError("id must be a string or integer")

    if has_method:
        method = doc["method"]
        if not isinstance(method, str) or not method:
            raise RpcParseError("method must be a non-empty string")
        kind = RpcKind.REQUEST if has_id else RpcKind.NOTIFICATION
        return RpcEnvelope(
            kind=kind,
            session_id=session_id,
            received_at=received_at,
            id=rpc_id if has_id else None,
            method=method,
            payload=doc.get("params"),
        )

    # Response: exactly one of result/error, id mandatory.
    if not has_id:
        raise RpcParseError("document has neither method nor id")
    if ("result" in doc) == ("error" in doc):
        raise RpcParseError("response must carry exactly one of result/error")
    payload = {"result": doc["result"]} if "result" in doc else {"error": doc["error"]}
    return RpcEnvelope(
        kind=RpcKind.RESPONSE,
        session_id=session_id,
        received_at=received_at,
        id=rpc_id,
        payload=payload,
    )


def serialize_envelope(envelope: RpcEnvelope) -> dict:
    """Inverse of :func:`parse_envelope` (semantically equal JSON)."""
    doc: dict[str, Any] = {"jsonrpc": "2.0"}
    if envelope.kind is RpcKind.RESPONSE:
        doc["id"] = envelope.id
        doc.update(envelope.payload)
        return doc
    doc["method"] = envelope.method
    if envelope.id is not None:
        doc["id"] = envelope.id
    if envelope.payload is not None:
        doc["params"] = envelope.payload
    return doc


def envelope_to_json(envelope: RpcEnvelope) -> str:
    return json.dumps(serialize_envelope(envelope), separators=(",", ":"))


def cancellation_response(
    session_id: str, request_id: RequestId, at: int, message: str = "request superseded"
) -> RpcEnvelope:
    """JSON-RPC error response with the LSP RequestCancelled code (-32800)."""
    return RpcEnvelope(
        kind=RpcKind.RESPONSE,
        session_id=session_id,
        received_at=at,
        id=request_id,
        payload={"error": {"code": -32800, "message": message}},
    )


@dataclass(frozen=True)
class TrafficCounters:
    """Monotone per-session message counters at the gateway."""

    client_to_server_sent: int = 0
    server_to_client_sent: int = 0
    suppressed: int = 0
    coalesced: int = 0

    def total_dispatched(self) -> int:
        """Documents the gateway put on either link."""
        return self.client_to_server_sent + self.server_to_client_sent


# Mutable accumulator behind TrafficCounters snapshots.
@dataclass
class CounterCell:
    client_to_server_sent: int = 0
    server_to_client_sent: int = 0
    suppressed: int = 0
    coalesced: int = 0

    def snapshot(self) -> TrafficCounters:
        return TrafficCounters(
            client_to_server_sent=self.client_to_server_sent,
            server_to_client_sent=self.server_to_client_sent,
            suppressed=self.suppressed,
            coalesced=self.coalesced,
        )
