"""Deterministic stand-in for a language-server node.

Real Java/Python/C language servers are heavyweight external processes;
this node speaks just enough of the protocol for the gateway to proxy
(initialize, document sync, hover, completion, code lenses, published
diagnostics) and reports truthful synthetic metrics, which makes tests
and benchmarks reproducible at desk scale.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import UnknownSession
from .model import RpcEnvelope, RpcKind, ServerMetrics

logger = logging.getLogger(__name__)

# Any line containing this marker yields one scripted diagnostic.
SYNTAX_ERROR_MARKER = "SYNTAX_ERR"

MiB = 1024 * 1024


def _offset_at(text: str, line: int, character: int) -> int:
    """Codepoint offset of an LSP line/character position.

    Positions are clamped to the document, matching lenient server
    behavior. Characters count codepoints, not UTF-16 units; the mock
    does not claim encoding fidelity.
    """
    lines = text.split("\n")
    line = max(0, min(line, len(lines) - 1))
    character = max(0, min(character, len(lines[line])))
    return sum(len(l) + 1 for l in lines[:line]) + character


def apply_content_change(text: str, change: dict) -> str:
    """Apply one didChange content change (full or incremental)."""
    if "range" not in change:
        return change.get("text", "")
    start = change["range"]["start"]
    end = change["range"]["end"]
    begin = _offset_at(text, start["line"], start["character"])
    finish = _offset_at(text, end["line"], end["character"])
    if finish < begin:
        begin, finish = finish, begin
    return text[:begin] + change.get("text", "") + text[finish:]


def apply_content_changes(text: str, changes: list[dict]) -> str:
    """Apply a didChange content-change list in order."""
    for change in changes:
        text = apply_content_change(text, change)
    return text


@dataclass(frozen=True)
class MockBehavior:
    """Synthetic resource model and response shaping for the mock node.

    ``per_session_memory_cost`` drives the reported free-memory drop per
    bound session; with ``allocate_real_memory`` the node also holds an
    actual buffer of that size per session so resident-memory sampling
    sees it.
    """

    per_session_memory_cost: int = 1 * MiB
    response_latency_ms: int = 0
    total_memory: int = 4096 * MiB
    base_memory: int = 256 * MiB
    avg_load: float = 0.0
    cpu_usage: float = 0.0
    allocate_real_memory: bool = False
    seed: int = 0


@dataclass
class _SessionBinding:
    sink: Callable[[RpcEnvelope], None]
    documents: dict[str, str] = field(default_factory=dict)
    ballast: bytearray | None = None


class MockLspNode:
    """In-process node serving multiple session workspaces.

    Every response echoes the triggering request's id, and diagnostics
    for one session's documents go only to that session's sink.
    """

    def __init__(self, behavior: MockBehavior | None = None, node_id: str = "mock-node"):
        self.behavior = behavior or MockBehavior()
        self.node_id = node_id
        self._bindings: dict[str, _SessionBinding] = {}
        self._outbox: list[tuple[int, RpcEnvelope]] = []
        self._lock = threading.RLock()

    # -- session binding --------------------------------------------------

    def bind_session(self, session_id: str, sink: Callable[[RpcEnvelope], None]) -> None:
        with self._lock:
            binding = _SessionBinding(sink=sink)
            if self.behavior.allocate_real_memory:
                binding.ballast = bytearray(self.behavior.per_session_memory_cost)
            self._bindings[session_id] = binding

    def unbind_session(self, session_id: str) -> None:
        with self._lock:
            self._bindings.pop(session_id, None)

    def bound_sessions(self) -> list[str]:
        with self._lock:
            return list(self._bindings)

    # -- metrics -----------------------------------------------------------

    def metrics(self) -> ServerMetrics:
        """Truthful session count; memory follows the synthetic model."""
        with self._lock:
            count = len(self._bindings)
        used = self.behavior.base_memory + count * self.behavior.per_session_memory_cost
        free = max(0, self.behavior.total_memory - used)
        return ServerMetrics(
            avg_load=self.behavior.avg_load,
            cpu_usage=self.behavior.cpu_usage,
            total_memory=self.behavior.total_memory,
            free_memory=free,
            active_sessions=count,
        )

    # -- protocol ----------------------------------------------------------

    def handle(self, envelope: RpcEnvelope) -> None:
        """Process one envelope addressed to a bound session."""
        with self._lock:
            binding = self._bindings.get(envelope.session_id)
            if binding is None:
                raise UnknownSession(f"session not bound to node: {envelope.session_id}")
            if envelope.kind is RpcKind.REQUEST:
                self._answer(binding, envelope)
            elif envelope.kind is RpcKind.NOTIFICATION:
                self._apply_notification(binding, envelope)
            # Responses from the client (to server-initiated requests) are
            # accepted and ignored; the mock never initiates requests.

    send = handle  # node-link interface used by the gateway

    def _answer(self, binding: _SessionBinding, envelope: RpcEnvelope) -> None:
        method = envelope.method
        if method == "initialize":
            result: Any = {
                "capabilities": {
                    "textDocumentSync": 2,
                    "hoverProvider": True,
                    "completionProvider": {"triggerCharacters": ["."]},
                    "codeLensProvider": {"resolveProvider": False},
                },
                "serverInfo": {"name": "mock-lsp-node"},
            }
        elif method == "shutdown":
            result = None
        elif method == "textDocument/hover":
            result = {"contents": {"kind": "plaintext", "value": "mock hover"}}
        elif method == "textDocument/completion":
            result = {
                "isIncomplete": False,
                "items": [
                    {"label": "print", "kind": 3},
                    {"label": "println", "kind": 3},
                    {"label": "printf", "kind": 3},
                ],
            }
        elif method == "textDocument/codeLens":
            result = []
        else:
            self._emit(
                binding,
                RpcEnvelope(
                    kind=RpcKind.RESPONSE,
                    session_id=envelope.session_id,
                    received_at=envelope.received_at,
                    id=envelope.id,
                    payload={"error": {"code": -32601, "message": f"method not found: {method}"}},
                ),
            )
            return
        self._emit(
            binding,
            RpcEnvelope(
                kind=RpcKind.RESPONSE,
                session_id=envelope.session_id,
                received_at=envelope.received_at,
                id=envelope.id,
                payload={"result": result},
            ),
        )

    def _apply_notification(self, binding: _SessionBinding, envelope: RpcEnvelope) -> None:
        payload = envelope.payload or {}
        method = envelope.method
        if method == "textDocument/didOpen":
            doc = payload.get("textDocument", {})
            uri = doc.get("uri")
            if uri:
                binding.documents[uri] = doc.get("text", "")
                self._publish_diagnostics(binding, envelope.session_id, uri, envelope.received_at)
        elif method == "textDocument/didChange":
            uri = (payload.get("textDocument") or {}).get("uri")
            if uri is not None and uri in binding.documents:
                binding.documents[uri] = apply_content_changes(
                    binding.documents[uri], payload.get("contentChanges", [])
                )
                self._publish_diagnostics(binding, envelope.session_id, uri, envelope.received_at)
        elif method == "textDocument/didSave":
            uri = (payload.get("textDocument") or {}).get("uri")
            if uri is not None and uri in binding.documents:
                self._publish_diagnostics(binding, envelope.session_id, uri, envelope.received_at)
        elif method == "textDocument/didClose":
            uri = (payload.get("textDocument") or {}).get("uri")
            binding.documents.pop(uri, None)

    def _publish_diagnostics(self, binding: _SessionBinding, session_id: str, uri: str, at: int) -> None:
        diagnostics = self.scripted_diagnostics(binding.documents.get(uri, ""))
        self._emit(
            binding,
            RpcEnvelope(
                kind=RpcKind.NOTIFICATION,
                session_id=session_id,
                received_at=at,
                method="textDocument/publishDiagnostics",
                payload={"uri": uri, "diagnostics": diagnostics},
            ),
        )

    @staticmethod
    def scripted_diagnostics(text: str) -> list[dict]:
        """One error diagnostic per line containing the marker token."""
        diagnostics = []
        for i, line in enumerate(text.split("\n")):
            if SYNTAX_ERROR_MARKER in line:
                diagnostics.append(
                    {
                        "range": {
                            "start": {"line": i, "character": 0},
                            "end": {"line": i, "character": len(line)},
                        },
                        "severity": 1,
                        "source": "mock-lsp-node",
                        "message": "syntax error marker",
                    }
                )
        return diagnostics

    def _emit(self, binding: _SessionBinding, envelope: RpcEnvelope) -> None:
        if self.behavior.response_latency_ms > 0:
            self._outbox.append((envelope.received_at + self.behavior.response_latency_ms, envelope))
        else:
            binding.sink(envelope)

    def pump(self, at: int) -> int:
        """Deliver deferred responses due by ``at`` (latency simulation)."""
        with self._lock:
            due = [(t, e) for t, e in self._outbox if t <= at]
            self._outbox = [(t, e) for t, e in self._outbox if t > at]
            for _, envelope in sorted(due, key=lambda pair: pair[0]):
                binding = self._bindings.get(envelope.session_id)
                if binding is not None:
                    binding.sink(envelope)
            return len(due)

    def document_text(self, session_id: str, uri: str) -> str | None:
        with self._lock:
            binding = self._bindings.get(session_id)
            return None if binding is None else binding.documents.get(uri)
