"""Per-session bidirectional proxy between a client and its node.

Client traffic is URI-rewritten into the session's real root, debounced,
and forwarded; node traffic is reverse-rewritten and delivered, with
other sessions' URIs dropped on the floor. Every client request id gets
exactly one response: the real one, or a cancellation when the request
was superseded or the session tore down first.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from typing import Callable

from ..clock import Clock, MonotonicClock
from ..errors import ForeignUri, PathEscape, UnknownSession
from ..model import (
    CounterCell,
    RpcEnvelope,
    RpcKind,
    TrafficCounters,
    cancellation_response,
)
from .debounce import DebounceConfig, DebounceDecision, Debouncer
from .uris import Direction, rewrite_payload

logger = logging.getLogger(__name__)

Sink = Callable[[RpcEnvelope], None]

# Client-bound messages buffered while no client connection is attached.
_CLIENT_BUFFER_LIMIT = 1024


class SessionGateway:
    """Routing, rewriting, and throttling for one session.

    All operations for a session run under one lock (messages are handled
    serially in arrival order); distinct sessions proceed fully in
    parallel. The gateway never synthesizes LSP features, only
    cancellation responses.
    """

    def __init__(
        self,
        session_id: str,
        sessions_root: str,
        config: DebounceConfig | None = None,
        node_sink: Sink | None = None,
        client_sink: Sink | None = None,
    ):
        self.session_id = session_id
        self.sessions_root = sessions_root
        self._debouncer = Debouncer(config)
        self._node_sink = node_sink
        self._client_sink = client_sink
        self._client_buffer: deque[RpcEnvelope] = deque(maxlen=_CLIENT_BUFFER_LIMIT)
        self._counters = CounterCell()
        self._open_requests: set = set()
        self._lock = threading.RLock()
        self._closed = False

    # -- wiring ---------------------------------------------------------

    def attach_node(self, sink: Sink) -> None:
        with self._lock:
            self._node_sink = sink

    def attach_client(self, sink: Sink) -> None:
        """Attach (or replace) the client connection; buffered messages drain."""
        with self._lock:
            self._client_sink = sink
            while self._client_buffer:
                sink(self._client_buffer.popleft())

    def detach_client(self) -> None:
        with self._lock:
            self._client_sink = None

    # -- client -> node -------------------------------------------------

    def submit_client(self, envelope: RpcEnvelope, at: int) -> DebounceDecision:
        """Debounce and forward one client message (URIs rewritten here).

        A message whose URIs escape the workspace root is refused:
        requests are answered with a JSON-RPC invalid-params error,
        notifications are dropped.
        """
        with self._lock:
            if self._closed:
                raise UnknownSession(f"gateway closed: {self.session_id}")
            # Flush first: an arrival exactly at a due instant must not
            # join the flushing slot.
            self._flush_due_locked(at)
            try:
                rewritten = envelope.with_payload(
                    rewrite_payload(
                        self.sessions_root, self.session_id, envelope.payload,
                        Direction.CLIENT_TO_SERVER,
                    )
                )
            except PathEscape as exc:
                logger.warning("session %s: %s", self.session_id, exc)
                self._counters.suppressed += 1
                if envelope.kind is RpcKind.REQUEST:
                    self._deliver_client(
                        RpcEnvelope(
                            kind=RpcKind.RESPONSE,
                            session_id=self.session_id,
                            received_at=at,
                            id=envelope.id,
                            payload={"error": {"code": -32602, "message": str(exc)}},
                        )
                    )
                return DebounceDecision("emit")

            decision = self._debouncer.submit(rewritten, at)
            if decision.action == "emit":
                self._dispatch_to_node(rewritten)
            elif decision.action == "supersede":
                self._counters.suppressed += 1
            elif decision.action == "coalesce":
                self._counters.coalesced += 1
            return decision

    def flush_due(self, at: int) -> list[RpcEnvelope]:
        """Emit every held slot due by ``at``; returns the emitted envelopes."""
        with self._lock:
            return self._flush_due_locked(at)

    def next_due(self) -> int | None:
        with self._lock:
            return self._debouncer.next_due()

    def _flush_due_locked(self, at: int) -> list[RpcEnvelope]:
        emitted = []
        for flushed in self._debouncer.flush_due(at):
            for request_id in flushed.cancelled_ids:
                self._deliver_client(cancellation_response(self.session_id, request_id, at))
            for envelope in flushed.emissions:
                self._dispatch_to_node(envelope)
                emitted.append(envelope)
        return emitted

    def _dispatch_to_node(self, envelope: RpcEnvelope) -> None:
        if envelope.kind is RpcKind.REQUEST:
            if envelope.id in self._open_requests:
                # Client reused a live id; settle the old request first.
                self._deliver_client(
                    cancellation_response(self.session_id, envelope.id, envelope.received_at)
                )
            self._open_requests.add(envelope.id)
        self._counters.client_to_server_sent += 1
        if self._node_sink is not None:
            self._node_sink(envelope)

    # -- node -> client --------------------------------------------------

    def on_server_message(self, envelope: RpcEnvelope) -> bool:
        """Reverse-rewrite and deliver one node message.

        Returns False when the message was dropped: a response for a
        request already answered (superseded/cancelled), or a message
        carrying another session's URIs.
        """
        with self._lock:
            if envelope.kind is RpcKind.RESPONSE:
                if envelope.id not in self._open_requests:
                    logger.debug(
                        "session %s: dropping response for settled id %r",
                        self.session_id, envelope.id,
                    )
                    return False
                self._open_requests.discard(envelope.id)
            try:
                rewritten = envelope.with_payload(
                    rewrite_payload(
                        self.sessions_root, self.session_id, envelope.payload,
                        Direction.SERVER_TO_CLIENT,
                    )
                )
            except ForeignUri as exc:
                logger.warning("session %s: dropped cross-session message: %s", self.session_id, exc)
                return False
            self._deliver_client(rewritten)
            return True

    def _deliver_client(self, envelope: RpcEnvelope) -> None:
        self._counters.server_to_client_sent += 1
        if self._client_sink is not None:
            self._client_sink(envelope)
        else:
            self._client_buffer.append(envelope)

    # -- lifecycle --------------------------------------------------------

    def close(self, at: int) -> None:
        """Settle all pending traffic before teardown.

        Every unanswered request id (held, superseded, or in flight to
        the node) receives a cancellation response; held notifications
        are dropped.
        """
        with self._lock:
            if self._closed:
                return
            drained = self._debouncer.drain()
            self._counters.suppressed += drained.dropped_notifications
            for request_id in drained.cancelled_ids:
                self._counters.suppressed += 1
                self._deliver_client(cancellation_response(self.session_id, request_id, at))
            for request_id in sorted(self._open_requests, key=repr):
                self._deliver_client(
                    cancellation_response(self.session_id, request_id, at, "session closed")
                )
            self._open_requests.clear()
            self._closed = True

    @property
    def closed(self) -> bool:
        return self._closed

    def counters(self) -> TrafficCounters:
        with self._lock:
            return self._counters.snapshot()

    def open_request_ids(self) -> set:
        with self._lock:
            return set(self._open_requests)


class GatewayHub:
    """Owns one gateway per session and the shared flush scheduling."""

    def __init__(
        self,
        sessions_root: str,
        config: DebounceConfig | None = None,
        clock: Clock | None = None,
    ):
        self.sessions_root = sessions_root
        self.config = config or DebounceConfig()
        self.clock = clock or MonotonicClock()
        self._gateways: dict[str, SessionGateway] = {}
        self._lock = threading.Lock()

    def open_session(
        self,
        session_id: str,
        node_sink: Sink | None = None,
        client_sink: Sink | None = None,
    ) -> SessionGateway:
        with self._lock:
            if session_id in self._gateways:
                return self._gateways[session_id]
            gateway = SessionGateway(
                session_id,
                self.sessions_root,
                self.config,
                node_sink=node_sink,
                client_sink=client_sink,
            )
            self._gateways[session_id] = gateway
            return gateway

    def get(self, session_id: str) -> SessionGateway:
        with self._lock:
            gateway = self._gateways.get(session_id)
        if gateway is None:
            raise UnknownSession(f"no gateway for session: {session_id}")
        return gateway

    def close_session(self, session_id: str) -> None:
        """Drain and drop the session's gateway; idempotent."""
        with self._lock:
            gateway = self._gateways.pop(session_id, None)
        if gateway is not None:
            gateway.close(self.clock.now())

    def flush_all(self, at: int | None = None) -> None:
        at = self.clock.now() if at is None else at
        with self._lock:
            gateways = list(self._gateways.values())
        for gateway in gateways:
            gateway.flush_due(at)

    def next_due(self) -> int | None:
        with self._lock:
            gateways = list(self._gateways.values())
        dues = [due for gateway in gateways if (due := gateway.next_due()) is not None]
        return min(dues) if dues else None

    def session_ids(self) -> list[str]:
        with self._lock:
            return list(self._gateways)
