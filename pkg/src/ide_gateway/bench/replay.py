"""Deterministic trace replay measuring debounce traffic reduction.

The trace is replayed twice through a session gateway under a mock
clock: once with the configured delays and once with all delays zero.
The counting rule is fixed: a message is any JSON-RPC document the
gateway dispatches on either link, i.e. envelopes forwarded to the node
plus cancellation responses synthesized for the client. The node side is
a silent sink in both runs, so node-originated replies never skew the
comparison; inbound client documents are the workload, not the
measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..clock import ManualClock
from ..gateway import DebounceConfig, SessionGateway
from ..model import RpcEnvelope, RpcKind, TrafficCounters
from .traces import EventTrace, TraceEvent, is_request_method

_BENCH_SESSION = "bench-session"
_SESSIONS_ROOT = "/var/ide/sessions"


@dataclass(frozen=True)
class MethodBreakdown:
    without_sent: int = 0
    with_sent: int = 0
    with_cancelled: int = 0


@dataclass(frozen=True)
class TrafficReport:
    """Message totals with and without debouncing for one trace."""

    scenario: str
    total_without: int
    total_with: int
    reduction_pct: float
    per_method: dict[str, MethodBreakdown] = field(default_factory=dict)
    counters_with: TrafficCounters = TrafficCounters()
    counters_without: TrafficCounters = TrafficCounters()

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "totalWithout": self.total_without,
            "totalWith": self.total_with,
            "reductionPct": self.reduction_pct,
            "perMethod": {
                method: {
                    "without": item.without_sent,
                    "with": item.with_sent,
                    "cancelled": item.with_cancelled,
                }
                for method, item in sorted(self.per_method.items())
            },
            "countersWith": _counters_dict(self.counters_with),
            "countersWithout": _counters_dict(self.counters_without),
        }


def _counters_dict(counters: TrafficCounters) -> dict:
    return {
        "clientToServerSent": counters.client_to_server_sent,
        "serverToClientSent": counters.server_to_client_sent,
        "suppressed": counters.suppressed,
        "coalesced": counters.coalesced,
    }


def synthesize_envelope(event: TraceEvent, request_id: int | None, at: int) -> RpcEnvelope:
    """Build a plausible LSP payload for one trace event."""
    uri = f"file:///workspace/{event.doc}"
    method = event.method
    if method == "textDocument/didChange":
        payload = {
            "textDocument": {"uri": uri, "version": at},
            "contentChanges": [{"text": f"edit@{at}"}],
        }
    elif method == "textDocument/didOpen":
        payload = {
            "textDocument": {"uri": uri, "languageId": "java", "version": 1, "text": ""},
        }
    elif method in ("textDocument/didSave", "textDocument/codeLens", "textDocument/documentSymbol"):
        payload = {"textDocument": {"uri": uri}}
    elif method == "initialize":
        payload = {"rootUri": "file:///workspace", "capabilities": {}}
    elif method == "shutdown":
        payload = None
    else:
        payload = {"textDocument": {"uri": uri}, "position": {"line": 0, "character": at % 80}}
    if is_request_method(method):
        return RpcEnvelope(
            kind=RpcKind.REQUEST, session_id=_BENCH_SESSION, received_at=at,
            id=request_id, method=method, payload=payload,
        )
    return RpcEnvelope(
        kind=RpcKind.NOTIFICATION, session_id=_BENCH_SESSION, received_at=at,
        method=method, payload=payload,
    )


@dataclass
class _RunOutcome:
    counters: TrafficCounters
    sent_by_method: dict[str, int]
    cancelled_by_method: dict[str, int]

    @property
    def total(self) -> int:
        return self.counters.total_dispatched()


def run_once(trace: EventTrace, config: DebounceConfig) -> _RunOutcome:
    """Replay one trace through a gateway wired to a sink node."""
    clock = ManualClock()
    node_log: list[RpcEnvelope] = []
    client_log: list[RpcEnvelope] = []
    gateway = SessionGateway(
        _BENCH_SESSION,
        _SESSIONS_ROOT,
        config,
        node_sink=node_log.append,
        client_sink=client_log.append,
    )

    id_to_method: dict[int, str] = {}
    next_id = 0
    index = 0
    events = trace.events
    while True:
        next_event_at = events[index].offset_ms if index < len(events) else None
        next_due = gateway.next_due()
        if next_event_at is None and next_due is None:
            break
        if next_event_at is None:
            at = next_due
        elif next_due is None:
            at = next_event_at
        else:
            at = min(next_event_at, next_due)
        clock.advance_to(at)
        # Due slots flush before arrivals at the same instant.
        gateway.flush_due(at)
        while index < len(events) and events[index].offset_ms == at:
            event = events[index]
            request_id = None
            if is_request_method(event.method):
                next_id += 1
                request_id = next_id
                id_to_method[request_id] = event.method
            gateway.submit_client(synthesize_envelope(event, request_id, at), at)
            index += 1

    sent_by_method: dict[str, int] = {}
    for envelope in node_log:
        sent_by_method[envelope.method] = sent_by_method.get(envelope.method, 0) + 1
    cancelled_by_method: dict[str, int] = {}
    for envelope in client_log:
        method = id_to_method.get(envelope.id, "?")
        cancelled_by_method[method] = cancelled_by_method.get(method, 0) + 1

    counters = gateway.counters()
    assert counters.total_dispatched() == len(node_log) + len(client_log)
    return _RunOutcome(
        counters=counters,
        sent_by_method=sent_by_method,
        cancelled_by_method=cancelled_by_method,
    )


def replay_trace(trace: EventTrace, config: DebounceConfig | None = None) -> TrafficReport:
    """Replay with the configured delays and with delays zero; compare.

    Fully deterministic: both runs use a mock clock and a silent node
    sink, and both use the identical counting rule.
    """
    config = config or DebounceConfig()
    with_run = run_once(trace, config)
    without_run = run_once(trace, DebounceConfig(interactive_ms=0, file_change_ms=0))

    total_with = with_run.total
    total_without = without_run.total
    reduction = 100.0 * (1.0 - total_with / total_without) if total_without > 0 else 0.0

    methods = set(with_run.sent_by_method) | set(without_run.sent_by_method) | set(with_run.cancelled_by_method)
    per_method = {
        method: MethodBreakdown(
            without_sent=without_run.sent_by_method.get(method, 0),
            with_sent=with_run.sent_by_method.get(method, 0),
            with_cancelled=with_run.cancelled_by_method.get(method, 0),
        )
        for method in methods
    }
    return TrafficReport(
        scenario=trace.name,
        total_without=total_without,
        total_with=total_with,
        reduction_pct=reduction,
        per_method=per_method,
        counters_with=with_run.counters,
        counters_without=without_run.counters,
    )
