"""Debouncer state machine against the independent oracle and spec'd cases."""

from __future__ import annotations

import pytest

from ide_gateway.gateway.debounce import (
    DebounceClass,
    DebounceConfig,
    Debouncer,
    classify,
)
from ide_gateway.model import RpcEnvelope, RpcKind

from .debounce_oracle import OracleEvent, predict

URI = "file:///var/ide/sessions/s1/src/Main.java"


def did_change(at: int, text: str = "x", uri: str = URI) -> RpcEnvelope:
    return RpcEnvelope(
        kind=RpcKind.NOTIFICATION, session_id="s1", received_at=at,
        method="textDocument/didChange",
        payload={"textDocument": {"uri": uri, "version": at}, "contentChanges": [{"text": text}]},
    )


def did_save(at: int, uri: str = URI) -> RpcEnvelope:
    return RpcEnvelope(
        kind=RpcKind.NOTIFICATION, session_id="s1", received_at=at,
        method="textDocument/didSave", payload={"textDocument": {"uri": uri}},
    )


def request(at: int, method: str, request_id: int, uri: str = URI) -> RpcEnvelope:
    return RpcEnvelope(
        kind=RpcKind.REQUEST, session_id="s1", received_at=at, id=request_id,
        method=method, payload={"textDocument": {"uri": uri}, "position": {"line": 0, "character": 0}},
    )


class TestClassification:
    def test_file_change_methods(self):
        assert classify("textDocument/didChange") is DebounceClass.FILE_CHANGE
        assert classify("textDocument/didSave") is DebounceClass.FILE_CHANGE

    def test_interactive_methods(self):
        assert classify("textDocument/hover") is DebounceClass.INTERACTIVE
        assert classify("textDocument/completion") is DebounceClass.INTERACTIVE
        assert classify("textDocument/codeLens") is DebounceClass.INTERACTIVE

    def test_lifecycle_is_passthrough(self):
        for method in ("initialize", "shutdown", "textDocument/didOpen", "textDocument/didClose"):
            assert classify(method) is DebounceClass.PASSTHROUGH

    def test_unknown_is_passthrough(self):
        assert classify("workspace/symbol") is DebounceClass.PASSTHROUGH
        assert classify(None) is DebounceClass.PASSTHROUGH

    def test_default_delays(self):
        config = DebounceConfig()
        assert config.delay_for(DebounceClass.INTERACTIVE) == 1000
        assert config.delay_for(DebounceClass.FILE_CHANGE) == 2000
        assert config.delay_for(DebounceClass.PASSTHROUGH) == 0


class TestCoalescing:
    def test_twelve_keystrokes_coalesce_to_one(self):
        # Oracle prediction for 12 didChange at 150 ms cadence, 2 s delay:
        # one emission at 1650 + 2000 = 3650 carrying all changes in order.
        events = [OracleEvent(at=i * 150, method="textDocument/didChange", doc=URI) for i in range(12)]
        prediction = predict(events, 1000, 2000)
        assert prediction.emissions == ((3650, "textDocument/didChange", URI),)

        debouncer = Debouncer(DebounceConfig())
        for i in range(12):
            decision = debouncer.submit(did_change(i * 150, text=f"k{i}"), at=i * 150)
            assert decision.action == ("hold" if i == 0 else "coalesce")
        assert debouncer.flush_due(3649) == []
        flushed = debouncer.flush_due(3650)
        assert len(flushed) == 1
        (slot,) = flushed
        assert slot.due_at == 3650
        assert len(slot.emissions) == 1
        changes = slot.emissions[0].payload["contentChanges"]
        assert [change["text"] for change in changes] == [f"k{i}" for i in range(12)]

    def test_single_did_save_holds_once(self):
        debouncer = Debouncer(DebounceConfig())
        decision = debouncer.submit(did_save(100), at=100)
        assert decision.action == "hold"
        assert decision.due_at == 2100
        flushed = debouncer.flush_due(2100)
        assert len(flushed) == 1
        assert flushed[0].emissions[0].method == "textDocument/didSave"

    def test_method_change_starts_new_segment(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(did_change(0, "a"), 0)
        debouncer.submit(did_save(100), 100)
        debouncer.submit(did_change(200, "b"), 200)
        (slot,) = debouncer.flush_due(2200)
        assert [e.method for e in slot.emissions] == [
            "textDocument/didChange", "textDocument/didSave", "textDocument/didChange",
        ]

    def test_distinct_documents_do_not_suppress_each_other(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(did_change(0, uri="file:///a"), 0)
        debouncer.submit(did_change(100, uri="file:///b"), 100)
        flushed = debouncer.flush_due(2100)
        assert len(flushed) == 2


class TestSupersession:
    def test_second_hover_supersedes_first(self):
        # Oracle: one emission at 400 + 1000 = 1400, one cancellation.
        events = [
            OracleEvent(0, "textDocument/hover", URI),
            OracleEvent(400, "textDocument/hover", URI),
        ]
        prediction = predict(events, 1000, 2000)
        assert prediction.emissions == ((1400, "textDocument/hover", URI),)
        assert prediction.total_to_client == 1

        debouncer = Debouncer(DebounceConfig())
        first = debouncer.submit(request(0, "textDocument/hover", 1), 0)
        assert first.action == "hold"
        second = debouncer.submit(request(400, "textDocument/hover", 2), 400)
        assert second.action == "supersede"
        assert second.superseded_id == 1
        (slot,) = debouncer.flush_due(1400)
        assert slot.cancelled_ids == (1,)
        assert [e.id for e in slot.emissions] == [2]

    def test_cross_method_supersession_within_key(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(request(0, "textDocument/hover", 1), 0)
        decision = debouncer.submit(request(200, "textDocument/completion", 2), 200)
        assert decision.action == "supersede"
        assert decision.superseded_id == 1


class TestFlush:
    def test_no_due_slots(self):
        assert Debouncer(DebounceConfig()).flush_due(10_000) == []

    def test_boundary_is_inclusive(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(did_change(1650), 1650)
        assert debouncer.flush_due(3650) != []

    def test_earlier_due_flushes_first(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(did_change(1650), 1650)           # due 3650
        debouncer.submit(request(400, "textDocument/hover", 1), 400)  # due 1400
        flushed = debouncer.flush_due(4000)
        assert [slot.due_at for slot in flushed] == [1400, 3650]
        assert flushed[0].emissions[0].method == "textDocument/hover"

    def test_next_due(self):
        debouncer = Debouncer(DebounceConfig())
        assert debouncer.next_due() is None
        debouncer.submit(did_change(0), 0)
        assert debouncer.next_due() == 2000

    def test_drain_cancels_held_and_superseded_requests(self):
        debouncer = Debouncer(DebounceConfig())
        debouncer.submit(request(0, "textDocument/hover", 1), 0)
        debouncer.submit(request(100, "textDocument/hover", 2), 100)
        debouncer.submit(did_change(200), 200)
        drained = debouncer.drain()
        assert set(drained.cancelled_ids) == {1, 2}
        assert drained.dropped_notifications == 1
        assert debouncer.pending_count() == 0


class TestZeroDelay:
    def test_all_zero_is_passthrough(self):
        debouncer = Debouncer(DebounceConfig(interactive_ms=0, file_change_ms=0))
        assert debouncer.submit(did_change(0), 0).action == "emit"
        assert debouncer.submit(request(0, "textDocument/hover", 1), 0).action == "emit"
        assert debouncer.pending_count() == 0

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            DebounceConfig(interactive_ms=-1)
