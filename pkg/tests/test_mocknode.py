"""Mock node: echo contract, resource model, scripted diagnostics."""

from __future__ import annotations

import pytest

from ide_gateway.errors import UnknownSession
from ide_gateway.mocknode import (
    MiB,
    MockBehavior,
    MockLspNode,
    apply_content_change,
    apply_content_changes,
)
from ide_gateway.model import RpcEnvelope, RpcKind, ServerMetrics


def request(method: str, request_id: int, payload=None, sid: str = "s1") -> RpcEnvelope:
    return RpcEnvelope(kind=RpcKind.REQUEST, session_id=sid, received_at=0,
                       id=request_id, method=method, payload=payload)


def notification(method: str, payload, sid: str = "s1") -> RpcEnvelope:
    return RpcEnvelope(kind=RpcKind.NOTIFICATION, session_id=sid, received_at=0,
                       method=method, payload=payload)


def did_open(uri: str, text: str, sid: str = "s1") -> RpcEnvelope:
    return notification(
        "textDocument/didOpen",
        {"textDocument": {"uri": uri, "languageId": "java", "version": 1, "text": text}},
        sid=sid,
    )


class TestDocumentEdits:
    def test_full_replacement(self):
        assert apply_content_change("old", {"text": "new"}) == "new"

    def test_insert(self):
        change = {
            "range": {"start": {"line": 0, "character": 2}, "end": {"line": 0, "character": 2}},
            "text": "XY",
        }
        assert apply_content_change("abcd", change) == "abXYcd"

    def test_delete_across_lines(self):
        change = {
            "range": {"start": {"line": 0, "character": 1}, "end": {"line": 1, "character": 1}},
            "text": "",
        }
        assert apply_content_change("ab\ncd", change) == "ad"

    def test_changes_apply_in_order(self):
        changes = [
            {"text": "hello"},
            {"range": {"start": {"line": 0, "character": 5}, "end": {"line": 0, "character": 5}},
             "text": " world"},
        ]
        assert apply_content_changes("", changes) == "hello world"

    def test_positions_clamp(self):
        change = {
            "range": {"start": {"line": 99, "character": 99}, "end": {"line": 99, "character": 99}},
            "text": "!",
        }
        assert apply_content_change("ab", change) == "ab!"


class TestProtocol:
    def _bound(self, sid: str = "s1"):
        node = MockLspNode()
        received: list[RpcEnvelope] = []
        node.bind_session(sid, received.append)
        return node, received

    def test_hover_echoes_request_id(self):
        node, received = self._bound()
        node.handle(request("textDocument/hover", 42))
        assert len(received) == 1
        assert received[0].kind is RpcKind.RESPONSE
        assert received[0].id == 42
        assert "result" in received[0].payload

    def test_every_request_gets_exactly_one_response(self):
        node, received = self._bound()
        for i, method in enumerate(
            ["initialize", "textDocument/completion", "textDocument/codeLens", "shutdown", "nope/nope"]
        ):
            node.handle(request(method, i))
        assert [e.id for e in received] == [0, 1, 2, 3, 4]
        assert received[-1].payload["error"]["code"] == -32601

    def test_unbound_session_rejected(self):
        node = MockLspNode()
        with pytest.raises(UnknownSession):
            node.handle(request("textDocument/hover", 1))

    def test_did_change_updates_document(self):
        node, _ = self._bound()
        node.handle(did_open("file:///x", "abc"))
        node.handle(notification(
            "textDocument/didChange",
            {"textDocument": {"uri": "file:///x", "version": 2},
             "contentChanges": [{"text": "xyz"}]},
        ))
        assert node.document_text("s1", "file:///x") == "xyz"


class TestScriptedDiagnostics:
    def test_no_marker_no_diagnostics(self):
        node, received = self._bound_with_doc("clean code\nno errors here\n")
        publishes = [e for e in received if e.method == "textDocument/publishDiagnostics"]
        assert publishes[-1].payload["diagnostics"] == []

    def test_marker_line_reported(self):
        text = "a\nb\nc\nd\nint x = SYNTAX_ERR;\n"
        node, received = self._bound_with_doc(text)
        publishes = [e for e in received if e.method == "textDocument/publishDiagnostics"]
        diagnostics = publishes[-1].payload["diagnostics"]
        assert len(diagnostics) == 1
        assert diagnostics[0]["range"]["start"]["line"] == 4

    def test_isolation_between_sessions(self):
        node = MockLspNode()
        a_log: list[RpcEnvelope] = []
        b_log: list[RpcEnvelope] = []
        node.bind_session("a", a_log.append)
        node.bind_session("b", b_log.append)
        node.handle(did_open("file:///x", "SYNTAX_ERR", sid="a"))
        node.handle(did_open("file:///x", "fine", sid="b"))
        a_diag = [e for e in a_log if e.method == "textDocument/publishDiagnostics"]
        b_diag = [e for e in b_log if e.method == "textDocument/publishDiagnostics"]
        assert len(a_diag[-1].payload["diagnostics"]) == 1
        assert b_diag[-1].payload["diagnostics"] == []
        assert all(e.session_id == "a" for e in a_log)
        assert all(e.session_id == "b" for e in b_log)

    def _bound_with_doc(self, text: str):
        node = MockLspNode()
        received: list[RpcEnvelope] = []
        node.bind_session("s1", received.append)
        node.handle(did_open("file:///doc", text))
        return node, received


class TestResourceModel:
    def test_zero_sessions(self):
        node = MockLspNode()
        assert node.metrics().active_sessions == 0

    def test_free_memory_tracks_bindings(self):
        behavior = MockBehavior(per_session_memory_cost=1 * MiB)
        node = MockLspNode(behavior=behavior)
        baseline = node.metrics().free_memory
        for i in range(3):
            node.bind_session(f"s{i}", lambda e: None)
        metrics = node.metrics()
        assert metrics.active_sessions == 3
        assert baseline - metrics.free_memory == 3 * MiB

    def test_metrics_valid_up_to_capacity(self):
        node = MockLspNode()
        for i in range(50):
            node.bind_session(f"s{i}", lambda e: None)
            assert isinstance(node.metrics(), ServerMetrics)

    def test_unbind_releases(self):
        node = MockLspNode()
        node.bind_session("s1", lambda e: None)
        node.unbind_session("s1")
        assert node.metrics().active_sessions == 0

    def test_latency_defers_responses_until_pumped(self):
        node = MockLspNode(behavior=MockBehavior(response_latency_ms=100))
        received: list[RpcEnvelope] = []
        node.bind_session("s1", received.append)
        node.handle(request("textDocument/hover", 1))
        assert received == []
        assert node.pump(at=99) == 0
        assert node.pump(at=100) == 1
        assert received[0].id == 1
