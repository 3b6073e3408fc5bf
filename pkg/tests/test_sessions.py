"""Session registry: provisioning, activity, sweep, reopen, conservation."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ide_gateway.clock import ManualClock
from ide_gateway.errors import InvalidState, NoNodeAvailable, UnknownSession, VcsError
from ide_gateway.mocknode import MockBehavior
from ide_gateway.model import ActivityKind, LanguageId, SessionState
from ide_gateway.pool import NodePool
from ide_gateway.sessions import CleanupPolicy, SessionRegistry
from ide_gateway.vcs import RepoRef, WorkspaceState

from .conftest import Stack
from .test_vcs import tree_of

MINUTE_MS = 60_000


class FakeVcs:
    """In-memory provisioner for fast invariant tests (no git)."""

    def __init__(self, fail_persist: bool = False):
        self.fail_persist = fail_persist
        self.persisted: list[str] = []

    def provision_workspace(self, session_id, repo, target_dir) -> WorkspaceState:
        Path(target_dir).mkdir(parents=True, exist_ok=False)
        (Path(target_dir) / "file.txt").write_text("content")
        return WorkspaceState(session_id=session_id, head_commit="c0", dirty=False, path=str(target_dir))

    def persist_workspace(self, state, message=None):
        if self.fail_persist:
            raise VcsError("remote rejected")
        self.persisted.append(state.session_id)
        return "c1"


def fake_registry(tmp_path, clock, languages=None, nodes=1, fail_persist=False):
    pool = NodePool()
    from ide_gateway.model import ServerMetrics

    for i in range(nodes):
        node_id = f"n{i}"
        pool.register_node(f"tcp://{node_id}", languages or set(LanguageId), node_id=node_id)
        pool.report_metrics(node_id, ServerMetrics(0, 0, 1000, 1000, 0), at=0)
    vcs = FakeVcs(fail_persist=fail_persist)
    registry = SessionRegistry(pool, vcs, tmp_path / "sessions", clock=clock)
    return registry, pool, vcs


REPO = RepoRef(url="fake://exercise", branch="main", exercise_id="ex1")


class TestCreate:
    def test_first_session_takes_only_node(self, tmp_path, clock):
        registry, pool, _ = fake_registry(tmp_path, clock)
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        assert descriptor.state is SessionState.ACTIVE
        assert descriptor.node_id == "n0"
        assert pool.get("n0").active_sessions == 1
        assert Path(descriptor.workspace_path).is_dir()

    def test_least_loaded_node_chosen(self, tmp_path, clock):
        registry, pool, _ = fake_registry(tmp_path, clock, nodes=2)
        pool.get("n0").active_sessions = 5
        pool.get("n1").active_sessions = 2
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        assert descriptor.node_id == "n1"

    def test_no_node_for_language(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock, languages={LanguageId.JAVA})
        with pytest.raises(NoNodeAvailable):
            registry.create_session("alice", "ex1", LanguageId.C, REPO)

    def test_failed_clone_releases_node(self, tmp_path, clock):
        registry, pool, vcs = fake_registry(tmp_path, clock)

        def boom(session_id, repo, target_dir):
            raise VcsError("clone failed")

        vcs.provision_workspace = boom
        with pytest.raises(VcsError):
            registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        assert pool.get("n0").active_sessions == 0
        assert registry.sessions() == []


class TestActivity:
    def test_activity_advances(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock)
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        updated = registry.record_activity(descriptor.session_id, ActivityKind.LSP_MESSAGE, 2000)
        assert updated.last_activity == 2000

    def test_out_of_order_activity_keeps_max(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock)
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        registry.record_activity(descriptor.session_id, ActivityKind.LSP_MESSAGE, 2000)
        updated = registry.record_activity(descriptor.session_id, ActivityKind.TERMINAL_INPUT, 1500)
        assert updated.last_activity == 2000

    def test_unknown_session(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock)
        with pytest.raises(UnknownSession):
            registry.record_activity("nope", ActivityKind.LSP_MESSAGE, 0)


class TestSweep:
    def _one_session(self, tmp_path, clock, **kwargs):
        registry, pool, vcs = fake_registry(tmp_path, clock, **kwargs)
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        return registry, pool, vcs, descriptor

    def test_idle_61_minutes_removed(self, tmp_path, clock):
        registry, pool, vcs, descriptor = self._one_session(tmp_path, clock)
        clock.advance(61 * MINUTE_MS)
        report = registry.sweep_inactive()
        assert report.removed == (descriptor.session_id,)
        assert not Path(descriptor.workspace_path).exists()
        assert pool.get("n0").active_sessions == 0
        assert vcs.persisted == [descriptor.session_id]
        assert registry.get(descriptor.session_id).state is SessionState.CLOSED

    def test_idle_59_minutes_retained(self, tmp_path, clock):
        registry, _, _, descriptor = self._one_session(tmp_path, clock)
        clock.advance(59 * MINUTE_MS)
        report = registry.sweep_inactive()
        assert report.removed == ()
        assert report.retained == 1
        assert Path(descriptor.workspace_path).exists()

    def test_exactly_at_threshold_retained(self, tmp_path, clock):
        registry, _, _, _ = self._one_session(tmp_path, clock)
        clock.advance(60 * MINUTE_MS)
        assert registry.sweep_inactive().removed == ()

    def test_empty_registry(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock)
        report = registry.sweep_inactive()
        assert report.removed == () and report.retained == 0

    def test_idempotent_at_same_timestamp(self, tmp_path, clock):
        registry, _, _, _ = self._one_session(tmp_path, clock)
        clock.advance(61 * MINUTE_MS)
        first = registry.sweep_inactive()
        second = registry.sweep_inactive()
        assert len(first.removed) == 1
        assert second.removed == ()

    def test_persist_failure_logged_deletion_proceeds(self, tmp_path, clock):
        registry, _, _, descriptor = self._one_session(tmp_path, clock, fail_persist=True)
        clock.advance(61 * MINUTE_MS)
        report = registry.sweep_inactive()
        assert report.removed == (descriptor.session_id,)
        assert report.persist_failures[0][0] == descriptor.session_id
        assert not Path(descriptor.workspace_path).exists()

    def test_custom_policy_override(self, tmp_path, clock):
        registry, _, _, _ = self._one_session(tmp_path, clock)
        clock.advance(6 * MINUTE_MS)
        policy = CleanupPolicy(sweep_interval_s=60, idle_threshold_s=300)
        assert len(registry.sweep_inactive(policy=policy).removed) == 1

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            CleanupPolicy(sweep_interval_s=0)
        with pytest.raises(ValueError):
            CleanupPolicy(sweep_interval_s=600, idle_threshold_s=300)


class TestClose:
    def test_close_reaps_sandbox_and_marks_closed(self, stack, exercise_repo):
        descriptor = stack.create_session(exercise_repo)
        stack.sandboxes.open_terminal(descriptor.session_id, descriptor.workspace_path)
        assert stack.sandboxes.live_count() == 1
        report = stack.registry.close_session(descriptor.session_id)
        assert report.removed == (descriptor.session_id,)
        assert stack.sandboxes.live_count() == 0
        assert stack.registry.get(descriptor.session_id).state is SessionState.CLOSED

    def test_double_close_is_unknown_session(self, tmp_path, clock):
        registry, _, _ = fake_registry(tmp_path, clock)
        descriptor = registry.create_session("alice", "ex1", LanguageId.PYTHON, REPO)
        registry.close_session(descriptor.session_id)
        with pytest.raises(UnknownSession):
            registry.close_session(descriptor.session_id)

    def test_close_answers_in_flight_request(self, tmp_path, clock, exercise_repo):
        # Node latency keeps the request un-answered until after close.
        stack = Stack(tmp_path, clock, behavior=MockBehavior(response_latency_ms=60_000))
        stack.add_node("slow-node")
        descriptor = stack.create_session(exercise_repo)
        gateway = stack.hub.get(descriptor.session_id)
        received = []
        gateway.attach_client(received.append)
        from .test_gateway_proxy import request

        gateway.submit_client(request("initialize", 77, {}, sid=descriptor.session_id), 0)
        assert received == []  # response still queued inside the node
        stack.registry.close_session(descriptor.session_id)
        responses = [e for e in received if e.id == 77]
        assert len(responses) == 1
        assert responses[0].payload["error"]["code"] == -32800


class TestReopen:
    def _two_node_stack(self, tmp_path, clock) -> Stack:
        stack = Stack(tmp_path, clock)
        stack.add_node("node-a")
        stack.add_node("node-b")
        return stack

    def test_reopen_lands_on_other_node_with_persisted_tree(self, tmp_path, clock, exercise_repo):
        stack = self._two_node_stack(tmp_path, clock)
        descriptor = stack.create_session(exercise_repo)
        first_node = descriptor.node_id
        workspace = Path(descriptor.workspace_path)
        (workspace / "src" / "Main.java").write_text("public class Main { int x; }\n")
        (workspace / "notes.txt").write_text("student notes\n")
        expected = tree_of(workspace)
        stack.registry.close_session(descriptor.session_id)

        stack.pool.set_healthy(first_node, False)  # drain the original node
        reopened = stack.registry.reopen_session(descriptor.session_id)
        assert reopened.node_id != first_node
        assert reopened.state is SessionState.ACTIVE
        assert tree_of(Path(reopened.workspace_path)) == expected

    def test_reopen_active_healthy_session_rejected(self, stack, exercise_repo):
        descriptor = stack.create_session(exercise_repo)
        with pytest.raises(InvalidState):
            stack.registry.reopen_session(descriptor.session_id)

    def test_reopen_after_repo_deleted(self, tmp_path, clock, exercise_repo):
        import shutil

        stack = self._two_node_stack(tmp_path, clock)
        descriptor = stack.create_session(exercise_repo)
        stack.registry.close_session(descriptor.session_id)
        shutil.rmtree(exercise_repo.url)
        with pytest.raises(VcsError):
            stack.registry.reopen_session(descriptor.session_id)

    def test_reopen_unknown_session(self, stack):
        with pytest.raises(UnknownSession):
            stack.registry.reopen_session("missing")

    def test_reopen_active_session_on_unhealthy_node(self, tmp_path, clock, exercise_repo):
        stack = self._two_node_stack(tmp_path, clock)
        descriptor = stack.create_session(exercise_repo)
        stack.pool.set_healthy(descriptor.node_id, False)
        reopened = stack.registry.reopen_session(descriptor.session_id)
        assert reopened.node_id != descriptor.node_id
        assert stack.pool.total_active_sessions() == 1


@given(
    ops=st.lists(
        st.tuples(st.sampled_from(["create", "close", "sweep", "wait"]), st.integers(0, 3)),
        min_size=1,
        max_size=30,
    )
)
@settings(max_examples=50, deadline=None)
def test_counter_conservation(tmp_path_factory, ops):
    """Sum of node session counters equals the count of active sessions."""
    tmp_path = tmp_path_factory.mktemp("conservation")
    clock = ManualClock()
    registry, pool, _ = fake_registry(tmp_path, clock, nodes=3)
    live: list[str] = []
    for op, arg in ops:
        if op == "create":
            descriptor = registry.create_session(f"u{arg}", "ex", LanguageId.PYTHON, REPO)
            live.append(descriptor.session_id)
        elif op == "close" and live:
            registry.close_session(live.pop(arg % len(live)))
        elif op == "sweep":
            removed = registry.sweep_inactive()
            live = [sid for sid in live if sid not in removed.removed]
        elif op == "wait":
            clock.advance(arg * 25 * MINUTE_MS)
        assert pool.total_active_sessions() == registry.active_count()


@given(
    activity_offsets=st.lists(st.integers(0, 180 * MINUTE_MS), min_size=1, max_size=8),
    sweep_offset=st.integers(0, 300 * MINUTE_MS),
)
@settings(max_examples=80, deadline=None)
def test_sweep_safety_and_liveness(tmp_path_factory, activity_offsets, sweep_offset):
    """Never removes recently active sessions; always removes long-idle ones."""
    tmp_path = tmp_path_factory.mktemp("sweep")
    clock = ManualClock()
    registry, _, _ = fake_registry(tmp_path, clock)
    descriptor = registry.create_session("alice", "ex", LanguageId.PYTHON, REPO)
    last = 0
    for offset in sorted(activity_offsets):
        registry.record_activity(descriptor.session_id, ActivityKind.FILE_MODIFICATION, offset)
        last = max(last, offset)
    clock.advance_to(max(sweep_offset, 0))
    report = registry.sweep_inactive()
    threshold = registry.policy.idle_threshold_ms
    idle_for = clock.now() - last
    if idle_for > threshold:
        assert descriptor.session_id in report.removed
    else:
        assert descriptor.session_id not in report.removed
