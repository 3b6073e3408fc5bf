"""Session registry: provisioning, activity tracking, cleanup, migration.

Creating a session clones the exercise repository into a session-unique
workspace on the least-loaded node. A periodic sweep closes sessions
with no LSP, file, or terminal activity beyond the idle threshold,
persisting their work before deleting the workspace. Closed sessions can
reopen on a different node; the central VCS keeps the file tree
coherent.
"""

from __future__ import annotations

import logging
import shutil
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .clock import Clock, MonotonicClock
from .errors import InvalidState, UnknownSession, VcsError
from .model import (
    ActivityKind,
    LanguageId,
    SessionDescriptor,
    SessionState,
    new_session_id,
)
from .pool import NodePool
from .vcs import RepoRef, VcsSync, WorkspaceState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CleanupPolicy:
    """Sweep cadence and inactivity threshold, both in seconds."""

    sweep_interval_s: float = 300.0
    idle_threshold_s: float = 3600.0

    def __post_init__(self):
        if self.sweep_interval_s <= 0 or self.idle_threshold_s <= 0:
            raise ValueError("cleanup intervals must be strictly positive")
        if self.idle_threshold_s < self.sweep_interval_s:
            raise ValueError("idle threshold must be >= sweep interval")

    @property
    def idle_threshold_ms(self) -> int:
        return int(self.idle_threshold_s * 1000)

    @property
    def sweep_interval_ms(self) -> int:
        return int(self.sweep_interval_s * 1000)


@dataclass(frozen=True)
class SweepReport:
    """Outcome of one cleanup pass (or one user-initiated close)."""

    sweep_at: int
    removed: tuple[str, ...]
    retained: int
    reclaimed_bytes: int
    persist_failures: tuple[tuple[str, str], ...] = ()


def _tree_size(path: Path) -> int:
    total = 0
    try:
        for item in path.rglob("*"):
            if item.is_file() and not item.is_symlink():
                total += item.stat().st_size
    except OSError:
        pass
    return total


class SessionRegistry:
    """Single logical state machine owning all session descriptors.

    All mutating operations serialize through one lock; reads see a
    consistent snapshot. Node assignment is sticky for a session's
    lifetime; only reopen may rebind.
    """

    def __init__(
        self,
        pool: NodePool,
        vcs: VcsSync,
        sessions_root: str | Path,
        clock: Clock | None = None,
        policy: CleanupPolicy | None = None,
        sandboxes=None,
        gateway_hub=None,
        on_teardown=None,
    ):
        self.pool = pool
        self.vcs = vcs
        self.sessions_root = Path(sessions_root)
        self.clock = clock or MonotonicClock()
        self.policy = policy or CleanupPolicy()
        self.sandboxes = sandboxes
        self.gateway_hub = gateway_hub
        # Called with the descriptor whenever a node binding is dropped
        # (close, sweep, or pre-reopen); the composition root uses it to
        # unbind the session from its node's transport.
        self.on_teardown = on_teardown
        self._sessions: dict[str, SessionDescriptor] = {}
        self._repos: dict[str, RepoRef] = {}
        self._workspaces: dict[str, WorkspaceState] = {}
        self._lock = threading.RLock()

    # -- lifecycle ---------------------------------------------------------

    def create_session(
        self,
        user_id: str,
        exercise_id: str,
        language: LanguageId,
        repo: RepoRef,
    ) -> SessionDescriptor:
        """Provision a workspace on the least-loaded node for ``language``.

        The exercise repository is cloned into a session-unique directory;
        a clone failure leaves nothing registered and releases the node.
        """
        with self._lock:
            node_id = self.pool.select_node(language)
            session_id = new_session_id()
            target = self.sessions_root / session_id
            try:
                workspace = self.vcs.provision_workspace(session_id, repo, target)
            except VcsError:
                self.pool.release_session(node_id)
                raise
            descriptor = SessionDescriptor(
                session_id=session_id,
                user_id=user_id,
                exercise_id=exercise_id,
                language=language,
                node_id=node_id,
                workspace_path=workspace.path,
                last_activity=self.clock.now(),
                state=SessionState.ACTIVE,
            )
            self._sessions[session_id] = descriptor
            self._repos[session_id] = repo
            self._workspaces[session_id] = workspace
            logger.info("session %s created on %s (%s)", session_id, node_id, language.value)
            return descriptor

    def record_activity(self, session_id: str, kind: ActivityKind, at: int) -> SessionDescriptor:
        """Advance the session's activity clock; out-of-order reports keep the max."""
        with self._lock:
            descriptor = self._active(session_id)
            descriptor = descriptor.touched(at)
            self._sessions[session_id] = descriptor
            return descriptor

    def sweep_inactive(self, at: int | None = None, policy: CleanupPolicy | None = None) -> SweepReport:
        """Close every session idle longer than the threshold.

        Workspaces are persisted best-effort and then deleted; persistence
        failures are reported but never block deletion. Calling twice at
        the same timestamp is a no-op the second time.
        """
        policy = policy or self.policy
        with self._lock:
            at = self.clock.now() if at is None else at
            idle = [
                descriptor
                for descriptor in self._sessions.values()
                if descriptor.state is SessionState.ACTIVE
                and at - descriptor.last_activity > policy.idle_threshold_ms
            ]
            removed = []
            failures = []
            reclaimed = 0
            for descriptor in idle:
                reclaimed_bytes, persist_error = self._teardown(descriptor, at)
                removed.append(descriptor.session_id)
                reclaimed += reclaimed_bytes
                if persist_error is not None:
                    failures.append((descriptor.session_id, persist_error))
            retained = sum(
                1 for d in self._sessions.values() if d.state is SessionState.ACTIVE
            )
            if removed:
                logger.info("sweep removed %d idle sessions: %s", len(removed), removed)
            return SweepReport(
                sweep_at=at,
                removed=tuple(removed),
                retained=retained,
                reclaimed_bytes=reclaimed,
                persist_failures=tuple(failures),
            )

    def close_session(self, session_id: str) -> SweepReport:
        """User-initiated teardown of one active session."""
        with self._lock:
            descriptor = self._active(session_id)
            at = self.clock.now()
            reclaimed, persist_error = self._teardown(descriptor, at)
            retained = sum(
                1 for d in self._sessions.values() if d.state is SessionState.ACTIVE
            )
            failures = ((session_id, persist_error),) if persist_error else ()
            return SweepReport(
                sweep_at=at,
                removed=(session_id,),
                retained=retained,
                reclaimed_bytes=reclaimed,
                persist_failures=failures,
            )

    def reopen_session(self, session_id: str) -> SessionDescriptor:
        """Rebind a closed session (or one stranded on an unhealthy node).

        A fresh node is selected and the workspace is re-cloned from the
        repository head, so the file tree equals the last persisted state.
        """
        with self._lock:
            descriptor = self._sessions.get(session_id)
            if descriptor is None:
                raise UnknownSession(f"unknown session: {session_id}")
            repo = self._repos[session_id]

            if descriptor.state is SessionState.ACTIVE:
                if self.pool.get(descriptor.node_id).healthy:
                    raise InvalidState(f"session {session_id} is active on a healthy node")
                # Node is gone: un-persisted edits since the last push are
                # lost by design; release the stale binding and re-clone.
                self.pool.release_session(descriptor.node_id)
                if self.gateway_hub is not None:
                    self.gateway_hub.close_session(session_id)
                if self.on_teardown is not None:
                    self.on_teardown(descriptor)
                shutil.rmtree(descriptor.workspace_path, ignore_errors=True)

            node_id = self.pool.select_node(descriptor.language)
            target = self.sessions_root / session_id
            try:
                workspace = self.vcs.provision_workspace(session_id, repo, target)
            except VcsError:
                self.pool.release_session(node_id)
                raise
            descriptor = replace(
                descriptor,
                node_id=node_id,
                workspace_path=workspace.path,
                state=SessionState.ACTIVE,
                last_activity=self.clock.now(),
            )
            self._sessions[session_id] = descriptor
            self._workspaces[session_id] = workspace
            logger.info("session %s reopened on %s", session_id, node_id)
            return descriptor

    def persist_session(self, session_id: str, message: str | None = None) -> str | None:
        """Commit and push the session's workspace (explicit save/submit)."""
        with self._lock:
            self._active(session_id)
            return self.vcs.persist_workspace(self._workspaces[session_id], message)

    def shutdown(self) -> None:
        """Best-effort persist of every active session (clean service stop)."""
        with self._lock:
            for descriptor in self._sessions.values():
                if descriptor.state is not SessionState.ACTIVE:
                    continue
                try:
                    self.vcs.persist_workspace(self._workspaces[descriptor.session_id])
                except VcsError as exc:
                    logger.warning("shutdown persist failed for %s: %s", descriptor.session_id, exc)
                if self.sandboxes is not None:
                    self.sandboxes.reap_on_disconnect(descriptor.session_id)

    # -- queries -----------------------------------------------------------

    def get(self, session_id: str) -> SessionDescriptor:
        with self._lock:
            descriptor = self._sessions.get(session_id)
            if descriptor is None:
                raise UnknownSession(f"unknown session: {session_id}")
            return descriptor

    def get_active(self, session_id: str) -> SessionDescriptor:
        with self._lock:
            return self._active(session_id)

    def sessions(self) -> list[SessionDescriptor]:
        with self._lock:
            return list(self._sessions.values())

    def active_count(self) -> int:
        with self._lock:
            return sum(1 for d in self._sessions.values() if d.state is SessionState.ACTIVE)

    def workspace(self, session_id: str) -> WorkspaceState:
        with self._lock:
            if session_id not in self._workspaces:
                raise UnknownSession(f"unknown session: {session_id}")
            return self._workspaces[session_id]

    # -- internals -----------------------------------------------------------

    def _active(self, session_id: str) -> SessionDescriptor:
        descriptor = self._sessions.get(session_id)
        if descriptor is None or descriptor.state is not SessionState.ACTIVE:
            raise UnknownSession(f"no active session: {session_id}")
        return descriptor

    def _teardown(self, descriptor: SessionDescriptor, at: int) -> tuple[int, str | None]:
        """Common close path: settle traffic, reap, persist, delete, release."""
        session_id = descriptor.session_id
        # In-flight LSP requests are answered with a cancellation before
        # anything is torn down.
        if self.gateway_hub is not None:
            self.gateway_hub.close_session(session_id)
        if self.sandboxes is not None:
            self.sandboxes.reap_on_disconnect(session_id)

        persist_error = None
        try:
            self.vcs.persist_workspace(self._workspaces[session_id])
        except VcsError as exc:
            persist_error = str(exc)
            logger.warning("persist before delete failed for %s: %s", session_id, exc)

        workspace_path = Path(descriptor.workspace_path)
        reclaimed = _tree_size(workspace_path)
        shutil.rmtree(workspace_path, ignore_errors=True)

        self.pool.release_session(descriptor.node_id)
        if self.on_teardown is not None:
            self.on_teardown(descriptor)
        self._sessions[session_id] = replace(descriptor, state=SessionState.CLOSED)
        return reclaimed, persist_error
