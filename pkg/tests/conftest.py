"""Shared fixtures: manual clock, local bare repos, and a wired stack."""

from __future__ import annotations

import subprocess
from pathlib import Path

import pytest

from ide_gateway.clock import ManualClock
from ide_gateway.gateway import DebounceConfig, GatewayHub
from ide_gateway.mocknode import MockBehavior, MockLspNode
from ide_gateway.model import LanguageId
from ide_gateway.pool import NodePool
from ide_gateway.sandbox import ProcessBackend, ResourceLimits, SandboxManager
from ide_gateway.sessions import CleanupPolicy, SessionRegistry
from ide_gateway.vcs import RepoRef, VcsSync

GIT_ID = ["-c", "user.name=test", "-c", "user.email=test@localhost"]


def git(args: list[str], cwd: Path | None = None) -> str:
    result = subprocess.run(
        ["git", *GIT_ID, *args], cwd=cwd, check=True, capture_output=True, text=True
    )
    return result.stdout.strip()


def make_bare_repo(base: Path, files: dict[str, str], name: str = "exercise") -> RepoRef:
    """Local bare repository seeded with the given files on main."""
    remote = base / f"{name}.git"
    git(["init", "--bare", "-q", "--initial-branch=main", str(remote)])
    seed = base / f"{name}-seed"
    git(["clone", "-q", str(remote), str(seed)])
    for rel, content in files.items():
        target = seed / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
    git(["add", "-A"], cwd=seed)
    git(["commit", "-qm", "seed"], cwd=seed)
    git(["push", "-q", "origin", "HEAD:main"], cwd=seed)
    return RepoRef(url=str(remote), branch="main", exercise_id=name)


@pytest.fixture
def clock() -> ManualClock:
    return ManualClock()


@pytest.fixture
def exercise_repo(tmp_path: Path) -> RepoRef:
    return make_bare_repo(
        tmp_path / "repos",
        {
            "src/Main.java": "public class Main {}\n",
            "problem.md": "# Exercise\nWrite the thing.\n",
            "test_main.py": "def test_ok():\n    assert 1 + 1 == 2\n",
        },
    )


class Stack:
    """Fully wired in-process backend for tests (no HTTP layer)."""

    def __init__(self, tmp_path: Path, clock: ManualClock, behavior: MockBehavior | None = None):
        self.clock = clock
        self.sessions_root = tmp_path / "sessions"
        self.pool = NodePool()
        self.vcs = VcsSync()
        self.hub = GatewayHub(str(self.sessions_root), DebounceConfig(), clock)
        self.sandboxes = SandboxManager(
            backend=ProcessBackend(),
            clock=clock,
            limits=ResourceLimits(wall_timeout_s=30.0),
        )
        self.nodes: dict[str, MockLspNode] = {}
        self.behavior = behavior or MockBehavior()
        self.registry = SessionRegistry(
            pool=self.pool,
            vcs=self.vcs,
            sessions_root=self.sessions_root,
            clock=clock,
            policy=CleanupPolicy(),
            sandboxes=self.sandboxes,
            gateway_hub=self.hub,
            on_teardown=self._unbind,
        )

    def _unbind(self, descriptor) -> None:
        node = self.nodes.get(descriptor.node_id)
        if node is not None:
            node.unbind_session(descriptor.session_id)

    def add_node(self, node_id: str, languages=None, capacity: int = 50) -> MockLspNode:
        node = MockLspNode(behavior=self.behavior, node_id=node_id)
        self.pool.register_node(f"mock://{node_id}", languages or set(LanguageId),
                                capacity=capacity, node_id=node_id)
        self.pool.report_metrics(node_id, node.metrics(), self.clock.now())
        self.nodes[node_id] = node
        return node

    def create_session(self, repo: RepoRef, language=LanguageId.PYTHON, user: str = "alice"):
        descriptor = self.registry.create_session(user, repo.exercise_id, language, repo)
        gateway = self.hub.open_session(descriptor.session_id)
        node = self.nodes[descriptor.node_id]
        node.bind_session(descriptor.session_id, gateway.on_server_message)
        gateway.attach_node(node.handle)
        return descriptor

    def rewire(self, descriptor) -> None:
        gateway = self.hub.open_session(descriptor.session_id)
        node = self.nodes[descriptor.node_id]
        node.bind_session(descriptor.session_id, gateway.on_server_message)
        gateway.attach_node(node.handle)


@pytest.fixture
def stack(tmp_path: Path, clock: ManualClock) -> Stack:
    built = Stack(tmp_path, clock)
    built.add_node("node-a")
    yield built
    built.sandboxes.reap_all()
