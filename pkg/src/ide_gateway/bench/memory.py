"""Memory-vs-sessions scaling series.

Synthetic mode reads the mock node's resource model directly, so the
fitted slope equals the configured per-session cost exactly. Sampled
mode stands up the real in-process stack (pool, registry, gateways, a
mock node holding an actual per-session buffer), creates n sessions
against a throwaway exercise repository, and samples this process's
resident memory. Absolute numbers are environment-specific and reported,
never asserted; the property of interest is linearity.
"""

from __future__ import annotations

import gc
import logging
import shutil
import statistics
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ..clock import ManualClock
from ..errors import SamplingUnavailable
from ..gateway import GatewayHub
from ..mocknode import MockBehavior, MockLspNode
from ..model import LanguageId
from ..pool import NodePool
from ..sessions import SessionRegistry
from ..vcs import RepoRef, VcsSync

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MemoryPoint:
    sessions: int
    resident_bytes: int


@dataclass(frozen=True)
class MemorySeries:
    """Measured points plus the least-squares line through them."""

    points: tuple[MemoryPoint, ...]
    slope: float
    intercept: float
    r2: float
    mode: str
    description: str = ""

    def __post_init__(self):
        counts = [point.sessions for point in self.points]
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("session counts must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "description": self.description,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "points": [
                {"sessions": point.sessions, "residentBytes": point.resident_bytes}
                for point in self.points
            ],
        }


def fit_line(points: list[MemoryPoint]) -> tuple[float, float, float]:
    """Least-squares slope/intercept and the coefficient of determination."""
    if len(points) < 2:
        raise ValueError("need at least two points to fit a line")
    xs = [float(point.sessions) for point in points]
    ys = [float(point.resident_bytes) for point in points]
    slope, intercept = statistics.linear_regression(xs, ys)
    mean_y = sum(ys) / len(ys)
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    if ss_tot == 0:
        r2 = 1.0 if ss_res == 0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def _synthetic_series(session_counts: list[int], behavior: MockBehavior) -> MemorySeries:
    points = []
    for count in session_counts:
        node = MockLspNode(behavior=behavior)
        for i in range(count):
            node.bind_session(f"synthetic-{i}", lambda _envelope: None)
        metrics = node.metrics()
        points.append(MemoryPoint(sessions=count, resident_bytes=metrics.total_memory - metrics.free_memory))
    slope, intercept, r2 = fit_line(points)
    return MemorySeries(
        points=tuple(points), slope=slope, intercept=intercept, r2=r2,
        mode="synthetic",
        description=f"mock-node resource model, {behavior.per_session_memory_cost} B/session",
    )


def _rss_bytes() -> int:
    try:
        import psutil
    except ImportError as exc:  # pragma: no cover - psutil is a declared dep
        raise SamplingUnavailable("psutil not importable") from exc
    try:
        return psutil.Process().memory_info().rss
    except Exception as exc:  # pragma: no cover - platform-specific
        raise SamplingUnavailable(f"resident memory introspection failed: {exc}") from exc


def _make_exercise_repo(base: Path) -> RepoRef:
    remote = base / "exercise.git"
    subprocess.run(
        ["git", "init", "--bare", "-q", "--initial-branch=main", str(remote)],
        check=True, capture_output=True,
    )
    seed = base / "seed"
    subprocess.run(["git", "clone", "-q", str(remote), str(seed)], check=True, capture_output=True)
    (seed / "main.py").write_text("print('hello')\n", encoding="utf-8")
    env_args = ["-c", "user.name=bench", "-c", "user.email=bench@localhost"]
    subprocess.run(["git", *env_args, "-C", str(seed), "add", "-A"], check=True, capture_output=True)
    subprocess.run(["git", *env_args, "-C", str(seed), "commit", "-qm", "seed"], check=True, capture_output=True)
    subprocess.run(["git", *env_args, "-C", str(seed), "push", "-q", "origin", "HEAD:main"], check=True, capture_output=True)
    return RepoRef(url=str(remote), branch="main", exercise_id="bench")


def _sampled_series(session_counts: list[int], behavior: MockBehavior) -> MemorySeries:
    _rss_bytes()  # fail fast with SamplingUnavailable before any setup
    behavior = MockBehavior(
        per_session_memory_cost=behavior.per_session_memory_cost,
        response_latency_ms=behavior.response_latency_ms,
        total_memory=behavior.total_memory,
        base_memory=behavior.base_memory,
        allocate_real_memory=True,
    )
    points = []
    with tempfile.TemporaryDirectory(prefix="ide-bench-") as tmp:
        base = Path(tmp)
        repo = _make_exercise_repo(base)
        for count in session_counts:
            sessions_root = base / f"sessions-{count}"
            clock = ManualClock()
            pool = NodePool()
            node = MockLspNode(behavior=behavior, node_id="bench-node")
            pool.register_node("mock://bench-node", set(LanguageId), capacity=max(64, count + 1), node_id=node.node_id)
            pool.report_metrics(node.node_id, node.metrics(), clock.now())
            hub = GatewayHub(str(sessions_root), clock=clock)
            registry = SessionRegistry(pool, VcsSync(), sessions_root, clock=clock, gateway_hub=hub)
            for _ in range(count):
                descriptor = registry.create_session("bench", "bench", LanguageId.PYTHON, repo)
                gateway = hub.open_session(descriptor.session_id)
                node.bind_session(descriptor.session_id, gateway.on_server_message)
                gateway.attach_node(node.handle)
            gc.collect()
            points.append(MemoryPoint(sessions=count, resident_bytes=_rss_bytes()))
            for descriptor in registry.sessions():
                node.unbind_session(descriptor.session_id)
                hub.close_session(descriptor.session_id)
            del registry, hub, pool, node
            shutil.rmtree(sessions_root, ignore_errors=True)
            gc.collect()
    slope, intercept, r2 = fit_line(points)
    return MemorySeries(
        points=tuple(points), slope=slope, intercept=intercept, r2=r2,
        mode="sampled",
        description=f"process RSS, mock node holding {behavior.per_session_memory_cost} B/session",
    )


def measure_memory(
    session_counts: list[int],
    mode: str = "synthetic",
    behavior: MockBehavior | None = None,
) -> MemorySeries:
    """Produce the memory series for the given session counts.

    ``synthetic`` mode is exact by construction; ``sampled`` mode raises
    :class:`SamplingUnavailable` where resident memory cannot be read
    (callers may fall back to synthetic).
    """
    if not session_counts:
        raise ValueError("session_counts must be non-empty")
    behavior = behavior or MockBehavior()
    if mode == "synthetic":
        return _synthetic_series(sorted(set(session_counts)), behavior)
    if mode == "sampled":
        return _sampled_series(sorted(set(session_counts)), behavior)
    raise ValueError(f"unknown mode: {mode!r}")
