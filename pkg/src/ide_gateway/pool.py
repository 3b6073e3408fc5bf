"""Language-server node pool: registration, metrics, health, selection.

Each node periodically reports five measurements (load average, CPU
usage, total/free memory, active sessions). Selection always picks the
node with the least workload, scored as a weighted normalized sum of
those measurements; ties break deterministically.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace

from .errors import (
    DuplicateEndpoint,
    InvalidNode,
    NoNodeAvailable,
    UnknownNode,
)
from .model import LanguageId, ServerMetrics

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 50


@dataclass(frozen=True)
class BalancerWeights:
    """Weights for the load score; non-negative, not all zero.

    ``load_cap`` normalizes the unbounded load average: anything at or
    above it saturates to 1.
    """

    sessions: float = 0.4
    cpu: float = 0.3
    memory: float = 0.2
    load: float = 0.1
    load_cap: float = 8.0

    def __post_init__(self):
        parts = (self.sessions, self.cpu, self.memory, self.load)
        if any(w < 0 for w in parts):
            raise ValueError("weights must be non-negative")
        if not any(parts):
            raise ValueError("at least one weight must be positive")
        if self.load_cap <= 0:
            raise ValueError("load_cap must be positive")


@dataclass(frozen=True)
class LoadScore:
    """Scalarized workload; lower means less loaded."""

    value: float
    components: dict[str, float] = field(compare=False)


def score(metrics: ServerMetrics, weights: BalancerWeights, capacity: int = DEFAULT_CAPACITY) -> LoadScore:
    """Deterministic workload score, monotone in every metric.

    Non-decreasing in active sessions, CPU usage, and load average;
    non-increasing in free memory.
    """
    components = {
        "sessions": weights.sessions * (metrics.active_sessions / capacity),
        "cpu": weights.cpu * metrics.cpu_usage,
        "memory": weights.memory * (1.0 - metrics.free_memory / metrics.total_memory),
        "load": weights.load * min(metrics.avg_load / weights.load_cap, 1.0),
    }
    return LoadScore(value=sum(components.values()), components=components)


@dataclass
class LspNode:
    """Pool-side view of one registered language-server node.

    ``active_sessions`` is the pool's own authoritative count (adjusted
    by select/release); ``last_metrics`` is whatever the node last
    reported and feeds the cpu/memory/load score components.
    """

    node_id: str
    endpoint: str
    languages: frozenset[LanguageId]
    capacity: int = DEFAULT_CAPACITY
    active_sessions: int = 0
    last_metrics: ServerMetrics | None = None
    last_seen: int | None = None
    healthy: bool = False

    def scoring_metrics(self) -> ServerMetrics:
        """Last report with the session count overridden by the pool's counter."""
        assert self.last_metrics is not None
        return replace(self.last_metrics, active_sessions=self.active_sessions)


class NodePool:
    """Registry of nodes with least-workload selection.

    Selection plus its optimistic session-count increment is a single
    atomic read-modify-write under the pool lock, so concurrent session
    creates cannot herd onto one node. Metric reports are last writer
    wins per node by timestamp.
    """

    def __init__(self, weights: BalancerWeights | None = None):
        self.weights = weights or BalancerWeights()
        self._nodes: dict[str, LspNode] = {}
        self._lock = threading.Lock()
        self._seq = 0

    def register_node(
        self,
        endpoint: str,
        languages: set[LanguageId] | frozenset[LanguageId],
        capacity: int = DEFAULT_CAPACITY,
        node_id: str | None = None,
    ) -> LspNode:
        """Add a node; it stays unhealthy until its first metrics report."""
        if not languages:
            raise InvalidNode("node must serve at least one language")
        if capacity <= 0:
            raise InvalidNode("capacity must be positive")
        with self._lock:
            if any(node.endpoint == endpoint for node in self._nodes.values()):
                raise DuplicateEndpoint(f"endpoint already registered: {endpoint}")
            self._seq += 1
            node_id = node_id or f"node-{self._seq}"
            if node_id in self._nodes:
                raise DuplicateEndpoint(f"node id already registered: {node_id}")
            node = LspNode(node_id=node_id, endpoint=endpoint, languages=frozenset(languages), capacity=capacity)
            self._nodes[node_id] = node
            return node

    def report_metrics(self, node_id: str, metrics: ServerMetrics, at: int) -> LspNode:
        """Ingest a metrics report; flips the node healthy.

        Reports older than the freshest one seen are ignored.
        """
        with self._lock:
            node = self._get(node_id)
            if node.last_seen is not None and at < node.last_seen:
                return node
            node.last_metrics = metrics
            node.last_seen = at
            node.healthy = True
            return node

    def select_node(self, language: LanguageId) -> str:
        """Pick the least-loaded healthy node serving ``language``.

        Returns the argmin of the load score over eligible nodes; ties
        break on lower session count, then lexicographic node id. The
        chosen node's session count is incremented here, pending the
        session bind.
        """
        with self._lock:
            eligible = [
                node
                for node in self._nodes.values()
                if node.healthy
                and language in node.languages
                and node.active_sessions < node.capacity
                and node.last_metrics is not None
            ]
            if not eligible:
                raise NoNodeAvailable(f"no healthy node serves {language.value}")
            best = min(
                eligible,
                key=lambda node: (
                    score(node.scoring_metrics(), self.weights, node.capacity).value,
                    node.active_sessions,
                    node.node_id,
                ),
            )
            best.active_sessions += 1
            return best.node_id

    def release_session(self, node_id: str) -> None:
        """Undo one session binding (close, sweep, or failed create)."""
        with self._lock:
            node = self._get(node_id)
            if node.active_sessions > 0:
                node.active_sessions -= 1

    def mark_stale(self, at: int, staleness_window_ms: int) -> list[str]:
        """Flip nodes silent for longer than the window to unhealthy."""
        flipped = []
        with self._lock:
            for node in self._nodes.values():
                if not node.healthy:
                    continue
                if node.last_seen is None or at - node.last_seen > staleness_window_ms:
                    node.healthy = False
                    flipped.append(node.node_id)
        if flipped:
            logger.info("marked stale nodes unhealthy: %s", flipped)
        return flipped

    def set_healthy(self, node_id: str, healthy: bool) -> None:
        """Administrative health override (drain a node for migration)."""
        with self._lock:
            self._get(node_id).healthy = healthy

    def get(self, node_id: str) -> LspNode:
        with self._lock:
            return self._get(node_id)

    def nodes(self) -> list[LspNode]:
        with self._lock:
            return list(self._nodes.values())

    def node_score(self, node_id: str) -> LoadScore | None:
        with self._lock:
            node = self._get(node_id)
            if node.last_metrics is None:
                return None
            return score(node.scoring_metrics(), self.weights, node.capacity)

    def total_active_sessions(self) -> int:
        with self._lock:
            return sum(node.active_sessions for node in self._nodes.values())

    def _get(self, node_id: str) -> LspNode:
        node = self._nodes.get(node_id)
        if node is None:
            raise UnknownNode(f"unknown node: {node_id}")
        return node
