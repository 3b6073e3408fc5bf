"""Class-based trailing-edge debouncing with coalescing and supersession.

Interactive traffic (hover, completion, code lenses) and file-change
traffic are held until a quiet period passes; every new arrival resets
the slot timer. Held change notifications for the same document coalesce
into one message; a newer interactive request supersedes the older held
one, which is owed a cancellation response. Lifecycle methods
(initialize, shutdown, didOpen, didClose) are never delayed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

from ..model import RequestId, RpcEnvelope, RpcKind
from .uris import document_key


class DebounceClass(Enum):
    INTERACTIVE = "interactive"
    FILE_CHANGE = "fileChange"
    PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class DebounceConfig:
    """Per-class hold delays in milliseconds; passthrough is always 0."""

    interactive_ms: int = 1000
    file_change_ms: int = 2000

    def __post_init__(self):
        if self.interactive_ms < 0 or self.file_change_ms < 0:
            raise ValueError("debounce delays must be >= 0")

    def delay_for(self, klass: DebounceClass) -> int:
        if klass is DebounceClass.INTERACTIVE:
            return self.interactive_ms
        if klass is DebounceClass.FILE_CHANGE:
            return self.file_change_ms
        return 0


_METHOD_CLASSES: dict[str, DebounceClass] = {
    "textDocument/didChange": DebounceClass.FILE_CHANGE,
    "textDocument/didSave": DebounceClass.FILE_CHANGE,
    "textDocument/hover": DebounceClass.INTERACTIVE,
    "textDocument/completion": DebounceClass.INTERACTIVE,
    "textDocument/codeLens": DebounceClass.INTERACTIVE,
}


def classify(method: str | None) -> DebounceClass:
    """Total classification; unknown methods pass straight through."""
    if method is None:
        return DebounceClass.PASSTHROUGH
    return _METHOD_CLASSES.get(method, DebounceClass.PASSTHROUGH)


Action = Literal["emit", "hold", "coalesce", "supersede"]


@dataclass(frozen=True)
class DebounceDecision:
    """Verdict for one submitted envelope."""

    action: Action
    due_at: int | None = None
    superseded_id: RequestId | None = None


@dataclass
class PendingSlot:
    """Held traffic for one (class, document) key.

    ``due_at`` is always the most recent arrival plus the class delay
    (trailing edge). ``superseded_ids`` are request ids owed a
    cancellation response when the slot flushes.
    """

    key: tuple[DebounceClass, str | None]
    due_at: int
    seq: int
    held: list[RpcEnvelope] = field(default_factory=list)
    superseded_ids: list[RequestId] = field(default_factory=list)


@dataclass(frozen=True)
class FlushedSlot:
    """One flushed slot: coalesced emissions plus owed cancellations."""

    emissions: tuple[RpcEnvelope, ...]
    cancelled_ids: tuple[RequestId, ...]
    due_at: int


@dataclass(frozen=True)
class DrainResult:
    """Teardown outcome: everything still pending when the session closed."""

    cancelled_ids: tuple[RequestId, ...]
    dropped_notifications: int


def _merge_notifications(older: RpcEnvelope, newer: RpcEnvelope) -> RpcEnvelope:
    """Coalesce two same-method held notifications into one.

    didChange content-change lists concatenate in arrival order (applying
    the merged list equals applying the originals); any other repeated
    notification is replaced by the newer one.
    """
    if newer.method == "textDocument/didChange":
        old_changes = (older.payload or {}).get("contentChanges", [])
        new_changes = (newer.payload or {}).get("contentChanges", [])
        merged = dict(newer.payload or {})
        merged["contentChanges"] = list(old_changes) + list(new_changes)
        return newer.with_payload(merged)
    return newer


class Debouncer:
    """Pure, clock-free debounce state machine for one session.

    Callers pass the current time to every operation, so behavior is
    fully deterministic under a mock clock. Callers must flush due slots
    before submitting arrivals at the same instant (an arrival exactly at
    a slot's due time starts a fresh hold rather than joining the flush).
    """

    def __init__(self, config: DebounceConfig | None = None):
        self.config = config or DebounceConfig()
        self._slots: dict[tuple[DebounceClass, str | None], PendingSlot] = {}
        self._seq = 0

    def submit(self, envelope: RpcEnvelope, at: int) -> DebounceDecision:
        klass = classify(envelope.method)
        delay = self.config.delay_for(klass)
        if envelope.kind is RpcKind.RESPONSE or delay <= 0:
            return DebounceDecision("emit")

        self._seq += 1
        key = (klass, document_key(envelope.payload))
        due_at = at + delay
        slot = self._slots.get(key)
        if slot is None:
            self._slots[key] = PendingSlot(key=key, due_at=due_at, seq=self._seq, held=[envelope])
            return DebounceDecision("hold", due_at=due_at)

        slot.due_at = due_at
        slot.seq = self._seq

        if envelope.kind is RpcKind.REQUEST:
            for i in range(len(slot.held) - 1, -1, -1):
                older = slot.held[i]
                if older.kind is RpcKind.REQUEST:
                    del slot.held[i]
                    slot.superseded_ids.append(older.id)
                    slot.held.append(envelope)
                    return DebounceDecision("supersede", due_at=due_at, superseded_id=older.id)
            slot.held.append(envelope)
            return DebounceDecision("hold", due_at=due_at)

        last = slot.held[-1] if slot.held else None
        if last is not None and last.kind is RpcKind.NOTIFICATION and last.method == envelope.method:
            slot.held[-1] = _merge_notifications(last, envelope)
            return DebounceDecision("coalesce", due_at=due_at)
        slot.held.append(envelope)
        return DebounceDecision("hold", due_at=due_at)

    def flush_due(self, at: int) -> list[FlushedSlot]:
        """Flush every slot with ``due_at <= at`` (inclusive boundary).

        Slots flush in due-time order; ties preserve the arrival order of
        their last-held messages.
        """
        due = [slot for slot in self._slots.values() if slot.due_at <= at]
        due.sort(key=lambda slot: (slot.due_at, slot.seq))
        flushed = []
        for slot in due:
            del self._slots[slot.key]
            flushed.append(
                FlushedSlot(
                    emissions=tuple(slot.held),
                    cancelled_ids=tuple(slot.superseded_ids),
                    due_at=slot.due_at,
                )
            )
        return flushed

    def next_due(self) -> int | None:
        if not self._slots:
            return None
        return min(slot.due_at for slot in self._slots.values())

    def drain(self) -> DrainResult:
        """Tear down all pending state when the session closes.

        Held requests have never reached the node, so they join the
        superseded ids owed a cancellation; held notifications are
        dropped.
        """
        cancelled: list[RequestId] = []
        dropped = 0
        for slot in self._slots.values():
            cancelled.extend(slot.superseded_ids)
            for envelope in slot.held:
                if envelope.kind is RpcKind.REQUEST:
                    cancelled.append(envelope.id)
                else:
                    dropped += 1
        self._slots.clear()
        return DrainResult(cancelled_ids=tuple(cancelled), dropped_notifications=dropped)

    def pending_count(self) -> int:
        return len(self._slots)
