"""Event traces for the replay benchmark.

A trace is JSON lines, one event per line:
``{"offsetMs": N, "method": "textDocument/didChange", "doc": "src/Main.java"}``.
The shipped reference trace models a user typing "Hello world!" into a
Java file: 12 keystrokes at a 150 ms cadence, each producing one
didChange notification and one completion request. The cadence is a
documented synthetic choice, not a claim about any original recording.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import TraceParseError

# Methods replayed as requests (they carry ids and expect responses);
# everything else in a trace is a notification.
REQUEST_METHODS = frozenset(
    {
        "initialize",
        "shutdown",
        "textDocument/hover",
        "textDocument/completion",
        "textDocument/codeLens",
        "textDocument/definition",
        "textDocument/references",
        "textDocument/documentSymbol",
    }
)


def is_request_method(method: str) -> bool:
    return method in REQUEST_METHODS


@dataclass(frozen=True)
class TraceEvent:
    offset_ms: int
    method: str
    doc: str = "src/Main.java"


@dataclass(frozen=True)
class EventTrace:
    name: str
    events: tuple[TraceEvent, ...]
    description: str = ""

    def __post_init__(self):
        previous = 0
        for event in self.events:
            if event.offset_ms < previous:
                raise TraceParseError(f"trace {self.name!r}: offsets must be non-decreasing")
            previous = event.offset_ms


def load_trace(path: str | Path) -> EventTrace:
    """Parse a JSON-lines trace file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise TraceParseError(f"cannot read trace: {exc}") from exc
    events = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"{path.name}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "offsetMs" not in doc or "method" not in doc:
            raise TraceParseError(f"{path.name}:{lineno}: event needs offsetMs and method")
        try:
            offset = int(doc["offsetMs"])
        except (TypeError, ValueError) as exc:
            raise TraceParseError(f"{path.name}:{lineno}: offsetMs must be an integer") from exc
        if offset < 0:
            raise TraceParseError(f"{path.name}:{lineno}: offsetMs must be >= 0")
        events.append(TraceEvent(offset_ms=offset, method=str(doc["method"]), doc=str(doc.get("doc", "src/Main.java"))))
    return EventTrace(name=path.stem, events=tuple(events))


def save_trace(trace: EventTrace, path: str | Path) -> None:
    lines = [
        json.dumps({"offsetMs": event.offset_ms, "method": event.method, "doc": event.doc})
        for event in trace.events
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def hello_world_trace(keystrokes: int = 12, cadence_ms: int = 150, doc: str = "src/Main.java") -> EventTrace:
    """Reference typing trace: each keystroke sends didChange + completion."""
    events = []
    for i in range(keystrokes):
        at = i * cadence_ms
        events.append(TraceEvent(offset_ms=at, method="textDocument/didChange", doc=doc))
        events.append(TraceEvent(offset_ms=at, method="textDocument/completion", doc=doc))
    return EventTrace(
        name="hello-world",
        events=tuple(events),
        description=f"{keystrokes} keystrokes at {cadence_ms} ms; didChange + completion each",
    )


def reference_trace() -> EventTrace:
    """The shipped hello-world trace (packaged data file)."""
    with resources.as_file(resources.files("ide_gateway").joinpath("data/hello-world.trace")) as path:
        return load_trace(path)


_RANDOM_METHODS = (
    "textDocument/didChange",
    "textDocument/didSave",
    "textDocument/hover",
    "textDocument/completion",
    "textDocument/codeLens",
    "textDocument/didOpen",
    "textDocument/definition",
)


def random_trace(
    seed: int,
    length: int = 40,
    min_gap_ms: int = 50,
    max_gap_ms: int = 500,
    docs: tuple[str, ...] = ("src/Main.java", "src/Util.java"),
) -> EventTrace:
    """Deterministic randomized trace: random cadence and method mix."""
    rng = random.Random(seed)
    events = []
    at = 0
    for _ in range(length):
        at += rng.randint(min_gap_ms, max_gap_ms)
        events.append(
            TraceEvent(offset_ms=at, method=rng.choice(_RANDOM_METHODS), doc=rng.choice(docs))
        )
    return EventTrace(name=f"random-{seed}", events=tuple(events), description="randomized cadence/method mix")
