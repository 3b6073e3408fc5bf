"""Desk-scale benchmark harness: traffic-reduction replay and memory scaling."""

from .memory import MemoryPoint, MemorySeries, measure_memory
from .replay import TrafficReport, replay_trace
from .traces import EventTrace, TraceEvent, hello_world_trace, load_trace, random_trace

__all__ = [
    "EventTrace",
    "MemoryPoint",
    "MemorySeries",
    "TraceEvent",
    "TrafficReport",
    "hello_world_trace",
    "load_trace",
    "measure_memory",
    "random_trace",
    "replay_trace",
]
