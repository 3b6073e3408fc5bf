"""Per-session JSON-RPC proxy: URI namespacing, debouncing, routing."""

from .debounce import (
    DebounceClass,
    DebounceConfig,
    DebounceDecision,
    Debouncer,
    classify,
)
from .proxy import GatewayHub, SessionGateway
from .uris import CLIENT_ROOT, rewrite_uri

__all__ = [
    "CLIENT_ROOT",
    "DebounceClass",
    "DebounceConfig",
    "DebounceDecision",
    "Debouncer",
    "GatewayHub",
    "SessionGateway",
    "classify",
    "rewrite_uri",
]
