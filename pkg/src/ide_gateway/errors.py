"""Error taxonomy shared by every backend module.

Each error maps to one well-defined failure of a public operation, so
callers (and the HTTP layer) can branch on type rather than message text.
"""

from __future__ import annotations


class IdeGatewayError(Exception):
    """Base class for all errors raised by this package."""


class UnknownSession(IdeGatewayError):
    """Session id is not registered, or the session is not active."""


class InvalidState(IdeGatewayError):
    """Operation not valid for the session's current lifecycle state."""


class NoNodeAvailable(IdeGatewayError):
    """No healthy, under-capacity node serves the requested language."""


class UnknownNode(IdeGatewayError):
    """Node id is not registered in the pool."""


class DuplicateEndpoint(IdeGatewayError):
    """A node with this endpoint is already registered."""


class InvalidNode(IdeGatewayError):
    """Node registration parameters are unusable (e.g. no languages)."""


class InvalidMetrics(IdeGatewayError):
    """A metrics report violates the metrics invariants."""


class UnknownLanguage(IdeGatewayError):
    """Language is outside the supported closed set."""


class RpcParseError(IdeGatewayError):
    """Text frame is not a well-formed JSON-RPC 2.0 document."""


class PathEscape(IdeGatewayError):
    """URI path traverses outside the session's workspace root."""


class ForeignUri(IdeGatewayError):
    """URI belongs to a different session's workspace root."""


class VcsError(IdeGatewayError):
    """A version-control operation failed (clone/push/fetch)."""


class DirExists(IdeGatewayError):
    """Provision target directory already exists."""


class DirtyWorkspace(IdeGatewayError):
    """Workspace has uncommitted changes where a clean tree is required."""


class SandboxAlreadyOpen(IdeGatewayError):
    """The session already owns a live terminal sandbox."""


class BackendUnavailable(IdeGatewayError):
    """The configured sandbox backend cannot start executions."""


class TraceParseError(IdeGatewayError):
    """Trace file is malformed or violates ordering invariants."""


class SamplingUnavailable(IdeGatewayError):
    """Resident-memory introspection is not available on this platform."""


class ConfigError(IdeGatewayError):
    """Base class for configuration loading failures."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ConfigParseError(ConfigError):
    """Config file is missing or not valid JSON."""


class ConfigValidationError(ConfigError):
    """Config content violates the schema; ``path`` names the bad key."""
