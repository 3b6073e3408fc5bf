"""Per-session URI namespacing.

A shared language-server node serves many sessions, so every client sees
a virtual ``file:///workspace`` root while the node sees the session's
real directory under the sessions root. Rewriting is an exact inverse
pair, rejects traversal, and never leaks one session's paths to another.
"""

from __future__ import annotations

from enum import Enum
from pathlib import PurePosixPath
from typing import Any
from urllib.parse import unquote

from ..errors import ForeignUri, PathEscape

CLIENT_ROOT = "file:///workspace"
_FILE_SCHEME = "file://"


class Direction(Enum):
    CLIENT_TO_SERVER = "clientToServer"
    SERVER_TO_CLIENT = "serverToClient"


def _reject_traversal(path: str) -> None:
    # Check the percent-decoded form so encoded dots cannot slip through.
    for segment in unquote(path).split("/"):
        if segment == "..":
            raise PathEscape(f"path traversal rejected: {path}")


def _session_root(sessions_root: str, session_id: str) -> str:
    root = str(PurePosixPath(sessions_root))
    return f"{root}/{session_id}"


def rewrite_uri(sessions_root: str, session_id: str, uri: str, direction: Direction) -> str:
    """Map one file URI between the virtual client root and the real session root.

    ``CLIENT_TO_SERVER`` maps ``file:///workspace/P`` to
    ``file://<sessionsRoot>/<sessionId>/P``; ``SERVER_TO_CLIENT`` is the
    exact inverse. Raises :class:`PathEscape` for ``..`` segments, for
    non-file schemes, and for inputs not rooted where the direction
    requires; raises :class:`ForeignUri` when a server-side URI lies
    under a different session's root.
    """
    if not uri.startswith(_FILE_SCHEME):
        raise PathEscape(f"not a file uri: {uri}")
    path = uri[len(_FILE_SCHEME):]
    _reject_traversal(path)
    session_root = _session_root(sessions_root, session_id)
    client_root_path = CLIENT_ROOT[len(_FILE_SCHEME):]

    if direction is Direction.CLIENT_TO_SERVER:
        if path == client_root_path:
            return f"{_FILE_SCHEME}{session_root}"
        if path.startswith(client_root_path + "/"):
            rel = path[len(client_root_path):]
            return f"{_FILE_SCHEME}{session_root}{rel}"
        raise PathEscape(f"uri outside the client workspace root: {uri}")

    if path == session_root:
        return CLIENT_ROOT
    if path.startswith(session_root + "/"):
        return f"{CLIENT_ROOT}{path[len(session_root):]}"
    root = str(PurePosixPath(sessions_root))
    if path == root or path.startswith(root + "/"):
        raise ForeignUri(f"uri under another session's root: {uri}")
    raise PathEscape(f"uri outside the sessions root: {uri}")


def _is_uri_key(key: str) -> bool:
    return key == "uri" or key.endswith("Uri")


def rewrite_payload(
    sessions_root: str, session_id: str, payload: Any, direction: Direction
) -> Any:
    """Rewrite every URI-carrying field in a JSON payload.

    Only values of keys named ``uri``/``*Uri`` are touched, so URIs
    embedded in document text are left alone. Server-to-client file URIs
    outside the sessions root (e.g. SDK sources) pass through unchanged;
    URIs under another session's root raise :class:`ForeignUri`.
    """

    def walk(value: Any, under_uri_key: bool) -> Any:
        if isinstance(value, dict):
            return {k: walk(v, _is_uri_key(k)) for k, v in value.items()}
        if isinstance(value, list):
            return [walk(item, under_uri_key) for item in value]
        if under_uri_key and isinstance(value, str) and value.startswith(_FILE_SCHEME):
            if direction is Direction.SERVER_TO_CLIENT:
                try:
                    return rewrite_uri(sessions_root, session_id, value, direction)
                except ForeignUri:
                    raise
                except PathEscape:
                    # Node-global paths (outside the sessions root) pass through.
                    return value
            return rewrite_uri(sessions_root, session_id, value, direction)
        return value

    return walk(payload, False)


def document_key(payload: Any) -> str | None:
    """URI identifying the document a message targets, if any.

    Used to key debounce slots so edits to different files never
    suppress each other.
    """
    if isinstance(payload, dict):
        text_document = payload.get("textDocument")
        if isinstance(text_document, dict) and isinstance(text_document.get("uri"), str):
            return text_document["uri"]
        if isinstance(payload.get("uri"), str):
            return payload["uri"]
    return None
