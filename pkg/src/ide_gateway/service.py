"""Composition root: HTTP/WebSocket surface and the service binary.

REST routes manage sessions, ingest node metrics, and report status;
WebSocket routes carry LSP frames (one JSON-RPC document per text frame)
and the terminal stream. Background loops run the idle sweep, flush due
debounce slots, and feed embedded mock-node metrics into the pool.
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import json
import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path

import click
import uvicorn
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from starlette.middleware.cors import CORSMiddleware

from .clock import Clock, MonotonicClock
from .config import ServiceConfig, load_config
from .errors import (
    BackendUnavailable,
    IdeGatewayError,
    InvalidMetrics,
    InvalidState,
    NoNodeAvailable,
    RpcParseError,
    SandboxAlreadyOpen,
    UnknownLanguage,
    UnknownNode,
    UnknownSession,
    VcsError,
)
from .gateway import GatewayHub
from .mocknode import MockBehavior, MockLspNode
from .model import (
    ActivityKind,
    LanguageId,
    ServerMetrics,
    SessionDescriptor,
    envelope_to_json,
    parse_envelope,
)
from .pool import NodePool
from .sandbox import ContainerBackend, ProcessBackend, SandboxManager
from .sessions import SessionRegistry
from .vcs import RepoRef, VcsSync

logger = logging.getLogger(__name__)

FLUSH_TICK_S = 0.05


class BackendService:
    """Everything behind the HTTP surface, wired together.

    Mock nodes are embedded in-process (dev mode and tests); externally
    registered nodes get pool membership and metrics ingestion, but LSP
    transport to external node processes is deployment-specific and not
    wired by this binary.
    """

    def __init__(self, config: ServiceConfig | None = None, dev: bool = False, clock: Clock | None = None):
        self.config = config or ServiceConfig()
        self.dev = dev
        self.clock = clock or MonotonicClock()
        self.sessions_root = Path(self.config.sessions_root)
        self.sessions_root.mkdir(parents=True, exist_ok=True)

        self.pool = NodePool(weights=self.config.balancer.weights())
        self.vcs = VcsSync()
        self.hub = GatewayHub(
            str(self.sessions_root), self.config.debounce.debounce_config(), self.clock
        )
        backend = (
            ProcessBackend()
            if dev or self.config.sandbox.backend == "process"
            else ContainerBackend(images=self.config.sandbox.images)
        )
        self.sandboxes = SandboxManager(
            backend=backend,
            clock=self.clock,
            limits=self.config.sandbox.limits(),
            run_commands=self.config.run_commands(),
        )
        self.registry = SessionRegistry(
            pool=self.pool,
            vcs=self.vcs,
            sessions_root=self.sessions_root,
            clock=self.clock,
            policy=self.config.cleanup.policy(),
            sandboxes=self.sandboxes,
            gateway_hub=self.hub,
            on_teardown=self._unbind_node_session,
        )
        self.mock_nodes: dict[str, MockLspNode] = {}

    # -- nodes ---------------------------------------------------------------

    def add_mock_node(
        self,
        languages: set[LanguageId] | None = None,
        behavior: MockBehavior | None = None,
        capacity: int = 50,
        node_id: str | None = None,
    ) -> MockLspNode:
        """Embed a mock node and make it immediately selectable."""
        node = MockLspNode(behavior=behavior, node_id=node_id or f"mock-{len(self.mock_nodes) + 1}")
        registered = self.pool.register_node(
            endpoint=f"mock://{node.node_id}",
            languages=languages or set(LanguageId),
            capacity=capacity,
            node_id=node.node_id,
        )
        self.mock_nodes[registered.node_id] = node
        self.pool.report_metrics(registered.node_id, node.metrics(), self.clock.now())
        return node

    def report_mock_metrics(self) -> None:
        at = self.clock.now()
        for node_id, node in self.mock_nodes.items():
            self.pool.report_metrics(node_id, node.metrics(), at)

    def _unbind_node_session(self, descriptor: SessionDescriptor) -> None:
        node = self.mock_nodes.get(descriptor.node_id)
        if node is not None:
            node.unbind_session(descriptor.session_id)

    # -- session orchestration -------------------------------------------------

    def _wire_session(self, descriptor: SessionDescriptor) -> None:
        """Create the session's gateway and bind it to its node's transport."""
        gateway = self.hub.open_session(descriptor.session_id)
        node = self.mock_nodes.get(descriptor.node_id)
        if node is None:
            logger.warning(
                "node %s has no in-process transport; LSP traffic for %s will be dropped",
                descriptor.node_id, descriptor.session_id,
            )
            return
        node.bind_session(descriptor.session_id, gateway.on_server_message)
        gateway.attach_node(node.handle)

    def create_session(
        self, user_id: str, exercise_id: str, language: LanguageId, repo: RepoRef
    ) -> SessionDescriptor:
        descriptor = self.registry.create_session(user_id, exercise_id, language, repo)
        self._wire_session(descriptor)
        return descriptor

    def reopen_session(self, session_id: str) -> SessionDescriptor:
        descriptor = self.registry.reopen_session(session_id)
        self._wire_session(descriptor)
        return descriptor

    def shutdown(self) -> None:
        """Persist every active session and reap every sandbox."""
        self.registry.shutdown()
        self.sandboxes.reap_all()
        for session_id in self.hub.session_ids():
            self.hub.close_session(session_id)

    # -- status ---------------------------------------------------------------

    def status(self) -> dict:
        nodes = []
        for node in self.pool.nodes():
            node_score = self.pool.node_score(node.node_id)
            nodes.append(
                {
                    "nodeId": node.node_id,
                    "endpoint": node.endpoint,
                    "healthy": node.healthy,
                    "languages": sorted(lang.value for lang in node.languages),
                    "activeSessions": node.active_sessions,
                    "capacity": node.capacity,
                    "metrics": node.last_metrics.to_wire() if node.last_metrics else None,
                    "score": None if node_score is None else node_score.value,
                }
            )
        traffic = {}
        for session_id in self.hub.session_ids():
            counters = self.hub.get(session_id).counters()
            traffic[session_id] = {
                "clientToServerSent": counters.client_to_server_sent,
                "serverToClientSent": counters.server_to_client_sent,
                "suppressed": counters.suppressed,
                "coalesced": counters.coalesced,
            }
        return {
            "sessions": {
                "active": self.registry.active_count(),
                "total": len(self.registry.sessions()),
            },
            "nodes": nodes,
            "traffic": traffic,
            "sandboxes": {
                "live": self.sandboxes.live_count(),
                "started": self.sandboxes.total_started,
            },
        }

    # -- auth -------------------------------------------------------------------

    def auth_ok(self, token: str | None) -> bool:
        if self.dev or self.config.auth_token is None:
            return True
        return token == self.config.auth_token


def descriptor_view(descriptor: SessionDescriptor) -> dict:
    return {
        "sessionId": descriptor.session_id,
        "userId": descriptor.user_id,
        "exerciseId": descriptor.exercise_id,
        "language": descriptor.language.value,
        "nodeId": descriptor.node_id,
        "state": descriptor.state.value,
        "workspacePath": descriptor.workspace_path,
        "lastActivity": descriptor.last_activity,
        "wsUrls": {
            "lsp": f"/lsp/{descriptor.session_id}",
            "terminal": f"/terminal/{descriptor.session_id}",
        },
    }


def _bearer_token(request: Request) -> str | None:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:]
    return None


def _ws_token(websocket: WebSocket) -> str | None:
    header = websocket.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:]
    return websocket.query_params.get("token")


def _safe_workspace_path(workspace: str, relative: str) -> Path:
    base = Path(workspace).resolve()
    target = (base / relative).resolve()
    if not target.is_relative_to(base):
        raise PathTraversal(relative)
    return target


class PathTraversal(Exception):
    pass


def build_app(service: BackendService) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        tasks = [
            asyncio.create_task(_flush_loop(service)),
            asyncio.create_task(_sweep_loop(service)),
            asyncio.create_task(_metrics_loop(service)),
        ]
        try:
            yield
        finally:
            for task in tasks:
                task.cancel()
            for task in tasks:
                try:
                    await task
                except asyncio.CancelledError:
                    pass
            service.shutdown()

    app = FastAPI(title="ide-gateway", lifespan=lifespan)
    app.state.svc = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(IdeGatewayError)
    async def domain_error_handler(request: Request, exc: IdeGatewayError):
        status = 500
        if isinstance(exc, (UnknownSession, UnknownNode)):
            status = 404
        elif isinstance(exc, (UnknownLanguage, InvalidMetrics, InvalidState, RpcParseError)):
            status = 400
        elif isinstance(exc, NoNodeAvailable):
            status = 503
        elif isinstance(exc, (VcsError, BackendUnavailable)):
            status = 502
        elif isinstance(exc, SandboxAlreadyOpen):
            status = 409
        return JSONResponse(status_code=status, content={"error": str(exc), "type": type(exc).__name__})

    def require_auth(request: Request) -> None:
        if not service.auth_ok(_bearer_token(request)):
            raise AuthFailure()

    class AuthFailure(Exception):
        pass

    @app.exception_handler(AuthFailure)
    async def auth_handler(request: Request, exc: AuthFailure):
        return JSONResponse(status_code=401, content={"error": "missing or invalid bearer token"})

    @app.exception_handler(PathTraversal)
    async def traversal_handler(request: Request, exc: PathTraversal):
        return JSONResponse(status_code=400, content={"error": f"path escapes workspace: {exc}"})

    # -- REST -----------------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/status")
    async def status(request: Request):
        require_auth(request)
        return service.status()

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        require_auth(request)
        body = await request.json()
        for key in ("userId", "exerciseId", "language", "repoUrl"):
            if not isinstance(body.get(key), str) or not body[key]:
                return JSONResponse(status_code=400, content={"error": f"missing or invalid field: {key}"})
        language = LanguageId.parse(body["language"])
        repo = RepoRef(url=body["repoUrl"], branch=body.get("branch", service.config.vcs.default_branch))
        descriptor = await asyncio.to_thread(
            service.create_session, body["userId"], body["exerciseId"], language, repo
        )
        return JSONResponse(status_code=201, content=descriptor_view(descriptor))

    @app.get("/sessions/{session_id}")
    async def get_session(request: Request, session_id: str):
        require_auth(request)
        return descriptor_view(service.registry.get(session_id))

    @app.delete("/sessions/{session_id}")
    async def close_session(request: Request, session_id: str):
        require_auth(request)
        report = await asyncio.to_thread(service.registry.close_session, session_id)
        return {
            "sessionId": session_id,
            "reclaimedBytes": report.reclaimed_bytes,
            "persistFailures": [list(item) for item in report.persist_failures],
        }

    @app.post("/sessions/{session_id}/reopen")
    async def reopen_session(request: Request, session_id: str):
        require_auth(request)
        descriptor = await asyncio.to_thread(service.reopen_session, session_id)
        return descriptor_view(descriptor)

    @app.post("/sessions/{session_id}/persist")
    async def persist_session(request: Request, session_id: str):
        require_auth(request)
        head = await asyncio.to_thread(service.registry.persist_session, session_id)
        return {"sessionId": session_id, "headCommit": head}

    @app.post("/nodes/{node_id}/metrics", status_code=204)
    async def ingest_metrics(request: Request, node_id: str):
        require_auth(request)
        body = await request.json()
        if isinstance(body, dict) and "nodeId" in body:
            if body.pop("nodeId") != node_id:
                return JSONResponse(status_code=400, content={"error": "nodeId does not match path"})
        metrics = ServerMetrics.from_wire(body)
        service.pool.report_metrics(node_id, metrics, service.clock.now())
        return Response(status_code=204)

    @app.post("/nodes", status_code=201)
    async def register_node(request: Request):
        require_auth(request)
        body = await request.json()
        endpoint = body.get("endpoint")
        languages = body.get("languages")
        if not endpoint or not isinstance(languages, list):
            return JSONResponse(status_code=400, content={"error": "endpoint and languages required"})
        node = service.pool.register_node(
            endpoint=endpoint,
            languages={LanguageId.parse(lang) for lang in languages},
            capacity=int(body.get("capacity", 50)),
        )
        return {"nodeId": node.node_id, "healthy": node.healthy}

    # -- workspace files (browser IDE support) ---------------------------------

    @app.get("/sessions/{session_id}/files")
    async def list_files(request: Request, session_id: str):
        require_auth(request)
        descriptor = service.registry.get_active(session_id)
        base = Path(descriptor.workspace_path)
        files = []
        for item in sorted(base.rglob("*")):
            relative = item.relative_to(base)
            if ".git" in relative.parts:
                continue
            if item.is_file():
                files.append({"path": str(relative), "size": item.stat().st_size})
        return {"sessionId": session_id, "files": files}

    @app.get("/sessions/{session_id}/files/{file_path:path}")
    async def read_file(request: Request, session_id: str, file_path: str):
        require_auth(request)
        descriptor = service.registry.get_active(session_id)
        target = _safe_workspace_path(descriptor.workspace_path, file_path)
        if not target.is_file():
            return JSONResponse(status_code=404, content={"error": f"no such file: {file_path}"})
        return {"path": file_path, "content": target.read_text(encoding="utf-8", errors="replace")}

    @app.put("/sessions/{session_id}/files/{file_path:path}", status_code=204)
    async def write_file(request: Request, session_id: str, file_path: str):
        require_auth(request)
        descriptor = service.registry.get_active(session_id)
        target = _safe_workspace_path(descriptor.workspace_path, file_path)
        body = await request.json()
        content = body.get("content")
        if not isinstance(content, str):
            return JSONResponse(status_code=400, content={"error": "content must be a string"})
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
        service.registry.record_activity(
            session_id, ActivityKind.FILE_MODIFICATION, service.clock.now()
        )
        return Response(status_code=204)

    # -- WebSockets --------------------------------------------------------------

    @app.websocket("/lsp/{session_id}")
    async def lsp_socket(websocket: WebSocket, session_id: str):
        if not service.auth_ok(_ws_token(websocket)):
            await websocket.close(code=4401)
            return
        try:
            service.registry.get_active(session_id)
            gateway = service.hub.get(session_id)
        except UnknownSession:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue[str] = asyncio.Queue()

        def sink(envelope):
            loop.call_soon_threadsafe(outbox.put_nowait, envelope_to_json(envelope))

        gateway.attach_client(sink)
        sender = asyncio.create_task(_pump_queue(outbox, websocket))
        try:
            while True:
                text = await websocket.receive_text()
                now = service.clock.now()
                try:
                    envelope = parse_envelope(text, session_id, now)
                except RpcParseError as exc:
                    await websocket.send_text(json.dumps(
                        {"jsonrpc": "2.0", "id": None,
                         "error": {"code": -32700, "message": str(exc)}}
                    ))
                    continue
                try:
                    service.registry.record_activity(session_id, ActivityKind.LSP_MESSAGE, now)
                    gateway.submit_client(envelope, now)
                except UnknownSession:
                    break
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            gateway.detach_client()

    @app.websocket("/terminal/{session_id}")
    async def terminal_socket(websocket: WebSocket, session_id: str):
        if not service.auth_ok(_ws_token(websocket)):
            await websocket.close(code=4401)
            return
        try:
            descriptor = service.registry.get_active(session_id)
        except UnknownSession:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue[dict] = asyncio.Queue()

        def subscriber(event):
            name, value = event
            if name in ("stdout", "stderr"):
                frame = {"t": name, "data": base64.b64encode(value).decode()}
            elif name == "exit":
                frame = {"t": "exit", "code": value}
            else:
                return
            loop.call_soon_threadsafe(outbox.put_nowait, frame)

        # One sandbox per connection: a stale sandbox from a dropped
        # connection is reaped before a fresh terminal starts.
        if service.sandboxes.handle(session_id) is not None:
            service.sandboxes.reap_on_disconnect(session_id)
        try:
            service.sandboxes.open_terminal(session_id, descriptor.workspace_path)
        except (BackendUnavailable, SandboxAlreadyOpen) as exc:
            await websocket.send_json({"t": "exit", "code": -1, "error": str(exc)})
            await websocket.close(code=4502)
            return
        service.sandboxes.subscribe(session_id, subscriber)
        sender = asyncio.create_task(_pump_json_queue(outbox, websocket))
        run_tasks: set[asyncio.Task] = set()
        try:
            while True:
                frame = await websocket.receive_json()
                kind = frame.get("t")
                now = service.clock.now()
                if kind == "stdin":
                    try:
                        data = base64.b64decode(frame.get("data", ""))
                    except (binascii.Error, ValueError):
                        continue
                    service.registry.record_activity(session_id, ActivityKind.TERMINAL_INPUT, now)
                    try:
                        service.sandboxes.write_stdin(session_id, data)
                    except (UnknownSession, BackendUnavailable):
                        break
                elif kind == "run":
                    service.registry.record_activity(session_id, ActivityKind.TERMINAL_INPUT, now)
                    task = asyncio.create_task(asyncio.to_thread(
                        service.sandboxes.execute_run,
                        session_id, descriptor.workspace_path, descriptor.language,
                    ))
                    run_tasks.add(task)
                    task.add_done_callback(run_tasks.discard)
                elif kind == "resize":
                    continue  # no PTY in either backend; accepted and ignored
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            service.sandboxes.reap_on_disconnect(session_id)
            for task in run_tasks:
                task.cancel()

    return app


async def _pump_queue(queue: asyncio.Queue, websocket: WebSocket) -> None:
    try:
        while True:
            await websocket.send_text(await queue.get())
    except asyncio.CancelledError:
        raise
    except Exception:  # connection gone; receiver loop handles teardown
        pass


async def _pump_json_queue(queue: asyncio.Queue, websocket: WebSocket) -> None:
    try:
        while True:
            await websocket.send_json(await queue.get())
    except asyncio.CancelledError:
        raise
    except Exception:
        pass


async def _flush_loop(service: BackendService) -> None:
    while True:
        await asyncio.sleep(FLUSH_TICK_S)
        service.hub.flush_all(service.clock.now())
        for node in service.mock_nodes.values():
            node.pump(service.clock.now())


async def _sweep_loop(service: BackendService) -> None:
    interval = service.config.cleanup.sweep_interval
    while True:
        await asyncio.sleep(interval)
        try:
            await asyncio.to_thread(service.registry.sweep_inactive)
        except Exception:
            logger.exception("sweep failed")


async def _metrics_loop(service: BackendService) -> None:
    interval = service.config.balancer.report_interval
    window_ms = int(service.config.balancer.staleness_window_s() * 1000)
    while True:
        await asyncio.sleep(interval)
        service.report_mock_metrics()
        service.pool.mark_stale(service.clock.now(), window_ms)


@click.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Path to the JSON config file (or set IDE_CONFIG).")
@click.option("--listen", "listen", default=None,
              help="host:port to bind (overrides config and IDE_LISTEN).")
@click.option("--dev", is_flag=True, default=False,
              help="Permissive auth, process sandbox backend, embedded mock nodes.")
def main(config_path: str | None, listen: str | None, dev: bool) -> None:
    """Run the online-IDE backend service."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    config_path = config_path or os.environ.get("IDE_CONFIG")
    config = load_config(config_path) if config_path else ServiceConfig()
    address = listen or os.environ.get("IDE_LISTEN") or config.listen_address
    host, _, port = address.rpartition(":")
    service = BackendService(config=config, dev=dev)
    if dev:
        service.add_mock_node()
        service.add_mock_node()
    app = build_app(service)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
