"""On-demand isolated terminals and one-click run execution.

Each session gets at most one live sandbox, started only on user request
(never eagerly at session creation) and reaped when the owning
connection goes away. The run button executes a fixed four-step
sequence: terminate any previous run, clear the terminal, change to the
workspace directory, and invoke the language's run command.

Two backends: an OCI-container backend for production isolation, and a
restricted-subprocess backend for tests and CI. The process backend
applies best-effort rlimits but is not a security boundary.
"""

from __future__ import annotations

import logging
import os
import shutil
import signal
import subprocess
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from .clock import Clock, MonotonicClock
from .errors import BackendUnavailable, SandboxAlreadyOpen, UnknownLanguage, UnknownSession
from .model import LanguageId

logger = logging.getLogger(__name__)

MiB = 1024 * 1024

# ANSI clear-screen + cursor-home, emitted as the run sequence's clear step.
CLEAR_SEQUENCE = b"\x1b[2J\x1b[H"

# Output events published to sandbox subscribers:
#   ("stdout" | "stderr", bytes) and ("exit", int | None).
OutputEvent = tuple[str, Any]
Subscriber = Callable[[OutputEvent], None]


@dataclass(frozen=True)
class ResourceLimits:
    """Execution caps for arbitrary student code; network off by default."""

    cpu_quota: float = 1.0
    memory_limit: int = 512 * MiB
    wall_timeout_s: float = 900.0
    network_access: bool = False

    def __post_init__(self):
        if self.cpu_quota <= 0 or self.memory_limit <= 0 or self.wall_timeout_s <= 0:
            raise ValueError("resource limits must be strictly positive")


class SandboxState(str, Enum):
    RUNNING = "running"
    EXITED = "exited"


@dataclass(frozen=True)
class SandboxHandle:
    sandbox_id: str
    session_id: str
    backend: str
    started_at: int
    limits: ResourceLimits
    state: SandboxState


STEP_TERMINATE = "terminate-previous"
STEP_CLEAR = "clear-terminal"
STEP_CHDIR = "change-directory"

DEFAULT_RUN_COMMANDS: dict[LanguageId, str] = {
    LanguageId.JAVA: "mvn clean test",
    LanguageId.PYTHON: "pytest",
    LanguageId.C: "make test",
}


@dataclass(frozen=True)
class RunProfile:
    """The fixed run-button sequence; the last step is the run command."""

    language: LanguageId
    steps: tuple[str, ...]

    @property
    def command(self) -> str:
        return self.steps[-1]


def run_profile(language: LanguageId, commands: dict[LanguageId, str] | None = None) -> RunProfile:
    table = commands or DEFAULT_RUN_COMMANDS
    if language not in table:
        raise UnknownLanguage(f"no run command configured for {language}")
    return RunProfile(language=language, steps=(STEP_TERMINATE, STEP_CLEAR, STEP_CHDIR, table[language]))


@dataclass(frozen=True)
class RunResult:
    exit_code: int | None
    timed_out: bool
    output: tuple[tuple[str, bytes], ...]

    def text(self) -> str:
        return b"".join(chunk for _, chunk in self.output).decode(errors="replace")


@dataclass
class SpawnedProcess:
    proc: subprocess.Popen
    kill: Callable[[], None]


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=5)
    except subprocess.TimeoutExpired:  # pragma: no cover - kernel-level stall
        logger.error("process group %s refused SIGKILL", proc.pid)


class ProcessBackend:
    """Restricted-subprocess backend for tests and CI.

    Applies rlimits via the shell (core dumps off, address space capped)
    and gives each sandbox its own process group for clean teardown. Not
    a security boundary; production uses the container backend.
    """

    name = "process"

    def available(self) -> bool:
        return True

    def _limit_prefix(self, limits: ResourceLimits) -> str:
        kib = max(1, limits.memory_limit // 1024)
        return f"ulimit -c 0; ulimit -v {kib} 2>/dev/null; "

    def spawn_shell(self, workspace: Path, limits: ResourceLimits) -> SpawnedProcess:
        proc = subprocess.Popen(
            ["/bin/sh", "-c", self._limit_prefix(limits) + "exec /bin/sh"],
            cwd=workspace,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
        return SpawnedProcess(proc=proc, kill=lambda: _kill_group(proc))

    def spawn_run(
        self, workspace: Path, limits: ResourceLimits, command: str, language: LanguageId | None = None
    ) -> SpawnedProcess:
        proc = subprocess.Popen(
            ["/bin/sh", "-c", self._limit_prefix(limits) + command],
            cwd=workspace,
            stdin=subprocess.DEVNULL,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
        return SpawnedProcess(proc=proc, kill=lambda: _kill_group(proc))


class ContainerBackend:
    """OCI-container backend: one container per terminal/run.

    The workspace mounts read-write at a fixed inner path; everything
    else in the container is the image's own filesystem, so probing
    another session's directory fails. Requires a docker-compatible CLI
    talking to its standard local socket.
    """

    name = "container"
    INNER_WORKSPACE = "/work"

    def __init__(self, images: dict[str, str] | None = None, default_image: str = "debian:stable-slim"):
        self.images = images or {}
        self.default_image = default_image

    def available(self) -> bool:
        return shutil.which("docker") is not None

    def _image_for(self, language: LanguageId | None) -> str:
        if language is not None and language.value in self.images:
            return self.images[language.value]
        return self.default_image

    def _docker_cmd(
        self, name: str, workspace: Path, limits: ResourceLimits, image: str, inner: list[str]
    ) -> list[str]:
        cmd = [
            "docker", "run", "--rm", "-i", "--name", name,
            "--memory", str(limits.memory_limit),
            "--cpus", str(limits.cpu_quota),
            "--pids-limit", "256",
            "-v", f"{workspace}:{self.INNER_WORKSPACE}:rw",
            "-w", self.INNER_WORKSPACE,
        ]
        if not limits.network_access:
            cmd += ["--network", "none"]
        return cmd + [image, *inner]

    def _spawn(self, workspace: Path, limits: ResourceLimits, image: str, inner: list[str]) -> SpawnedProcess:
        if not self.available():
            raise BackendUnavailable("docker CLI not found")
        name = f"ide-sandbox-{uuid.uuid4().hex[:12]}"
        proc = subprocess.Popen(
            self._docker_cmd(name, workspace, limits, image, inner),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )

        def kill() -> None:
            subprocess.run(["docker", "kill", name], capture_output=True, check=False)
            _kill_group(proc)

        return SpawnedProcess(proc=proc, kill=kill)

    def spawn_shell(self, workspace: Path, limits: ResourceLimits) -> SpawnedProcess:
        return self._spawn(workspace, limits, self.default_image, ["/bin/sh"])

    def spawn_run(
        self, workspace: Path, limits: ResourceLimits, command: str, language: LanguageId | None = None
    ) -> SpawnedProcess:
        return self._spawn(workspace, limits, self._image_for(language), ["/bin/sh", "-c", command])


@dataclass
class _LiveSandbox:
    sandbox_id: str
    session_id: str
    backend_name: str
    started_at: int
    limits: ResourceLimits
    workspace: Path
    shell: SpawnedProcess | None = None
    run: SpawnedProcess | None = None
    subscribers: list[Subscriber] = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock)
    exited: bool = False

    def publish(self, event: OutputEvent) -> None:
        for subscriber in list(self.subscribers):
            try:
                subscriber(event)
            except Exception:  # noqa: BLE001 - a bad subscriber must not kill readers
                logger.exception("sandbox subscriber failed")

    def handle(self) -> SandboxHandle:
        running = not self.exited and (
            (self.shell is not None and self.shell.proc.poll() is None)
            or (self.run is not None and self.run.proc.poll() is None)
        )
        return SandboxHandle(
            sandbox_id=self.sandbox_id,
            session_id=self.session_id,
            backend=self.backend_name,
            started_at=self.started_at,
            limits=self.limits,
            state=SandboxState.RUNNING if running else SandboxState.EXITED,
        )


def _pump_stream(stream, name: str, emit: Callable[[OutputEvent], None]) -> None:
    try:
        while True:
            chunk = stream.read1(65536)
            if not chunk:
                break
            emit((name, chunk))
    except (OSError, ValueError):
        pass


class SandboxManager:
    """Owns every live sandbox and serializes lifecycle per session."""

    def __init__(
        self,
        backend: ProcessBackend | ContainerBackend | None = None,
        clock: Clock | None = None,
        limits: ResourceLimits | None = None,
        run_commands: dict[LanguageId, str] | None = None,
    ):
        self.backend = backend or ProcessBackend()
        self.clock = clock or MonotonicClock()
        self.limits = limits or ResourceLimits()
        self.run_commands = run_commands or DEFAULT_RUN_COMMANDS
        self._live: dict[str, _LiveSandbox] = {}
        self._lock = threading.RLock()
        # Ever-started counter backing the laziness invariant: sandboxes
        # come only from explicit terminal/run requests.
        self.total_started = 0

    # -- lifecycle ---------------------------------------------------------

    def open_terminal(self, session_id: str, workspace: str | Path) -> SandboxHandle:
        """Start the session's terminal sandbox with a shell attached."""
        with self._lock:
            existing = self._live.get(session_id)
            if existing is not None and existing.handle().state is SandboxState.RUNNING:
                raise SandboxAlreadyOpen(f"session {session_id} already has a live sandbox")
            if not self.backend.available():
                raise BackendUnavailable(f"{self.backend.name} backend unavailable")
            sandbox = _LiveSandbox(
                sandbox_id=f"sbx-{uuid.uuid4().hex[:12]}",
                session_id=session_id,
                backend_name=self.backend.name,
                started_at=self.clock.now(),
                limits=self.limits,
                workspace=Path(workspace),
            )
            sandbox.shell = self.backend.spawn_shell(sandbox.workspace, self.limits)
            self._start_readers(sandbox, sandbox.shell, sandbox.publish)
            self._live[session_id] = sandbox
            self.total_started += 1
            logger.info("sandbox %s opened for session %s", sandbox.sandbox_id, session_id)
            return sandbox.handle()

    def execute_run(
        self,
        session_id: str,
        workspace: str | Path,
        language: LanguageId,
        timeout_s: float | None = None,
        subscriber: Subscriber | None = None,
    ) -> RunResult:
        """Run the language's command sequence; blocks until exit or timeout.

        Any previous run process is terminated before the new one starts,
        so there is exactly one live run per sandbox at any instant. The
        sandbox is opened implicitly when absent.
        """
        sandbox = self._get_or_open(session_id, workspace)
        profile = run_profile(language, self.run_commands)
        if subscriber is not None:
            self.subscribe(session_id, subscriber)
        collected: list[tuple[str, bytes]] = []

        def emit(event: OutputEvent) -> None:
            if event[0] in ("stdout", "stderr"):
                collected.append((event[0], event[1]))
            sandbox.publish(event)

        with sandbox.lock:
            previous = sandbox.run
            if previous is not None and previous.proc.poll() is None:
                previous.kill()
            sandbox.publish(("stdout", CLEAR_SEQUENCE))
            spawned = self.backend.spawn_run(
                Path(workspace), self.limits, profile.command, language
            )
            sandbox.run = spawned
            readers = self._start_readers(sandbox, spawned, emit)

        timed_out = False
        timeout = timeout_s if timeout_s is not None else self.limits.wall_timeout_s
        try:
            exit_code: int | None = spawned.proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            spawned.kill()
            timed_out = True
            exit_code = None
        for reader in readers:
            reader.join(timeout=5)
        with sandbox.lock:
            if sandbox.run is spawned:
                sandbox.run = None
        sandbox.publish(("exit", exit_code))
        if subscriber is not None:
            self.unsubscribe(session_id, subscriber)
        return RunResult(exit_code=exit_code, timed_out=timed_out, output=tuple(collected))

    def reap_on_disconnect(self, session_id: str) -> list[str]:
        """Terminate everything the session owns; idempotent."""
        with self._lock:
            sandbox = self._live.pop(session_id, None)
        if sandbox is None:
            return []
        with sandbox.lock:
            for spawned in (sandbox.run, sandbox.shell):
                if spawned is not None and spawned.proc.poll() is None:
                    spawned.kill()
            sandbox.run = None
            sandbox.exited = True
        logger.info("sandbox %s reaped for session %s", sandbox.sandbox_id, session_id)
        return [sandbox.sandbox_id]

    def reap_all(self) -> list[str]:
        with self._lock:
            session_ids = list(self._live)
        reaped = []
        for session_id in session_ids:
            reaped.extend(self.reap_on_disconnect(session_id))
        return reaped

    # -- terminal I/O ------------------------------------------------------

    def write_stdin(self, session_id: str, data: bytes) -> None:
        sandbox = self._require(session_id)
        with sandbox.lock:
            if sandbox.shell is None or sandbox.shell.proc.poll() is not None:
                raise BackendUnavailable("terminal shell is not running")
            assert sandbox.shell.proc.stdin is not None
            sandbox.shell.proc.stdin.write(data)
            sandbox.shell.proc.stdin.flush()

    def subscribe(self, session_id: str, subscriber: Subscriber) -> None:
        self._require(session_id).subscribers.append(subscriber)

    def unsubscribe(self, session_id: str, subscriber: Subscriber) -> None:
        sandbox = self._live.get(session_id)
        if sandbox is not None and subscriber in sandbox.subscribers:
            sandbox.subscribers.remove(subscriber)

    # -- queries -----------------------------------------------------------

    def handle(self, session_id: str) -> SandboxHandle | None:
        with self._lock:
            sandbox = self._live.get(session_id)
            return None if sandbox is None else sandbox.handle()

    def live_count(self) -> int:
        with self._lock:
            return sum(
                1 for sandbox in self._live.values()
                if sandbox.handle().state is SandboxState.RUNNING
            )

    def live_executions(self, session_id: str) -> int:
        """Live backend processes owned by the session (no-orphan checks)."""
        with self._lock:
            sandbox = self._live.get(session_id)
        if sandbox is None:
            return 0
        count = 0
        with sandbox.lock:
            for spawned in (sandbox.shell, sandbox.run):
                if spawned is not None and spawned.proc.poll() is None:
                    count += 1
        return count

    # -- internals -----------------------------------------------------------

    def _get_or_open(self, session_id: str, workspace: str | Path) -> _LiveSandbox:
        with self._lock:
            sandbox = self._live.get(session_id)
            if sandbox is not None and not sandbox.exited:
                return sandbox
        self.open_terminal(session_id, workspace)
        with self._lock:
            return self._live[session_id]

    def _require(self, session_id: str) -> _LiveSandbox:
        with self._lock:
            sandbox = self._live.get(session_id)
            if sandbox is None:
                raise UnknownSession(f"no live sandbox for session: {session_id}")
            return sandbox

    def _start_readers(
        self, sandbox: _LiveSandbox, spawned: SpawnedProcess, emit: Callable[[OutputEvent], None]
    ) -> list[threading.Thread]:
        readers = []
        for name, stream in (("stdout", spawned.proc.stdout), ("stderr", spawned.proc.stderr)):
            if stream is None:
                continue
            thread = threading.Thread(
                target=_pump_stream, args=(stream, name, emit),
                name=f"{sandbox.sandbox_id}-{name}", daemon=True,
            )
            thread.start()
            readers.append(thread)
        return readers
