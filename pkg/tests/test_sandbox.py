"""Sandbox lifecycle: laziness, single-run, timeout, reaping."""

from __future__ import annotations

import shutil
import threading
import time
from pathlib import Path

import pytest

from ide_gateway.errors import BackendUnavailable, SandboxAlreadyOpen, UnknownLanguage
from ide_gateway.model import LanguageId
from ide_gateway.sandbox import (
    DEFAULT_RUN_COMMANDS,
    ContainerBackend,
    ProcessBackend,
    ResourceLimits,
    RunResult,
    SandboxManager,
    SandboxState,
    run_profile,
)


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    ws = tmp_path / "ws"
    ws.mkdir()
    (ws / "test_main.py").write_text("def test_ok():\n    assert 1 + 1 == 2\n")
    return ws


@pytest.fixture
def manager() -> SandboxManager:
    built = SandboxManager(backend=ProcessBackend(), limits=ResourceLimits(wall_timeout_s=60.0))
    yield built
    built.reap_all()


def wait_until(predicate, timeout_s: float = 5.0) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


class TestRunProfiles:
    def test_java_command_verbatim(self):
        assert run_profile(LanguageId.JAVA).steps[-1] == "mvn clean test"

    def test_python_command_verbatim(self):
        assert run_profile(LanguageId.PYTHON).steps[-1] == "pytest"

    def test_c_default_command(self):
        assert run_profile(LanguageId.C).steps[-1] == "make test"

    def test_fixed_four_step_order(self):
        steps = run_profile(LanguageId.PYTHON).steps
        assert steps == ("terminate-previous", "clear-terminal", "change-directory", "pytest")

    def test_unconfigured_language(self):
        with pytest.raises(UnknownLanguage):
            run_profile(LanguageId.C, commands={LanguageId.PYTHON: "pytest"})

    def test_config_overrides(self):
        profile = run_profile(LanguageId.C, commands={**DEFAULT_RUN_COMMANDS, LanguageId.C: "ninja check"})
        assert profile.command == "ninja check"


class TestOpenTerminal:
    def test_shell_working_directory_is_workspace(self, manager, workspace):
        manager.open_terminal("s1", workspace)
        output: list[bytes] = []
        manager.subscribe("s1", lambda event: output.append(event[1]) if event[0] == "stdout" else None)
        manager.write_stdin("s1", b"pwd\n")
        assert wait_until(lambda: str(workspace.resolve()).encode() in b"".join(output))

    def test_second_open_rejected(self, manager, workspace):
        manager.open_terminal("s1", workspace)
        with pytest.raises(SandboxAlreadyOpen):
            manager.open_terminal("s1", workspace)

    def test_unavailable_backend(self, workspace):
        class DownBackend(ProcessBackend):
            def available(self) -> bool:
                return False

        manager = SandboxManager(backend=DownBackend())
        with pytest.raises(BackendUnavailable):
            manager.open_terminal("s1", workspace)

    def test_handle_fields(self, manager, workspace):
        handle = manager.open_terminal("s1", workspace)
        assert handle.state is SandboxState.RUNNING
        assert handle.backend == "process"
        assert handle.session_id == "s1"


class TestLaziness:
    def test_nothing_started_without_request(self, stack, exercise_repo):
        stack.create_session(exercise_repo)
        assert stack.sandboxes.total_started == 0
        assert stack.sandboxes.live_count() == 0

    def test_started_count_tracks_requests(self, manager, workspace):
        manager.open_terminal("s1", workspace)
        assert manager.total_started == 1
        manager.execute_run("s2", workspace, LanguageId.PYTHON)   # implicit open
        assert manager.total_started == 2
        manager.execute_run("s1", workspace, LanguageId.PYTHON)   # reuses the live sandbox
        assert manager.total_started == 2


class TestExecuteRun:
    def test_passing_python_fixture(self, manager, workspace):
        result = manager.execute_run("s1", workspace, LanguageId.PYTHON)
        assert result.exit_code == 0
        assert result.timed_out is False
        assert "1 passed" in result.text()

    def test_failing_fixture_nonzero_exit(self, manager, workspace):
        (workspace / "test_main.py").write_text("def test_no():\n    assert False\n")
        result = manager.execute_run("s1", workspace, LanguageId.PYTHON)
        assert result.exit_code not in (0, None)

    def test_timeout_kills_run(self, workspace):
        manager = SandboxManager(
            backend=ProcessBackend(),
            run_commands={LanguageId.PYTHON: "sleep 30"},
        )
        started = time.monotonic()
        result = manager.execute_run("s1", workspace, LanguageId.PYTHON, timeout_s=1.0)
        assert result.timed_out is True
        assert result.exit_code is None
        assert time.monotonic() - started < 10
        assert manager.live_executions("s1") <= 1  # only the shell may remain
        manager.reap_all()

    def test_second_run_terminates_first(self, workspace):
        manager = SandboxManager(
            backend=ProcessBackend(),
            run_commands={LanguageId.PYTHON: "sleep 30"},
        )
        first_result: list[RunResult] = []

        def run_first():
            first_result.append(manager.execute_run("s1", workspace, LanguageId.PYTHON))

        thread = threading.Thread(target=run_first, daemon=True)
        thread.start()
        assert wait_until(lambda: manager.handle("s1") is not None and manager.live_executions("s1") >= 2)

        manager.run_commands = {LanguageId.PYTHON: "echo second"}
        second = manager.execute_run("s1", workspace, LanguageId.PYTHON)
        thread.join(timeout=10)
        assert not thread.is_alive()
        assert second.exit_code == 0
        assert "second" in second.text()
        # The first run was killed rather than running to completion.
        assert first_result[0].exit_code != 0
        manager.reap_all()

    def test_events_stream_to_subscriber(self, manager, workspace):
        events = []
        result = manager.execute_run(
            "s1", workspace, LanguageId.PYTHON, subscriber=events.append
        )
        kinds = [name for name, _ in events]
        assert "stdout" in kinds
        assert kinds[-1] == "exit"
        assert events[-1][1] == result.exit_code


class TestContainerBackend:
    def test_docker_command_isolates_by_default(self, tmp_path):
        backend = ContainerBackend(images={"python": "exercise-python:3"})
        limits = ResourceLimits(cpu_quota=0.5, memory_limit=256 * 1024 * 1024, wall_timeout_s=60)
        cmd = backend._docker_cmd("box-1", tmp_path, limits, "exercise-python:3", ["/bin/sh", "-c", "pytest"])
        assert cmd[:3] == ["docker", "run", "--rm"]
        assert "--network" in cmd and cmd[cmd.index("--network") + 1] == "none"
        assert cmd[cmd.index("--memory") + 1] == str(256 * 1024 * 1024)
        assert cmd[cmd.index("--cpus") + 1] == "0.5"
        assert f"{tmp_path}:/work:rw" in cmd
        assert cmd[-3:] == ["/bin/sh", "-c", "pytest"]

    def test_network_flag_respects_limits(self, tmp_path):
        backend = ContainerBackend()
        open_net = ResourceLimits(network_access=True)
        cmd = backend._docker_cmd("box-2", tmp_path, open_net, "img", ["/bin/sh"])
        assert "--network" not in cmd

    def test_image_selection_per_language(self):
        backend = ContainerBackend(images={"java": "exercise-java:17"}, default_image="base:1")
        assert backend._image_for(LanguageId.JAVA) == "exercise-java:17"
        assert backend._image_for(LanguageId.C) == "base:1"
        assert backend._image_for(None) == "base:1"

    @pytest.mark.skipif(shutil.which("docker") is None, reason="docker not available")
    def test_confinement_probe(self, tmp_path):
        # Reading outside the mounted workspace must fail inside the container.
        workspace = tmp_path / "ws"
        workspace.mkdir()
        other = tmp_path / "other-session"
        other.mkdir()
        (other / "secret.txt").write_text("secret")
        manager = SandboxManager(backend=ContainerBackend())
        result = manager.execute_run(
            "s1", workspace, LanguageId.PYTHON, timeout_s=60,
        )
        manager.run_commands = {LanguageId.PYTHON: f"cat {other}/secret.txt"}
        probe = manager.execute_run("s1", workspace, LanguageId.PYTHON, timeout_s=60)
        assert probe.exit_code not in (0, None)
        assert "secret" not in probe.text()
        manager.reap_all()
        assert result is not None


class TestReap:
    def test_reap_kills_processes(self, manager, workspace):
        manager.open_terminal("s1", workspace)
        assert manager.live_executions("s1") == 1
        reaped = manager.reap_on_disconnect("s1")
        assert len(reaped) == 1
        assert manager.live_executions("s1") == 0
        assert manager.handle("s1") is None

    def test_reap_without_sandbox_is_empty(self, manager):
        assert manager.reap_on_disconnect("s1") == []

    def test_reap_twice_second_empty(self, manager, workspace):
        manager.open_terminal("s1", workspace)
        assert manager.reap_on_disconnect("s1") != []
        assert manager.reap_on_disconnect("s1") == []

    def test_reap_during_run(self, workspace):
        manager = SandboxManager(
            backend=ProcessBackend(),
            run_commands={LanguageId.PYTHON: "sleep 30"},
        )
        results: list[RunResult] = []
        thread = threading.Thread(
            target=lambda: results.append(manager.execute_run("s1", workspace, LanguageId.PYTHON)),
            daemon=True,
        )
        thread.start()
        assert wait_until(lambda: manager.live_executions("s1") >= 2)
        manager.reap_on_disconnect("s1")
        thread.join(timeout=10)
        assert not thread.is_alive()
        assert results[0].exit_code != 0
