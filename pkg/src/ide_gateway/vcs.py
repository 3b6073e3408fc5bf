"""Central-VCS integration for session workspaces.

Exercise repositories are cloned per session, edits are committed and
pushed back, and a session migrating to another node re-clones from the
remote head, which keeps file trees coherent across nodes. Remotes may
be ordinary URLs or local bare repositories (tests use the latter, so no
network or credentials are needed).
"""

from __future__ import annotations

import logging
import subprocess
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import DirExists, DirtyWorkspace, VcsError

logger = logging.getLogger(__name__)

# Fixed committer identity so autosave commits never depend on host git config.
_GIT_IDENTITY = [
    "-c", "user.name=ide-autosave",
    "-c", "user.email=ide-autosave@localhost",
]


@dataclass(frozen=True)
class RepoRef:
    """Locator of an exercise repository."""

    url: str
    branch: str = "main"
    exercise_id: str = ""

    def __post_init__(self):
        if not self.url:
            raise VcsError("repository url must be non-empty")


@dataclass(frozen=True)
class WorkspaceState:
    session_id: str
    head_commit: str
    dirty: bool
    path: str


def _git(args: list[str], cwd: Path | None = None, timeout: int = 120) -> subprocess.CompletedProcess[str]:
    cmd = ["git", *_GIT_IDENTITY, *args]
    logger.debug("git %s (cwd=%s)", " ".join(args), cwd)
    try:
        return subprocess.run(
            cmd, cwd=cwd, check=True, capture_output=True, text=True, timeout=timeout
        )
    except subprocess.CalledProcessError as exc:
        raise VcsError(f"git {args[0]} failed: {exc.stderr.strip() or exc.stdout.strip()}") from exc
    except subprocess.TimeoutExpired as exc:
        raise VcsError(f"git {args[0]} timed out after {timeout}s") from exc


def _clone_url(url: str) -> str:
    # file:// transport keeps --depth working for local-path remotes.
    if url.startswith(("/", "./")) or (Path(url).is_absolute() if "://" not in url else False):
        return f"file://{Path(url).resolve()}"
    return url


def _head_commit(workdir: Path) -> str:
    return _git(["rev-parse", "HEAD"], cwd=workdir).stdout.strip()


def _is_dirty(workdir: Path) -> bool:
    status = _git(["status", "--porcelain"], cwd=workdir).stdout
    return bool(status.strip())


def autosave_message(now: datetime | None = None) -> str:
    stamp = (now or datetime.now(timezone.utc)).isoformat(timespec="seconds")
    return f"ide autosave {stamp}"


class VcsSync:
    """Per-session workspace provisioning and persistence.

    Operations for one workspace must not run concurrently; different
    sessions are independent. Remote history is append-only: this module
    never force-pushes.
    """

    def provision_workspace(self, session_id: str, repo: RepoRef, target_dir: str | Path) -> WorkspaceState:
        """Shallow-clone ``repo@branch`` into an absent ``target_dir``."""
        target = Path(target_dir)
        if target.exists():
            raise DirExists(f"target directory exists: {target}")
        target.parent.mkdir(parents=True, exist_ok=True)
        _git([
            "clone", "--depth", "1", "--branch", repo.branch,
            _clone_url(repo.url), str(target),
        ])
        return WorkspaceState(
            session_id=session_id,
            head_commit=_head_commit(target),
            dirty=False,
            path=str(target),
        )

    def persist_workspace(self, state: WorkspaceState, message: str | None = None) -> str | None:
        """Commit and push all workspace modifications.

        Returns the new head commit id, or ``None`` when the tree is
        unchanged (nothing to persist). A rejected push is retried once
        after fetch+rebase; a second rejection or a rebase conflict
        raises :class:`VcsError`.
        """
        workdir = Path(state.path)
        _git(["add", "-A"], cwd=workdir)
        if not _is_dirty(workdir):
            return None
        _git(["commit", "-m", message or autosave_message()], cwd=workdir)
        branch = self._remote_branch(workdir)
        try:
            _git(["push", "origin", f"HEAD:{branch}"], cwd=workdir)
        except VcsError:
            logger.info("push rejected for %s, retrying after rebase", state.session_id)
            _git(["fetch", "origin", branch], cwd=workdir)
            try:
                _git(["rebase", f"origin/{branch}"], cwd=workdir)
            except VcsError:
                _git(["rebase", "--abort"], cwd=workdir)
                raise
            _git(["push", "origin", f"HEAD:{branch}"], cwd=workdir)
        return _head_commit(workdir)

    def sync_workspace(self, state: WorkspaceState) -> WorkspaceState:
        """Fast-forward a clean workspace to the remote head."""
        workdir = Path(state.path)
        if _is_dirty(workdir):
            raise DirtyWorkspace(f"workspace has uncommitted changes: {workdir}")
        branch = self._remote_branch(workdir)
        _git(["fetch", "origin", branch], cwd=workdir)
        _git(["merge", "--ff-only", f"origin/{branch}"], cwd=workdir)
        return replace(state, head_commit=_head_commit(workdir), dirty=False)

    def inspect(self, state: WorkspaceState) -> WorkspaceState:
        """Re-read head and dirtiness from disk."""
        workdir = Path(state.path)
        return replace(state, head_commit=_head_commit(workdir), dirty=_is_dirty(workdir))

    def remote_head(self, repo: RepoRef) -> str:
        """Head commit of ``repo@branch`` without cloning."""
        out = _git(["ls-remote", _clone_url(repo.url), repo.branch]).stdout.strip()
        if not out:
            raise VcsError(f"branch {repo.branch!r} not found at {repo.url}")
        return out.split()[0]

    @staticmethod
    def _remote_branch(workdir: Path) -> str:
        # Shallow clones check out exactly the requested branch.
        out = _git(["rev-parse", "--abbrev-ref", "HEAD"], cwd=workdir).stdout.strip()
        if out == "HEAD":
            raise VcsError("workspace is on a detached HEAD")
        return out
