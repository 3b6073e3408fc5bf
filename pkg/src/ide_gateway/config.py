"""Service configuration: one JSON file, strict keys, documented defaults.

Every tunable the backend honors lives here; absent keys fall back to
the shipped defaults (5-minute sweep, 60-minute idle threshold, 1 s /
2 s debounce delays, the balancer weights, and the per-language run
commands). Unknown keys are rejected with the offending key path so
typos never silently change behavior.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic.alias_generators import to_camel

from .errors import ConfigParseError, ConfigValidationError
from .gateway.debounce import DebounceConfig
from .model import LanguageId
from .pool import BalancerWeights
from .sandbox import MiB, ResourceLimits
from .sessions import CleanupPolicy


class _Section(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True, extra="forbid")


class CleanupSection(_Section):
    sweep_interval: float = Field(default=300.0, gt=0, description="seconds between sweeps")
    idle_threshold: float = Field(default=3600.0, gt=0, description="seconds of inactivity before removal")

    @model_validator(mode="after")
    def _threshold_covers_interval(self):
        if self.idle_threshold < self.sweep_interval:
            raise ValueError("idleThreshold must be >= sweepInterval")
        return self

    def policy(self) -> CleanupPolicy:
        return CleanupPolicy(sweep_interval_s=self.sweep_interval, idle_threshold_s=self.idle_threshold)


class DebounceSection(_Section):
    interactive: int = Field(default=1000, ge=0, description="hold delay in ms")
    file_change: int = Field(default=2000, ge=0, description="hold delay in ms")

    def debounce_config(self) -> DebounceConfig:
        return DebounceConfig(interactive_ms=self.interactive, file_change_ms=self.file_change)


class BalancerSection(_Section):
    sessions_weight: float = Field(default=0.4, ge=0)
    cpu_weight: float = Field(default=0.3, ge=0)
    memory_weight: float = Field(default=0.2, ge=0)
    load_weight: float = Field(default=0.1, ge=0)
    load_cap: float = Field(default=8.0, gt=0)
    report_interval: float = Field(default=10.0, gt=0, description="seconds between node reports")
    # Health window defaults to 3x the report interval.
    staleness_window: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _some_weight(self):
        if not any((self.sessions_weight, self.cpu_weight, self.memory_weight, self.load_weight)):
            raise ValueError("at least one balancer weight must be positive")
        return self

    def weights(self) -> BalancerWeights:
        return BalancerWeights(
            sessions=self.sessions_weight,
            cpu=self.cpu_weight,
            memory=self.memory_weight,
            load=self.load_weight,
            load_cap=self.load_cap,
        )

    def staleness_window_s(self) -> float:
        return self.staleness_window if self.staleness_window is not None else 3 * self.report_interval


class SandboxSection(_Section):
    backend: str = Field(default="process", pattern="^(process|container)$")
    cpu_quota: float = Field(default=1.0, gt=0)
    memory_limit: int = Field(default=512 * MiB, gt=0, description="bytes")
    wall_timeout: float = Field(default=900.0, gt=0, description="seconds")
    network_access: bool = False
    images: dict[str, str] = Field(default_factory=dict)

    def limits(self) -> ResourceLimits:
        return ResourceLimits(
            cpu_quota=self.cpu_quota,
            memory_limit=self.memory_limit,
            wall_timeout_s=self.wall_timeout,
            network_access=self.network_access,
        )


class VcsSection(_Section):
    default_branch: str = "main"


class ServiceConfig(_Section):
    listen_address: str = "127.0.0.1:8000"
    sessions_root: str = "./ide-sessions"
    auth_token: str | None = None
    cleanup: CleanupSection = Field(default_factory=CleanupSection)
    debounce: DebounceSection = Field(default_factory=DebounceSection)
    balancer: BalancerSection = Field(default_factory=BalancerSection)
    run_profiles: dict[str, str] = Field(
        default_factory=lambda: {"java": "mvn clean test", "python": "pytest", "c": "make test"}
    )
    sandbox: SandboxSection = Field(default_factory=SandboxSection)
    vcs: VcsSection = Field(default_factory=VcsSection)

    @model_validator(mode="after")
    def _known_languages(self):
        for key in self.run_profiles:
            LanguageId.parse(key)
        return self

    def run_commands(self) -> dict[LanguageId, str]:
        return {LanguageId(key): value for key, value in self.run_profiles.items()}


def _error_path(error: dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def parse_config(data: dict) -> ServiceConfig:
    """Validate a config mapping; raises with the offending key path."""
    try:
        return ServiceConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigValidationError(first["msg"], path=_error_path(first)) from exc


def load_config(path: str | Path) -> ServiceConfig:
    """Load the JSON config file, applying defaults for absent keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError("config root must be a JSON object")
    return parse_config(data)
