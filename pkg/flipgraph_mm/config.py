"""flipgraph-mm configuration system with YAML support."""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import psutil
import yaml

logger = logging.getLogger(__name__)


# Default paths follow the XDG base directory layout
_xdg_config = os.environ.get("XDG_CONFIG_HOME", os.path.join(Path.home(), ".config"))
DEFAULT_CONFIG_PATH = Path(_xdg_config) / "flipgraph-mm" / "config.yaml"

_xdg_data = os.environ.get("XDG_DATA_HOME", os.path.join(Path.home(), ".local", "share"))
DEFAULT_RUN_DIR = os.path.join(_xdg_data, "flipgraph-mm", "runs")

CONFIG_ENV = "FLIPGRAPH_CONFIG"
RUN_DIR_ENV = "FLIPGRAPH_RUN_DIR"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class SearchConfig:
    """Parameters of a flip-graph random walk.

    ``escape_after`` is the number of steps without improvement after which the
    walker raises the rank with a split; it only does so while the rank stays
    within ``max_splits_above_best`` of the best rank. ``restart_after`` restarts
    the walker from the best scheme. ``workers=0`` means one walker per physical
    core.
    """

    max_steps: int = 1_000_000
    escape_after: int = 10_000
    max_splits_above_best: int = 3
    restart_after: int = 1_000_000
    seed: int = 0
    workers: int = 1
    target_rank: int | None = None
    sync_every: int = 1000

    def validate(self) -> None:
        """Raise ValueError on out-of-range values."""
        for name in ("max_steps", "max_splits_above_best", "seed"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be a non-negative int, got {value!r}")
        for name in ("escape_after", "restart_after", "sync_every"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive int, got {value!r}")
        if not isinstance(self.workers, int) or self.workers < 0:
            raise ValueError(f"workers must be a non-negative int, got {self.workers!r}")
        if self.target_rank is not None and (
            not isinstance(self.target_rank, int) or self.target_rank < 0
        ):
            raise ValueError(f"target_rank must be a non-negative int, got {self.target_rank!r}")

    def resolved_workers(self) -> int:
        """Worker count with ``0`` replaced by the number of physical cores."""
        if self.workers:
            return self.workers
        return psutil.cpu_count(logical=False) or os.cpu_count() or 1

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SearchConfig:
        """Create a search config from a dictionary; invalid values fall back to defaults."""
        defaults = cls()
        values: dict[str, Any] = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            default = getattr(defaults, f.name)
            if f.name == "target_rank":
                if value is not None and (not isinstance(value, int) or value < 0):
                    logger.warning(f"Invalid target_rank: {value!r}, using default None")
                    value = None
            else:
                minimum = 0 if f.name in ("max_steps", "max_splits_above_best", "seed", "workers") else 1
                if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
                    logger.warning(f"Invalid {f.name}: {value!r}, using default {default}")
                    value = default
            values[f.name] = value
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class LiftConfig:
    """Parameters of Hensel lifting."""

    attempts: int = 10
    k_max: int = 32
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LiftConfig:
        attempts = data.get("attempts", 10)
        if not isinstance(attempts, int) or attempts < 1:
            logger.warning(f"Invalid attempts: {attempts!r}, using default 10")
            attempts = 10
        k_max = data.get("k_max", 32)
        if not isinstance(k_max, int) or not 2 <= k_max <= 62:
            logger.warning(f"Invalid k_max: {k_max!r}, using default 32")
            k_max = 32
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            logger.warning(f"Invalid seed: {seed!r}, using default 0")
            seed = 0
        return cls(attempts=attempts, k_max=k_max, seed=seed)


@dataclass
class LoggingConfig:
    """Console and run-log configuration."""

    level: str = "INFO"
    file_max_bytes: int = 5 * 1024 * 1024
    file_backups: int = 3

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LoggingConfig:
        level = str(data.get("level", "INFO")).upper()
        if level not in LOG_LEVELS:
            logger.warning(f"Invalid log level: {level!r}, using default 'INFO'")
            level = "INFO"
        max_bytes = data.get("file_max_bytes", 5 * 1024 * 1024)
        if not isinstance(max_bytes, int) or max_bytes <= 0:
            logger.warning(f"Invalid file_max_bytes: {max_bytes!r}, using default 5 MiB")
            max_bytes = 5 * 1024 * 1024
        backups = data.get("file_backups", 3)
        if not isinstance(backups, int) or backups < 0:
            logger.warning(f"Invalid file_backups: {backups!r}, using default 3")
            backups = 3
        return cls(level=level, file_max_bytes=max_bytes, file_backups=backups)


@dataclass
class ToolkitConfig:
    """Complete flipgraph-mm configuration."""

    search: SearchConfig = field(default_factory=SearchConfig)
    lift: LiftConfig = field(default_factory=LiftConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    run_dir: str = DEFAULT_RUN_DIR

    @classmethod
    def default(cls) -> ToolkitConfig:
        """Create configuration with defaults; ``FLIPGRAPH_RUN_DIR`` overrides the run dir."""
        return cls(run_dir=os.environ.get(RUN_DIR_ENV) or DEFAULT_RUN_DIR)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ToolkitConfig:
        """Create configuration from dictionary."""
        config = cls.default()
        search_data = data.get("search", {})
        if isinstance(search_data, dict):
            config.search = SearchConfig.from_dict(search_data)
        lift_data = data.get("lift", {})
        if isinstance(lift_data, dict):
            config.lift = LiftConfig.from_dict(lift_data)
        logging_data = data.get("logging", {})
        if isinstance(logging_data, dict):
            config.logging = LoggingConfig.from_dict(logging_data)
        run_dir = data.get("run_dir")
        if run_dir and not os.environ.get(RUN_DIR_ENV):
            config.run_dir = str(run_dir)
        return config

    @classmethod
    def from_yaml(cls, path: Path | str) -> ToolkitConfig:
        """Load configuration from YAML file."""
        path = Path(path)

        if not path.exists():
            return cls.default()

        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as e:
            logger.warning(f"Config file has syntax errors, using defaults: {e}")
            data = {}
        if not isinstance(data, dict):
            data = {}
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        """Convert configuration to dictionary."""
        return {
            "search": self.search.to_dict(),
            "lift": asdict(self.lift),
            "logging": asdict(self.logging),
            "run_dir": self.run_dir,
        }

    def to_yaml(self) -> str:
        """Convert configuration to YAML string."""
        return yaml.dump(self.to_dict(), default_flow_style=False, sort_keys=False)


def load_config(path: Path | str | None = None) -> ToolkitConfig:
    """
    Load configuration from file or environment.

    Priority:
    1. Explicit path argument
    2. FLIPGRAPH_CONFIG environment variable
    3. ~/.config/flipgraph-mm/config.yaml
    4. Default configuration
    """
    if path is not None:
        if not Path(path).exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        return ToolkitConfig.from_yaml(path)

    env_path = os.environ.get(CONFIG_ENV)
    if env_path:
        return ToolkitConfig.from_yaml(env_path)

    if DEFAULT_CONFIG_PATH.exists():
        return ToolkitConfig.from_yaml(DEFAULT_CONFIG_PATH)

    return ToolkitConfig.default()


def create_default_config(path: Path | str | None = None) -> Path:
    """Create default configuration file."""
    path = Path(path) if path else DEFAULT_CONFIG_PATH
    path.parent.mkdir(parents=True, exist_ok=True)

    config = ToolkitConfig.default()
    path.write_text(config.to_yaml())

    return path
