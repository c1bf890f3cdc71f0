"""Tests for flipgraph_mm.config: defaults, validation and YAML loading."""

import logging
from pathlib import Path

import pytest

from flipgraph_mm.config import (
    CONFIG_ENV,
    RUN_DIR_ENV,
    LiftConfig,
    LoggingConfig,
    SearchConfig,
    ToolkitConfig,
    create_default_config,
    load_config,
)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.delenv(RUN_DIR_ENV, raising=False)


def test_default_search_parameters() -> None:
    """Defaults should describe a long single-worker walk without a target."""
    config = ToolkitConfig.default()
    assert config.search.max_steps == 1_000_000
    assert config.search.workers == 1
    assert config.search.target_rank is None
    assert config.lift.k_max == 32
    assert config.logging.level == "INFO"
    config.search.validate()


def test_from_dict_roundtrip() -> None:
    """to_dict -> from_dict should preserve config values."""
    original = ToolkitConfig.default()
    original.search.target_rank = 23
    original.search.seed = 7
    original.lift.attempts = 4
    data = original.to_dict()
    restored = ToolkitConfig.from_dict(data)

    assert restored.to_dict() == data


def test_load_config_nonexistent_path() -> None:
    """Loading from an explicit nonexistent path should raise FileNotFoundError."""
    with pytest.raises(FileNotFoundError, match="Config file not found"):
        load_config("/tmp/nonexistent_flipgraph_config_xyz_12345.yaml")


def test_to_yaml_produces_valid_output() -> None:
    """to_yaml should emit every top-level section."""
    yaml_str = ToolkitConfig.default().to_yaml()
    assert "search" in yaml_str
    assert "lift" in yaml_str
    assert "logging" in yaml_str
    assert "run_dir" in yaml_str


# ---------------------------------------------------------------------------
# SearchConfig
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "field,value",
    [
        ("max_steps", -1),
        ("escape_after", 0),
        ("restart_after", 0),
        ("sync_every", 0),
        ("workers", -2),
        ("target_rank", -1),
    ],
)
def test_search_validate_rejects(field: str, value: int) -> None:
    """validate names the offending field."""
    config = SearchConfig(**{field: value})  # type: ignore[arg-type]
    with pytest.raises(ValueError, match=field):
        config.validate()


def test_search_from_dict_falls_back(caplog: pytest.LogCaptureFixture) -> None:
    """Invalid values are replaced by defaults with a warning."""
    with caplog.at_level(logging.WARNING):
        config = SearchConfig.from_dict(
            {"max_steps": "lots", "escape_after": 0, "seed": 5, "target_rank": -3, "workers": True}
        )
    assert config.max_steps == SearchConfig().max_steps
    assert config.escape_after == SearchConfig().escape_after
    assert config.seed == 5
    assert config.target_rank is None
    assert config.workers == SearchConfig().workers
    assert "Invalid max_steps" in caplog.text
    assert "Invalid target_rank" in caplog.text


def test_search_from_dict_ignores_unknown_keys() -> None:
    """Unknown keys are ignored."""
    config = SearchConfig.from_dict({"temperature": 0.5, "target_rank": 7})
    assert config.target_rank == 7


def test_resolved_workers() -> None:
    """workers=0 resolves to at least one walker."""
    assert SearchConfig(workers=3).resolved_workers() == 3
    assert SearchConfig(workers=0).resolved_workers() >= 1


# ---------------------------------------------------------------------------
# LiftConfig / LoggingConfig
# ---------------------------------------------------------------------------


def test_lift_from_dict_falls_back(caplog: pytest.LogCaptureFixture) -> None:
    """Invalid lift values fall back to their defaults."""
    with caplog.at_level(logging.WARNING):
        config = LiftConfig.from_dict({"attempts": 0, "k_max": 99, "seed": 3})
    assert config == LiftConfig(attempts=10, k_max=32, seed=3)
    assert "Invalid k_max" in caplog.text


def test_logging_from_dict_normalizes_level(caplog: pytest.LogCaptureFixture) -> None:
    """Log levels are upper-cased; unknown ones fall back to INFO."""
    assert LoggingConfig.from_dict({"level": "debug"}).level == "DEBUG"
    with caplog.at_level(logging.WARNING):
        config = LoggingConfig.from_dict({"level": "chatty", "file_backups": -1})
    assert config.level == "INFO"
    assert config.file_backups == 3
    assert "Invalid log level" in caplog.text


# ---------------------------------------------------------------------------
# Edge case tests for ToolkitConfig.from_yaml / load_config
# ---------------------------------------------------------------------------


def test_from_yaml_missing_file_returns_defaults() -> None:
    """A missing default file means built-in defaults."""
    config = ToolkitConfig.from_yaml("/tmp/definitely_does_not_exist_flipgraph_99999.yaml")
    assert config.to_dict() == ToolkitConfig.default().to_dict()


def test_from_yaml_partial_file(tmp_path: Path) -> None:
    """Sections missing from the file keep their defaults."""
    path = tmp_path / "config.yaml"
    path.write_text("search:\n  workers: 4\n")
    config = ToolkitConfig.from_yaml(path)
    assert config.search.workers == 4
    assert config.search.escape_after == SearchConfig().escape_after
    assert config.lift == LiftConfig()


def test_from_yaml_invalid_yaml(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    """YAML syntax errors log a warning and use the defaults."""
    path = tmp_path / "config.yaml"
    path.write_text("search: [unclosed\n")
    with caplog.at_level(logging.WARNING):
        config = ToolkitConfig.from_yaml(path)
    assert config.to_dict() == ToolkitConfig.default().to_dict()
    assert "syntax errors" in caplog.text


def test_from_yaml_non_mapping(tmp_path: Path) -> None:
    """A YAML document that is not a mapping is ignored."""
    path = tmp_path / "config.yaml"
    path.write_text("- just\n- a list\n")
    assert ToolkitConfig.from_yaml(path).search == SearchConfig()


def test_run_dir_env_overrides_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """FLIPGRAPH_RUN_DIR beats run_dir from the file."""
    path = tmp_path / "config.yaml"
    path.write_text("run_dir: /from/file\n")
    assert ToolkitConfig.from_yaml(path).run_dir == "/from/file"
    monkeypatch.setenv(RUN_DIR_ENV, str(tmp_path / "env-runs"))
    assert ToolkitConfig.from_yaml(path).run_dir == str(tmp_path / "env-runs")


def test_load_config_from_env(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """FLIPGRAPH_CONFIG points load_config at another file."""
    path = tmp_path / "env.yaml"
    path.write_text("lift:\n  attempts: 2\n")
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config().lift.attempts == 2


def test_create_default_config(tmp_path: Path) -> None:
    """create_default_config writes the defaults, creating parent directories."""
    path = create_default_config(tmp_path / "nested" / "config.yaml")
    assert path.exists()
    loaded = load_config(path)
    assert loaded.to_dict() == ToolkitConfig.default().to_dict()
