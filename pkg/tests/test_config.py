import pytest

from keyscan.config import DEFAULT_NEEDLES, DEFAULT_SIGNATURE_DB, Config, load_config, with_overrides
from keyscan.errors import ConfigError


def test_defaults():
    config = load_config()
    assert config == Config()
    assert config.needle_set == list(DEFAULT_NEEDLES)
    assert config.timeout_seconds == 1800.0
    assert config.resolved_signature_db == DEFAULT_SIGNATURE_DB
    assert not config.cha_enabled


def test_file_values(tmp_path):
    path = tmp_path / "keyscan.conf"
    path.write_text("KEYSCAN_BFS_NODE_LIMIT=50\nKEYSCAN_CHA_ENABLED=true\nKEYSCAN_NEEDLE_SET=a,b\n", encoding="utf-8")
    config = load_config(path)
    assert config.bfs_node_limit == 50
    assert config.cha_enabled
    assert config.needle_set == ["a", "b"]


def test_environment_beats_file(tmp_path, monkeypatch):
    path = tmp_path / "keyscan.conf"
    path.write_text("KEYSCAN_TOP_N=3\n", encoding="utf-8")
    monkeypatch.setenv("KEYSCAN_TOP_N", "7")
    assert load_config(path).top_n == 7


def test_flags_beat_environment(monkeypatch):
    monkeypatch.setenv("KEYSCAN_WORKERS", "4")
    assert load_config(workers=2).workers == 2
    assert load_config(workers=None).workers == 4


@pytest.mark.parametrize("overrides", [
    {"bfs_node_limit": 0},
    {"workers": 0},
    {"per_app_timeout_minutes": 0},
    {"needle_set": []},
    {"no_such_field": 1},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        load_config(**overrides)


def test_uncastable_environment_value(monkeypatch):
    monkeypatch.setenv("KEYSCAN_BFS_NODE_LIMIT", "many")
    with pytest.raises(ConfigError):
        load_config()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf")


def test_with_overrides():
    config = with_overrides(Config(), top_n=3, workers=None)
    assert (config.top_n, config.workers) == (3, 1)
    assert config.snapshot()["top_n"] == 3
