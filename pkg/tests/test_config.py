import pytest

from utils.config import Settings, load_settings
from utils.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    # keep a developer's .env and RADS_* variables out of these tests
    monkeypatch.chdir(tmp_path)
    for name in ("RADS_RHO", "RADS_MEMORY_BUDGET", "RADS_EMIT", "RADS_TRANSPORT"):
        monkeypatch.delenv(name, raising=False)


def test_defaults_come_from_config_toml():
    settings = load_settings()
    assert settings == Settings()


def test_overrides_win(monkeypatch):
    monkeypatch.setenv("RADS_MEMORY_BUDGET", "4096")
    settings = load_settings(overrides={"memory_budget": 128, "rho": None})
    assert settings.memory_budget == 128
    assert settings.rho == 1.0


def test_environment_beats_file(monkeypatch):
    monkeypatch.setenv("RADS_MEMORY_BUDGET", "4096")
    monkeypatch.setenv("RADS_EMIT", "results")
    settings = load_settings()
    assert settings.memory_budget == 4096
    assert settings.emit == "results"
    assert load_settings(use_env=False).memory_budget == 0


def test_dotenv_file_is_read(tmp_path, monkeypatch):
    # registers RADS_RHO for removal once the test ends
    monkeypatch.setenv("RADS_RHO", "0.5")
    monkeypatch.delenv("RADS_RHO")
    (tmp_path / ".env").write_text("RADS_RHO=2.5\n")
    assert load_settings().rho == 2.5


def test_process_environment_beats_dotenv(tmp_path, monkeypatch):
    monkeypatch.setenv("RADS_RHO", "1.5")
    env_file = tmp_path / "other.env"
    env_file.write_text("RADS_RHO=2.5\n")
    assert load_settings(env_file=str(env_file)).rho == 1.5


def test_custom_config_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[planner]\nrho = 3.0\n[cache]\ncache_budget = 100\n[extra]\nkey = 1\n')
    settings = load_settings(str(path))
    assert settings.rho == 3.0
    assert settings.cache_budget == 100


@pytest.mark.parametrize("overrides", [
    {"rho": 0},
    {"memory_budget": -5},
    {"transport": "udp"},
    {"emit": "some"},
    {"rho": "fast"},
    {"unknown_knob": 1},
    {"plan_strategy": "greedy"},
    {"done_timeout_s": 0},
    {"connect_retry_s": -1},
])
def test_invalid_settings(overrides):
    with pytest.raises(ConfigError):
        load_settings(overrides=overrides, use_env=False)


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(str(tmp_path / "absent.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("[planner\nrho = ")
    with pytest.raises(ConfigError):
        load_settings(str(bad))


def test_transport_timeouts_and_plan_strategy_from_file(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[planner]\nstrategy = "rans"\n[transport]\ndone_timeout_s = 12.5\nconnect_retry_s = 2\n')
    settings = load_settings(str(path), use_env=False)
    assert settings.plan_strategy == "rans"
    assert settings.done_timeout_s == 12.5
    assert settings.connect_retry_s == 2.0
    assert load_settings(use_env=False).done_timeout_s == 300.0
