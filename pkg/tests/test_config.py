import pytest

from circlift.config import LoadConfig
from circlift.exceptions import ConfigError


@pytest.fixture(autouse=True)
def _no_user_config(tmp_path, monkeypatch):
    monkeypatch.setenv('CIRCLIFT_CONFIG', str(tmp_path / 'missing.conf'))


def write_cfg(tmp_path, text):
    path = tmp_path / 'circlift.conf'
    path.write_text(text)
    return str(path)


def test_defaults():
    cfg = LoadConfig()
    assert cfg.log_verbosity == 'info'
    assert cfg.log_file == ''
    assert cfg.max_outer_iters == 50
    assert cfg.cg_tol == 1e-8
    assert cfg.pin_boundary is True
    assert cfg.shared_start is True
    assert cfg.bounded_levels == 64
    assert cfg.max_charges == 8
    assert cfg.max_terminals == 5
    assert cfg.seed == 0


def test_values_from_file(tmp_path):
    path = write_cfg(tmp_path, "[App]\nlog_verbosity = debug\n\n[Solver]\nmax_outer_iters = 7\n"
                               "pin_boundary = no\nshared_start = off\n\n[Transport]\nseed = 42\n")
    cfg = LoadConfig(path)
    assert cfg.log_verbosity == 'debug'
    assert cfg.max_outer_iters == 7
    assert cfg.pin_boundary is False
    assert cfg.shared_start is False
    assert cfg.seed == 42
    assert cfg.energy_tol == 1e-6


def test_env_var_picks_the_file(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, "[Lifting]\nresidual_tol = 1e-7\n")
    monkeypatch.setenv('CIRCLIFT_CONFIG', path)
    assert LoadConfig().residual_tol == 1e-7


def test_env_vars_expand_in_values(tmp_path, monkeypatch):
    monkeypatch.setenv('CIRCLIFT_LOG_DIR', str(tmp_path))
    cfg = LoadConfig(write_cfg(tmp_path, "[App]\nlog_file = $CIRCLIFT_LOG_DIR/circlift.log\n"))
    assert cfg.log_file == f"{tmp_path}/circlift.log"


@pytest.mark.parametrize('text', [
    "[App]\nlog_verbosity = loud\n",
    "[Solver]\ncg_tol = 0\n",
    "[Solver]\nmax_outer_iters = many\n",
    "[Transport]\nsteiner_tol = -1e-8\n",
    "no section header\n",
])
def test_bad_values(tmp_path, text):
    with pytest.raises(ConfigError):
        LoadConfig(write_cfg(tmp_path, text))


def test_missing_explicit_path(tmp_path):
    with pytest.raises(ConfigError):
        LoadConfig(str(tmp_path / 'nope.conf'))
