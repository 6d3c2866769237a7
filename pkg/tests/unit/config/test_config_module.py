import pytest

from gpehom.core.config import (
    ConfigError,
    GpehomSettings,
    format_run_config,
    load_run_config,
    parse_config_text,
    parse_run_config,
)


def test_settings_from_env(monkeypatch):
    for k in ["GPEHOM_LOG_LEVEL", "GPEHOM_DENSE_CAP", "GPEHOM_WORKERS", "GPEHOM_OUT_DIR"]:
        monkeypatch.delenv(k, raising=False)
    cfg = GpehomSettings.from_env()
    assert cfg == GpehomSettings()

    monkeypatch.setenv("GPEHOM_LOG_LEVEL", "debug")
    monkeypatch.setenv("GPEHOM_WORKERS", "4")
    monkeypatch.setenv("GPEHOM_OUT_DIR", "/tmp/gpe")
    cfg = GpehomSettings.from_env()
    assert cfg.log_level == "DEBUG"
    assert cfg.workers == 4
    assert cfg.out_dir == "/tmp/gpe"


def test_settings_ignore_bad_integers():
    cfg = GpehomSettings.from_env({"GPEHOM_DENSE_CAP": "lots", "GPEHOM_WORKERS": "0"})
    assert cfg.dense_cap == 4096
    assert cfg.workers == 1


def test_parse_config_text_comments_and_quotes():
    text = """
    # reproduction run
    dim = 1
    x_min = -2.0   # left end
    paths = "1-9"
    kind = 'diag'
    """
    values = parse_config_text(text)
    assert values == {"dim": "1", "x_min": "-2.0", "paths": "1-9", "kind": "diag"}


def test_hash_inside_quotes_is_kept():
    text = 'potential_file = "runs#1/trap.csv"  # measured trap\nlabel = \'a # b\'\n'
    assert parse_config_text(text) == {"potential_file": "runs#1/trap.csv", "label": "a # b"}


@pytest.mark.parametrize("text", [
    'potential_file = "runs/trap.csv\n',
    'potential_file = "runs/trap.csv" extra\n',
])
def test_malformed_quoted_values(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_format_quotes_values_with_hash(smoke_1d_values):
    values = dict(smoke_1d_values, potential="tabulated")
    text = "".join(f"{k} = {v}\n" for k, v in values.items())
    text += 'potential_file = "runs#1/trap.csv"\n'
    cfg = parse_run_config(text)
    assert cfg.potential_file == "runs#1/trap.csv"
    assert parse_run_config(format_run_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "dim = 1\ndim = 2\n",
    "this is not a setting\n",
])
def test_parse_config_text_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_parse_run_config(smoke_1d_values):
    text = "".join(f"{k} = {v}\n" for k, v in smoke_1d_values.items())
    cfg = parse_run_config(text)
    assert cfg.n == 20 and cfg.beta == 1.0
    assert cfg.path_indices == [1, 2, 3]
    assert cfg.resolved_kind == "diag"
    trace = cfg.to_trace_config()
    assert trace.ds0 == 0.01 and trace.newton_tol == 1e-10


@pytest.mark.parametrize("extra", [
    "bogus = 1\n",
    "kind = blocktridiag\n",
    "ds0 = 1.0\n",
    "paths = 3-1\n",
    "paths = 0\n",
    "x_max = -5\n",
    "beta = -1\n",
])
def test_invalid_run_configs(smoke_1d_values, extra):
    values = dict(smoke_1d_values)
    key = extra.split("=")[0].strip()
    values.pop(key, None)
    text = "".join(f"{k} = {v}\n" for k, v in values.items()) + extra
    with pytest.raises(ConfigError):
        parse_run_config(text)


def test_2d_requires_y_bounds():
    with pytest.raises(ConfigError):
        parse_run_config("dim = 2\nx_min = 0\nx_max = 1\nm = 6\nn = 6\n")


def test_tabulated_needs_file(smoke_1d_values):
    text = "".join(f"{k} = {v}\n" for k, v in smoke_1d_values.items()) + "potential = tabulated\n"
    with pytest.raises(ConfigError):
        parse_run_config(text)


def test_format_round_trip(smoke_2d_values):
    text = "".join(f"{k} = {v}\n" for k, v in smoke_2d_values.items()) + "ds_min = 1e-9\nkind = pentadiag\n"
    cfg = parse_run_config(text)
    again = parse_run_config(format_run_config(cfg))
    assert again.model_dump() == cfg.model_dump()


def test_load_with_overrides(write_config, smoke_1d_values):
    path = write_config(**smoke_1d_values)
    cfg = load_run_config(path, {"seed": 5, "paths": "2", "sigma": None})
    assert cfg.seed == 5
    assert cfg.path_indices == [2]
    assert cfg.sigma == 0.5


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(tmp_path / "absent.conf")


def test_echo_omits_workers(smoke_1d_values):
    cfg = parse_run_config("".join(f"{k} = {v}\n" for k, v in smoke_1d_values.items()) + "workers = 4\n")
    assert cfg.workers == 4
    assert "workers" not in cfg.echo()
    assert "y_min" not in cfg.echo()
