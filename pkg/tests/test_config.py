from pathlib import Path

from pydantic import ValidationError
import pytest

from qcalc.engine.config import (
    CONFIG_ENV,
    MAX_TERMS_ENV,
    AppConfig,
    dump_config,
    load_config,
    write_default_config,
)
from qcalc.engine.numerics import SeriesPolicy


def test_config_defaults_when_missing(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv(CONFIG_ENV, str(tmp_path / "nope.toml"))
    cfg = load_config()
    assert cfg.seed == 0
    assert cfg.series.max_terms == 100_000
    assert cfg.series.abs_tol == 1e-12
    assert cfg.expr.match_eps == 1e-12
    assert cfg.variational.lattice_depth == 24
    assert cfg.output.format == "json"


def test_config_empty_file(tmp_path: Path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text("")
    assert load_config(cfg_path) == AppConfig()


def test_config_reads_kebab_keys(config_file: Path):
    cfg = load_config(config_file)
    assert cfg.seed == 7
    assert cfg.series.abs_tol == 1e-13
    assert cfg.series.max_terms == 5000
    assert cfg.variational.lattice_depth == 8


def test_config_env_path(config_file: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv(CONFIG_ENV, str(config_file))
    assert load_config().seed == 7


def test_demo_config_loads(demo_dir: Path):
    cfg = load_config(demo_dir / "config.toml")
    assert cfg.seed == 42
    assert cfg.witness.grid == 512


def test_explicit_missing_path_raises(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.toml")


def test_max_terms_env_wins(config_file: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv(MAX_TERMS_ENV, "123")
    cfg = load_config(config_file)
    assert cfg.series.max_terms == 123
    assert SeriesPolicy.from_config(cfg).max_terms == 123


def test_config_invalid_values_raise(tmp_path: Path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text("""
[series]
max-terms = 0
""")
    with pytest.raises(ValidationError, match="greater than 0"):
        load_config(cfg_path)


def test_config_window_must_fit(tmp_path: Path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text("""
[series]
max-terms = 4
stagnation-window = 8
""")
    with pytest.raises(ValidationError, match="stagnation-window"):
        load_config(cfg_path)


def test_config_rejects_unknown_keys(tmp_path: Path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text("""
[server]
secret_key = "x"
""")
    with pytest.raises(ValidationError):
        load_config(cfg_path)


def test_config_rejects_bad_output_format(tmp_path: Path):
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text("""
[output]
format = "xml"
""")
    with pytest.raises(ValidationError):
        load_config(cfg_path)


def test_dump_then_load(tmp_path: Path, config_file: Path):
    cfg = load_config(config_file)
    out = tmp_path / "dumped.toml"
    out.write_text(dump_config(cfg))
    assert load_config(out) == cfg


def test_write_default_config(tmp_path: Path):
    target = tmp_path / "sub" / "config.toml"
    assert write_default_config(target) == target
    assert load_config(target) == AppConfig()
    with pytest.raises(FileExistsError):
        write_default_config(target)
    write_default_config(target, overwrite=True)
