import pytest

from qcalc.engine.utils_logging import format_argv, qcalc_env, snippet

pytestmark = pytest.mark.unit


def test_snippet_keeps_head_and_tail():
    src = "t^2 + " * 50 + "1"
    out = snippet(src, keep=20)
    assert out.startswith(src[:10])
    assert out.endswith(src[-10:])
    assert "TRUNCATED" in out
    assert snippet("t") == "t"
    assert snippet(None) == ""


def test_format_argv_quotes_expressions():
    assert format_argv(["integ", "--f", "1/t^2"]) == "integ --f '1/t^2'"


def test_qcalc_env_filters_prefix():
    env = {"QCALC_MAX_TERMS": "10", "HOME": "/root", "QCALC_CONFIG_PATH": "x.toml"}
    assert qcalc_env(env) == {"QCALC_CONFIG_PATH": "x.toml", "QCALC_MAX_TERMS": "10"}
