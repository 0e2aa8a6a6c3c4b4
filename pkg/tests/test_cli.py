import json
from pathlib import Path

import pytest

from qcalc.engine.config import MAX_TERMS_ENV

pytestmark = pytest.mark.integration

MIXED = "union(interval(0,1), points(2,4))"


# ---------------------------------------------------------------- deriv / integ


def test_deriv_hahn(cli):
    code, rep = cli("deriv", "--op", "hahn", "--q", "1/2", "--omega", "1", "--f", "t^2", "--t", "4")
    assert code == 0
    assert rep["command"] == "deriv"
    assert rep["value"] == pytest.approx(7.0, abs=1e-12)
    assert rep["inputs"]["op"] == "hahn"
    assert rep["converged"] is True


def test_deriv_on_grid_as_csv(cli):
    code, out = cli("deriv", "--op", "h-forward", "--h", "1", "--f", "t^2", "--grid", "0:2:3", "--output", "csv")
    assert code == 0
    assert out.splitlines() == ["t,value", "0.0,1.0", "1.0,3.0", "2.0,5.0"]


def test_deriv_with_override(cli):
    code, rep = cli("deriv", "--op", "q", "--q", "0.5", "--f", "0", "--override", "t=1/2:1", "--t", "1")
    assert code == 0
    # (f(1/2) − f(1)) / (1/2 − 1)
    assert rep["value"] == pytest.approx(-2.0)


@pytest.mark.golden
def test_integ_ab_sym_ten_ninths(cli):
    code, rep = cli("integ", "--op", "ab-sym", "--alpha", "2", "--beta", "2", "--f", "1/t^2", "--a", "1", "--b", "3")
    assert code == 0
    assert rep["value"] == pytest.approx(10.0 / 9.0, abs=1e-12)
    assert rep["details"]["terms_used"] > 0


@pytest.mark.golden
def test_integ_diamond_on_mixed_scale(cli):
    code, rep = cli("integ", "--op", "diamond", "--scale", MIXED, "--f", "1", "--a", "0", "--b", "4")
    assert code == 0
    assert rep["value"] == pytest.approx(17.0 / 3.0, abs=1e-9)


def test_integ_table_output(cli):
    code, out = cli("integ", "--op", "jackson", "--q", "0.5", "--f", "t", "--a", "0", "--b", "1", "--output", "table")
    assert code == 0
    assert "integ" in out


# ---------------------------------------------------------------- exit codes


@pytest.mark.parametrize(
    "args",
    [
        ("integ", "--op", "ab-sym", "--alpha", "1", "--beta", "1", "--f", "t"),
        ("deriv", "--op", "nope", "--f", "t", "--t", "1"),
        ("deriv", "--op", "hahn", "--f", "t", "--t", "1"),
        ("deriv", "--op", "hahn", "--q", "2", "--f", "t", "--t", "1"),
        ("deriv", "--bogus"),
        ("deriv", "--op", "q", "--q", "0.5", "--f", "t +", "--t", "1"),
    ],
)
def test_usage_errors_exit_one(cli, args):
    code, _ = cli(*args)
    assert code == 1


def test_missing_config_file_is_usage_error(cli, tmp_path: Path):
    code, _ = cli("-c", str(tmp_path / "nope.toml"), "deriv", "--op", "q", "--q", "0.5", "--f", "t", "--t", "1")
    assert code == 1


@pytest.mark.parametrize(
    "args",
    [
        ("ts-query", "--scale", MIXED, "--t", "3"),
        ("deriv", "--op", "hahn-higher", "--q", "0.5", "--r", "7", "--f", "t", "--t", "1"),
        ("deriv", "--op", "h-forward", "--h", "1", "--f", "1/t", "--t", "-1"),
        ("integ", "--op", "h", "--h", "0.3", "--f", "t", "--a", "0", "--b", "1"),
    ],
)
def test_domain_errors_exit_two(cli, args):
    code, _ = cli(*args)
    assert code == 2


def test_non_convergence_exits_three_with_partial_result(cli):
    code, rep = cli("integ", "--op", "alpha-forward", "--alpha", "1", "--f", "1", "--a", "0", "--b", "2.5", "--max-terms", "100")
    assert code == 3
    assert rep["converged"] is False
    # 两条尾巴各用满 100 项
    assert rep["details"]["terms_used"] == 200
    assert rep["warnings"]


def test_aligned_bounds_do_not_hide_divergent_tails(cli):
    code, rep = cli("integ", "--op", "alpha-forward", "--alpha", "1", "--f", "1", "--a", "0", "--b", "1")
    assert code == 3
    assert rep["converged"] is False
    assert rep["value"] == 1.0


def test_max_terms_env(cli, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv(MAX_TERMS_ENV, "50")
    code, rep = cli("integ", "--op", "alpha-forward", "--alpha", "1", "--f", "1", "--a", "0", "--b", "2.5")
    assert code == 3
    assert rep["details"]["terms_used"] == 100


# ---------------------------------------------------------------- variational commands


@pytest.mark.golden
def test_el_check_job_file(cli, demo_dir: Path):
    code, rep = cli("el-check", "--job", str(demo_dir / "problemaq.json"))
    assert code == 0
    assert rep["value"] <= 1e-8
    assert rep["details"]["functional_value"] == pytest.approx(2.0, abs=1e-10)
    assert rep["details"]["assumed"]
    assert rep["warnings"] == []


@pytest.mark.golden
def test_el_check_piecewise_minimizer(cli, demo_dir: Path):
    code, rep = cli("el-check", "--job", str(demo_dir / "hahn_higher_example.json"))
    assert code == 0
    assert rep["value"] <= 1e-7
    assert rep["details"]["functional_value"] == pytest.approx(0.0, abs=1e-12)


def test_el_check_flags_override_job(cli, demo_dir: Path):
    code, rep = cli("el-check", "--job", str(demo_dir / "problemaq.json"), "--y", "t^2")
    assert code == 0
    assert rep["value"] > 1e-3
    assert rep["warnings"]


def test_el_check_from_flags(cli):
    code, rep = cli(
        "el-check",
        "--flavor",
        "q_symmetric",
        "--q",
        "0.5",
        "--L",
        "1+u1^2",
        "--a",
        "0",
        "--b",
        "1",
        "--boundary",
        "0:1",
        "--y",
        "t",
    )
    assert code == 0
    assert rep["value"] <= 1e-8
    assert rep["rows"][0]["t"] == 0.0


def test_job_for_another_command(cli, demo_dir: Path):
    code, _ = cli("var-check", "--job", str(demo_dir / "hahn_higher_example.json"))
    assert code == 1


def test_job_with_unknown_key(cli, tmp_path: Path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"op": "q", "q": 0.5, "f": "t", "t": 1, "colour": "red"}))
    code, _ = cli("deriv", "--job", str(job))
    assert code == 1


def test_var_check_first_variation(cli, demo_dir: Path):
    code, rep = cli("var-check", "--job", str(demo_dir / "problemaq.json"), "--eta", "t*(1-t)")
    assert code == 0
    assert abs(rep["value"]) <= 1e-6
    assert abs(rep["details"]["difference"]) <= 1e-6


def test_var_check_convexity(cli):
    code, rep = cli("var-check", "--check", "convexity", "--L", "u1^2", "--a", "0", "--b", "1", "--samples", "20", "--seed", "3")
    assert code == 0
    assert rep["seed"] == 3
    assert rep["details"]["jointly_convex_evidence"] is True
    assert rep["rows"] == []


def test_var_check_seed_defaults_to_config(cli, config_file: Path):
    code, rep = cli("-c", str(config_file), "var-check", "--check", "convexity", "--L", "0 - u1^2", "--a", "0", "--b", "1")
    assert code == 0
    assert rep["seed"] == 7
    assert rep["details"]["jointly_convex_evidence"] is False


def test_var_check_extremizer(cli, demo_dir: Path):
    code, rep = cli("var-check", "--job", str(demo_dir / "problemaq.json"), "--check", "extremizer", "--samples", "5")
    assert code == 0
    assert rep["details"]["improved"] is False


@pytest.mark.golden
def test_leitmann_job(cli, demo_dir: Path):
    code, rep = cli("-c", str(demo_dir / "config.toml"), "leitmann", "--job", str(demo_dir / "leitmann.json"))
    assert code == 0
    assert rep["details"]["identity_holds"] is True
    assert rep["details"]["constant_holds"] is True
    assert rep["details"]["boundary_constant"] == pytest.approx(8.0)
    assert len(rep["rows"]) == 10
    assert rep["seed"] == 42


# ---------------------------------------------------------------- theorems and scales


def test_ineq_cauchy_schwarz(cli):
    code, rep = cli(
        "ineq",
        "--kind",
        "cauchy_schwarz",
        "--f",
        "1/(1+t^2)",
        "--g",
        "1/(1+t^2)",
        "--a",
        "0",
        "--b",
        "4",
        "--alpha",
        "1",
        "--beta",
        "1",
    )
    assert code == 0
    assert rep["details"]["holds"] is True
    assert rep["warnings"] == []


def test_ineq_diamond_mvt(cli):
    code, rep = cli("ineq", "--calculus", "diamond", "--kind", "mvt", "--f", "5", "--g", "1+t", "--scale", MIXED, "--a", "0", "--b", "4")
    assert code == 0
    assert rep["details"]["K"] == pytest.approx(5.0)


def test_ineq_unknown_kind(cli):
    code, _ = cli("ineq", "--kind", "jensen", "--f", "t", "--g", "t", "--a", "0", "--b", "1")
    assert code == 1


def test_mvt_rolle(cli):
    code, rep = cli("mvt", "--kind", "rolle", "--f", "(t-1)*(t-3)", "--a", "0", "--b", "4")
    assert code == 0
    assert rep["details"]["c"] == pytest.approx(2.0)
    assert rep["value"] <= 1e-8


def test_mvt_rolle_precondition(cli):
    code, _ = cli("mvt", "--kind", "rolle", "--f", "t", "--a", "0", "--b", "1")
    assert code == 2


def test_ts_query(cli):
    code, rep = cli("ts-query", "--scale", MIXED, "--t", "1", "--t", "2")
    assert code == 0
    first, second = rep["rows"]
    assert first["sigma"] == 2.0
    assert first["classification"] == "right-scattered-left-dense"
    assert second["gamma1"] == pytest.approx(2.0 / 3.0)
    assert second["in_kappa"] is True
    assert rep["details"]["max"] == 4.0


# ---------------------------------------------------------------- config


def test_config_show_toml(cli, config_file: Path):
    code, out = cli("-c", str(config_file), "config", "show", "--toml")
    assert code == 0
    assert "max-terms = 5000" in out
    assert "seed = 7" in out


def test_config_show_table(cli):
    code, out = cli("config", "show")
    assert code == 0
    assert "series" in out


def test_config_init(cli, tmp_path: Path):
    target = tmp_path / "qcalc.toml"
    assert cli("config", "init", "--path", str(target))[0] == 0
    assert target.exists()
    assert cli("config", "init", "--path", str(target))[0] == 1
    assert cli("config", "init", "--path", str(target), "--force")[0] == 0
