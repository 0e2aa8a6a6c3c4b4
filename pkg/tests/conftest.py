import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from qcalc.cli.entry import run
from qcalc.engine.config import CONFIG_ENV, MAX_TERMS_ENV
from qcalc.engine.numerics import SeriesPolicy
from qcalc.engine.quantum import QOmegaParams

DEMO_DIR = Path(__file__).parent / "demo"


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    # 不读取用户目录下的配置，也不受外部 QCALC_* 变量影响
    monkeypatch.setenv(CONFIG_ENV, str(tmp_path / "absent-config.toml"))
    monkeypatch.delenv(MAX_TERMS_ENV, raising=False)


@pytest.fixture
def policy() -> SeriesPolicy:
    return SeriesPolicy()


@pytest.fixture
def hahn_half_one() -> QOmegaParams:
    # σ(t) = t/2 + 1，ω0 = 2
    return QOmegaParams(q=0.5, omega=1.0)


@pytest.fixture
def hahn_half_half() -> QOmegaParams:
    # σ(t) = (t + 1)/2，ω0 = 1
    return QOmegaParams(q=0.5, omega=0.5)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    cfg_path = tmp_path / "config.toml"
    cfg_path.write_text(
        """
seed = 7

[series]
abs-tol = 1e-13
max-terms = 5000

[variational]
lattice-depth = 8

[output]
format = "json"
""".strip(),
    )
    return cfg_path


@pytest.fixture
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture
def cli(capsys: pytest.CaptureFixture[str]) -> Callable[..., tuple[int, Any]]:
    """运行 ``qcalc <args>``，返回 (退出码, 解析后的 JSON 报告或原始 stdout)。"""

    def _run(*args: str) -> tuple[int, Any]:
        code = run(list(args))
        out = capsys.readouterr().out
        try:
            return code, json.loads(out)
        except json.JSONDecodeError:
            return code, out

    return _run
