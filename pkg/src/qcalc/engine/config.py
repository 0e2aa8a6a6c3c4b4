# engine/config.py
from __future__ import annotations

import logging
import os
import tomllib
from pathlib import Path
from typing import Any, Literal

import toml
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

CONFIG_ENV = "QCALC_CONFIG_PATH"
MAX_TERMS_ENV = "QCALC_MAX_TERMS"
DEFAULT_CONFIG_PATH = Path("~/.config/qcalc/config.toml")


class SeriesConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    abs_tol: float = Field(alias="abs-tol", default=1e-12, gt=0)
    rel_tol: float = Field(alias="rel-tol", default=1e-12, ge=0)
    max_terms: int = Field(alias="max-terms", default=100_000, gt=0)
    stagnation_window: int = Field(alias="stagnation-window", default=8, ge=1)

    @model_validator(mode="after")
    def _window_fits(self) -> SeriesConfig:
        if self.stagnation_window > self.max_terms:
            raise ValueError("stagnation-window must not exceed max-terms")
        return self


class ExprConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    match_eps: float = Field(alias="match-eps", default=1e-12, gt=0)


class VariationalConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    lattice_depth: int = Field(alias="lattice-depth", default=24, gt=0)
    # 不动点处嵌套差商外层中心差分的步长（相对 max(1,|ω0|)）
    nested_step: float = Field(alias="nested-step", default=1e-3, gt=0)


class WitnessConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    grid: int = Field(default=1024, ge=8)
    bisect_tol: float = Field(alias="bisect-tol", default=1e-14, gt=0)


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    tol: float = Field(default=1e-10, gt=0)
    max_depth: int = Field(alias="max-depth", default=40, gt=0)


class LoggingConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    level: str = Field(default="WARNING")
    dict_style: Literal["table", "dict"] = Field(alias="dict-style", default="table")


class OutputConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    format: Literal["json", "csv", "table"] = Field(default="json")


class AppConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
    seed: int = Field(default=0, ge=0)
    series: SeriesConfig = SeriesConfig()
    expr: ExprConfig = ExprConfig()
    variational: VariationalConfig = VariationalConfig()
    witness: WitnessConfig = WitnessConfig()
    quadrature: QuadratureConfig = QuadratureConfig()
    logging: LoggingConfig = LoggingConfig()
    output: OutputConfig = OutputConfig()


def _apply_env(data: dict[str, Any]) -> dict[str, Any]:
    raw = os.environ.get(MAX_TERMS_ENV)
    if raw:
        logger.debug("load_config: %s=%s overrides series.max-terms", MAX_TERMS_ENV, raw)
        series = dict(data.get("series", {}))
        series.pop("max_terms", None)
        series["max-terms"] = int(raw)
        data = {**data, "series": series}
    return data


def load_config(path: Path | None = None) -> AppConfig:
    """
    读取 TOML 配置：
      - 显式路径不存在 -> FileNotFoundError
      - 未给路径时依次尝试 env QCALC_CONFIG_PATH、~/.config/qcalc/config.toml，缺失则使用默认值
      - env QCALC_MAX_TERMS 最后覆盖 [series] max-terms
    """
    explicit = path is not None
    if path is None:
        path = Path(os.environ.get(CONFIG_ENV, str(DEFAULT_CONFIG_PATH)))
    p = path.expanduser()

    data: dict[str, Any] = {}
    if p.exists():
        with open(p, "rb") as f:
            data = tomllib.load(f)
    elif explicit:
        raise FileNotFoundError(p)
    else:
        logger.debug("load_config: %s missing, using defaults", p)

    return AppConfig(**_apply_env(data))


def dump_config(cfg: AppConfig) -> str:
    """以别名（kebab-case）导出为 TOML 文本。"""
    return toml.dumps(cfg.model_dump(by_alias=True))


def write_default_config(path: Path, *, overwrite: bool = False) -> Path:
    p = path.expanduser()
    if p.exists() and not overwrite:
        raise FileExistsError(p)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("# QCalc 配置（由 `qcalc config init` 生成）\n" + dump_config(AppConfig()))
    return p
