# cli/schemas.py
from __future__ import annotations

from enum import Enum
from typing import Annotated, Any, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field

from qcalc.engine.errors import QCalcError, UsageError
from qcalc.engine.expr import parse_number
from qcalc.engine.variational import Flavor

OutputFormat = Literal["json", "csv", "table"]


def _number(v: Any) -> Any:
    if isinstance(v, str):
        try:
            return parse_number(v)
        except QCalcError as e:
            raise ValueError(str(e)) from None
    return v


def _pair(v: Any) -> Any:
    # "0:1" 或 "1/6:-2" -> (0.0, 1.0)
    if isinstance(v, str):
        left, sep, right = v.partition(":")
        if not sep:
            raise ValueError(f"boundary pair {v!r} must look like 'alpha:beta'")
        return (_number(left), _number(right))
    return v


Num = Annotated[float, BeforeValidator(_number)]
Pair = Annotated[tuple[Num, Num], BeforeValidator(_pair)]


class Command(Enum):
    DERIV = "deriv"
    INTEG = "integ"
    EL_CHECK = "el-check"
    VAR_CHECK = "var-check"
    INEQ = "ineq"
    MVT = "mvt"
    LEITMANN = "leitmann"
    TS_QUERY = "ts-query"


# 命令行 --override 作用的主函数
PRIMARY_FUNCTION: dict[Command, str] = {
    Command.DERIV: "f",
    Command.INTEG: "f",
    Command.EL_CHECK: "y",
    Command.VAR_CHECK: "y",
    Command.INEQ: "f",
    Command.MVT: "f",
    Command.LEITMANN: "L",
    Command.TS_QUERY: "f",
}

FUNCTION_FIELDS = ("f", "g", "y", "eta", "z", "zbar", "lagrangian", "lagrangian_bar", "gauge")


class JobSpec(BaseModel):
    """
    一次 CLI 调用的完整描述；来自命令行参数或 ``--job file.json``（命令行优先）。

    JSON 键与命令行长选项同名（``L``、``Lbar``、``G``、``abs-tol`` 等）。
    """

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    command: Command
    op: str | None = None
    kind: str | None = None
    flavor: Flavor | None = None

    q: Num | None = None
    omega: Num | None = None
    alpha: Num | None = None
    beta: Num | None = None
    h: Num | None = None
    r: int = Field(default=1, ge=1)
    scale: str | None = None

    f: str | None = None
    g: str | None = None
    y: str | None = None
    eta: str | None = None
    z: str | None = None
    zbar: str | None = None
    lagrangian: str | None = Field(alias="L", default=None)
    lagrangian_bar: str | None = Field(alias="Lbar", default=None)
    gauge: str | None = Field(alias="G", default=None)
    overrides: dict[str, list[str]] = Field(default_factory=dict)

    t: Num | None = None
    points: list[Num] = Field(default_factory=list)
    t0: Num | None = None
    a: Num | None = None
    b: Num | None = None
    boundary: list[Pair] = Field(default_factory=list)
    u_range: Pair = Field(alias="u-range", default=(-2.0, 2.0))
    v_range: Pair = Field(alias="v-range", default=(-2.0, 2.0))
    grid: str | None = None
    exponent: Num = 2.0
    samples: int = Field(default=10, ge=0)
    seed: int | None = Field(default=None, ge=0)

    abs_tol: float | None = Field(alias="abs-tol", default=None, gt=0)
    rel_tol: float | None = Field(alias="rel-tol", default=None, ge=0)
    max_terms: int | None = Field(alias="max-terms", default=None, gt=0)
    output: OutputFormat | None = None

    def need(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            flags = ", ".join(f"--{self._flag(n)}" for n in missing)
            raise UsageError(
                f"{self.command.value} needs {flags} (pass the flag or set it in the --job file)",
            )

    def num(self, name: str) -> float:
        self.need(name)
        return float(getattr(self, name))

    def _flag(self, name: str) -> str:
        field = type(self).model_fields[name]
        return field.alias or name.replace("_", "-")

    def sources(self) -> dict[str, str]:
        """函数字段的文本，键为 JSON / 命令行名（``L``、``G`` …）。"""
        out: dict[str, str] = {}
        for name in FUNCTION_FIELDS:
            src = getattr(self, name)
            if src is not None:
                out[self._flag(name)] = src
        return out


class OperationReport(BaseModel):
    """所有命令共用的输出：回显输入、数值、误差估计、收敛标志与警告。"""

    model_config = ConfigDict(use_enum_values=True)

    command: str
    inputs: dict[str, Any]
    value: float | None = None
    est_error: float | None = None
    converged: bool = True
    seed: int | None = None
    rows: list[dict[str, Any]] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)
