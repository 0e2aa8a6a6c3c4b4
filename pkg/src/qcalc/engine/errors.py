# engine/errors.py
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from qcalc.engine.numerics import SeriesResult

# 退出码约定：0 成功，1 用法错误，2 领域错误，3 级数不收敛
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_NON_CONVERGENT = 3


class QCalcError(Exception):
    """所有引擎异常的基类，``exit_code`` 供 CLI 映射退出码。"""

    exit_code: int = EXIT_DOMAIN


class UsageError(QCalcError):
    exit_code = EXIT_USAGE


class ParseError(QCalcError):
    """表达式解析失败；``offset`` 为字节偏移，``expected`` 为期望的记号集合。"""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()) -> None:
        self.offset = offset
        self.expected = expected
        hint = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class EvalError(QCalcError):
    """求值失败（负数开方、除零等），``offset`` 指向出错的语法节点。"""

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class OverrideNotDifferentiableError(EvalError):
    pass


class NonConvergentError(QCalcError):
    """级数在 max_terms 内未停滞；``result`` 保留部分和与误差估计。"""

    exit_code = EXIT_NON_CONVERGENT

    def __init__(self, message: str, result: SeriesResult | None = None) -> None:
        self.result = result
        super().__init__(message)


class NoSignChangeError(QCalcError):
    pass


class OrderTooHighError(QCalcError):
    pass


class NotOnLatticeError(QCalcError):
    pass


class LatticeMismatchError(QCalcError):
    pass


class NoWitnessError(QCalcError):
    pass


class PreconditionError(QCalcError):
    pass


class NotInScaleError(QCalcError):
    pass


class BoundaryExcludedError(QCalcError):
    pass


class ScaleDefinitionError(QCalcError):
    pass


class QuadratureFailureError(QCalcError):
    pass


class BoundaryViolationError(QCalcError):
    pass


class InadmissibleVariationError(QCalcError):
    pass
