# engine/numerics.py
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from typing import TYPE_CHECKING, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from qcalc.engine.errors import (
    EvalError,
    NonConvergentError,
    NoSignChangeError,
    QuadratureFailureError,
)

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig

logger = logging.getLogger(__name__)

RealFunc = Callable[[float], float]
TermFunc = Callable[[int], float]

DEFAULT_ABS_TOL = 1e-12
DEFAULT_REL_TOL = 1e-12
DEFAULT_MAX_TERMS = 100_000
DEFAULT_WINDOW = 8


class SeriesPolicy(BaseModel):
    """无穷级数截断策略：连续 ``stagnation_window`` 项都低于容差才停止。"""

    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=DEFAULT_ABS_TOL, gt=0)
    rel_tol: float = Field(default=DEFAULT_REL_TOL, ge=0)
    max_terms: int = Field(default=DEFAULT_MAX_TERMS, gt=0)
    stagnation_window: int = Field(default=DEFAULT_WINDOW, ge=1)

    @model_validator(mode="after")
    def _window_fits(self) -> SeriesPolicy:
        if self.stagnation_window > self.max_terms:
            raise ValueError("max_terms must be >= stagnation_window")
        return self

    @classmethod
    def from_config(cls, cfg: AppConfig) -> SeriesPolicy:
        s = cfg.series
        return cls(
            abs_tol=s.abs_tol,
            rel_tol=s.rel_tol,
            max_terms=s.max_terms,
            stagnation_window=s.stagnation_window,
        )


class SeriesResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    terms_used: int = 0
    est_error: float = 0.0
    converged: bool = True

    def require(self) -> float:
        """返回数值；未收敛时抛出 NonConvergentError（附带部分和）。"""
        if not self.converged:
            raise NonConvergentError(
                f"series did not stagnate within {self.terms_used} terms "
                f"(partial value {self.value!r}, last-window bound {self.est_error!r})",
                self,
            )
        return self.value

    def scaled(self, factor: float) -> SeriesResult:
        return SeriesResult(
            value=factor * self.value,
            terms_used=self.terms_used,
            est_error=abs(factor) * self.est_error,
            converged=self.converged,
        )


def exact(value: float, terms_used: int = 0) -> SeriesResult:
    """有限和 / 平凡情形的结果（无截断误差）。"""
    return SeriesResult(value=value, terms_used=terms_used, est_error=0.0, converged=True)


def combine(*parts: tuple[float, SeriesResult]) -> SeriesResult:
    """线性组合 Σ c_i·R_i：误差界相加，收敛标志取与。"""
    acc = CompensatedSum()
    err = 0.0
    used = 0
    ok = True
    for coeff, res in parts:
        acc.add(coeff * res.value)
        err += abs(coeff) * res.est_error
        used += res.terms_used
        ok = ok and res.converged
    return SeriesResult(value=acc.value, terms_used=used, est_error=err, converged=ok)


class CompensatedSum:
    """带误差补偿的累加器（two-sum 无误差变换 + Neumaier 修正）。"""

    __slots__ = ("_c", "_s")

    def __init__(self, value: float = 0.0) -> None:
        self._s = float(value)
        self._c = 0.0

    @staticmethod
    def two_sum(u: float, v: float) -> tuple[float, float]:
        s = u + v
        up = s - v
        vpp = s - up
        up -= u
        vpp -= v
        return s, -(up + vpp)

    def add(self, y: float) -> None:
        self._s, t = self.two_sum(self._s, y)
        self._c += t

    @property
    def value(self) -> float:
        return self._s + self._c


def sum_series(term: TermFunc, policy: SeriesPolicy | None = None) -> SeriesResult:
    """
    按正向顺序求 Σ_{n≥0} term(n)。

    连续 stagnation_window 项满足 |term(n)| <= max(abs_tol, rel_tol·|部分和|) 时停止；
    达到 max_terms 仍未停滞则返回 converged=False 的部分和（并记录 warning）。
    """
    policy = policy or SeriesPolicy()
    acc = CompensatedSum()
    quiet = 0
    window_max = 0.0
    n = 0
    while n < policy.max_terms:
        t = float(term(n))
        if not math.isfinite(t):
            raise EvalError(f"non-finite series term at index {n}")
        acc.add(t)
        n += 1
        if abs(t) <= max(policy.abs_tol, policy.rel_tol * abs(acc.value)):
            quiet += 1
            window_max = max(window_max, abs(t))
            if quiet >= policy.stagnation_window:
                logger.debug("sum_series: stagnated after %s terms value=%r", n, acc.value)
                return SeriesResult(
                    value=acc.value,
                    terms_used=n,
                    est_error=window_max,
                    converged=True,
                )
        else:
            quiet = 0
            window_max = 0.0
    logger.warning(
        "sum_series: no stagnation within max_terms=%s (last term %r)",
        policy.max_terms,
        t,
    )
    return SeriesResult(value=acc.value, terms_used=n, est_error=abs(t), converged=False)


def default_step(t: float) -> float:
    return max(1e-6, 1e-6 * abs(t))


def _sample(f: RealFunc, x: float) -> float:
    v = float(f(x))
    if not math.isfinite(v):
        raise EvalError(f"function is not finite at t={x!r}")
    return v


def central_derivative(f: RealFunc, t: float, step: float | None = None) -> float:
    """对称差商 (f(t+h)-f(t-h))/(2h)，在 h 与 h/2 之间做一次 Richardson 外推。"""
    h = step if step is not None else default_step(t)

    def quotient(k: float) -> float:
        return (_sample(f, t + k) - _sample(f, t - k)) / ((t + k) - (t - k))

    coarse = quotient(h)
    fine = quotient(h / 2)
    return (4.0 * fine - coarse) / 3.0


def one_sided_derivative(
    f: RealFunc,
    t: float,
    direction: Literal["forward", "backward"],
    step: float | None = None,
) -> float:
    """单侧差商（前向或后向），一次 Richardson 外推消去 O(h) 项。"""
    h = step if step is not None else default_step(t)
    sign = 1.0 if direction == "forward" else -1.0
    ft = _sample(f, t)

    def quotient(k: float) -> float:
        x = t + sign * k
        return (_sample(f, x) - ft) / (x - t)

    coarse = quotient(h)
    fine = quotient(h / 2)
    return 2.0 * fine - coarse


def bisect_root(g: RealFunc, lo: float, hi: float, tol: float = 1e-12) -> float:
    """二分求根：要求 g(lo)·g(hi) <= 0；返回 |g(c)|<=tol 或区间宽度 < tol 时的 c ∈ [lo,hi]。"""
    if lo > hi:
        lo, hi = hi, lo
    g_lo = _sample(g, lo)
    g_hi = _sample(g, hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0:
        raise NoSignChangeError(f"g({lo!r})={g_lo!r} and g({hi!r})={g_hi!r} share a sign")

    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        g_mid = _sample(g, mid)
        if abs(g_mid) <= tol or (hi - lo) < tol:
            return mid
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 2 * math.ulp(mid):
            # 浮点区间已无法再分
            return mid
    return mid


def adaptive_simpson(
    f: RealFunc,
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 40,
) -> float:
    """自适应 Simpson 积分（带 Richardson 修正项 (S2-S1)/15）。"""
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, max_depth)

    def simpson(fa: float, fm: float, fb: float, lo: float, hi: float) -> float:
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(  # noqa: PLR0913
        lo: float,
        hi: float,
        fa: float,
        fm: float,
        fb: float,
        whole: float,
        eps: float,
        depth: int,
    ) -> float:
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = _quad_sample(f, lm)
        frm = _quad_sample(f, rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0
        if depth <= 0:
            raise QuadratureFailureError(
                f"adaptive Simpson exhausted depth on [{lo!r}, {hi!r}] (defect {delta!r})",
            )
        return recurse(lo, mid, fa, flm, fm, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fm, frm, fb, right, eps / 2.0, depth - 1,
        )

    fa = _quad_sample(f, a)
    fb = _quad_sample(f, b)
    fm = _quad_sample(f, 0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _quad_sample(f: RealFunc, x: float) -> float:
    v = float(f(x))
    if not math.isfinite(v):
        raise QuadratureFailureError(f"integrand is not finite at t={x!r}")
    return v
