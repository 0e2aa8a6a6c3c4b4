# engine/quantum.py
"""
前向量子微积分：h-、q- 与 Hahn (q,ω) 差分算子、级数积分、高阶导数与 σ 轨道。

σ(t) = qt + ω 是以 ω0 = ω/(1−q) 为不动点的压缩映射；所有轨道点都用闭式
qⁿs + ω[n]_q 计算，不做 n 次迭代。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, computed_field

from qcalc.engine.errors import EvalError, NotOnLatticeError, OrderTooHighError, UsageError
from qcalc.engine.expr import DEFAULT_MATCH_EPS
from qcalc.engine.numerics import (
    CompensatedSum,
    RealFunc,
    SeriesPolicy,
    SeriesResult,
    central_derivative,
    combine,
    exact,
    sum_series,
)

logger = logging.getLogger(__name__)

MAX_HAHN_ORDER = 6
# 对称差商的分母 ~|t−ω0|；更近时舍入误差压过差商本身，改用经典导数
QUOTIENT_GUARD = math.sqrt(math.ulp(1.0))
# 轨道点与 ω0 的最小可分辨距离（相对 max(1,|ω0|)），残差只在可分辨的点上检查
ORBIT_RESOLUTION = 1e-5
# 不动点处高阶导数外层中心差分的默认相对步长
DEFAULT_NESTED_STEP = 1e-3


class QOmegaParams(BaseModel):
    """Hahn 算子参数 (q, ω)，q ∈ (0,1)，ω ≥ 0。"""

    model_config = ConfigDict(frozen=True)

    q: float = Field(gt=0, lt=1)
    omega: float = Field(default=0.0, ge=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def omega0(self) -> float:
        return self.omega / (1.0 - self.q)

    def sigma(self, t: float) -> float:
        return self.q * t + self.omega

    def sigma_inv(self, t: float) -> float:
        return (t - self.omega) / self.q

    def at_fixed_point(self, t: float, match_eps: float = DEFAULT_MATCH_EPS) -> bool:
        w0 = self.omega0
        return abs(t - w0) <= match_eps * max(1.0, abs(w0))


def q_number(n: int, q: float) -> float:
    """[n]_q = (1 − qⁿ)/(1 − q)，n 可为负。"""
    try:
        return (1.0 - q**n) / (1.0 - q)
    except OverflowError:
        raise EvalError(f"q-number [{n}]_{q} overflows") from None


def sigma_orbit(p: QOmegaParams, s: float, n: int) -> float:
    """σⁿ(s) = qⁿs + ω[n]_q；不动点 ω0 的轨道恒为 ω0。"""
    if n == 0 or s == p.omega0:
        return s
    try:
        return p.q**n * s + p.omega * q_number(n, p.q)
    except OverflowError:
        raise EvalError(f"orbit point sigma^{n}({s!r}) overflows") from None


@dataclass(frozen=True, slots=True)
class OrbitPoint:
    """σ 轨道上的点 σⁿ(s)；n < 0 表示 σ⁻¹ 方向。"""

    params: QOmegaParams
    generator: float
    index: int = 0

    @property
    def value(self) -> float:
        return sigma_orbit(self.params, self.generator, self.index)

    def succ(self) -> OrbitPoint:
        return OrbitPoint(self.params, self.generator, self.index + 1)

    def pred(self) -> OrbitPoint:
        return OrbitPoint(self.params, self.generator, self.index - 1)


def hahn_lattice(p: QOmegaParams, a: float, b: float, depth: int = 24) -> list[float]:
    """
    [a,b]_{q,ω} 的前 depth+1 层：{σᵏ(a)} ∪ {σᵏ(b)} ∪ {ω0}，升序去重。

    >>> hahn_lattice(QOmegaParams(q=0.5, omega=1.0), 2.0, 4.0, depth=2)
    [2.0, 2.5, 3.0, 4.0]
    """
    if depth < 0:
        raise UsageError("depth must be non-negative")
    pts = {p.omega0}
    for k in range(depth + 1):
        pts.add(sigma_orbit(p, a, k))
        pts.add(sigma_orbit(p, b, k))
    return sorted(pts)


# ---------------------------------------------------------------- derivatives


def hahn_derivative(
    f: RealFunc,
    p: QOmegaParams,
    t: float,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
    step: float | None = None,
) -> float:
    """
    D_{q,ω}[f](t) = (f(σ(t)) − f(t)) / (σ(t) − t)；在 ω0 处取经典导数。

    分母取两个采样点的浮点差，保证差商与实际采样一致。
    """
    if p.at_fixed_point(t, match_eps):
        logger.debug("hahn_derivative: t=%r at fixed point, classical branch", t)
        return central_derivative(f, p.omega0, step)
    s = p.sigma(t)
    return (float(f(s)) - float(f(t))) / (s - t)


def hahn_derivative_higher(
    f: RealFunc,
    p: QOmegaParams,
    t: float,
    r: int,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
    nested_step: float = DEFAULT_NESTED_STEP,
) -> float:
    """D^r = D[D^{r−1}]，r ≤ 6；不动点处外层差分用较大的 nested_step。"""
    if r < 1:
        raise UsageError(f"order must be positive, got {r}")
    if r > MAX_HAHN_ORDER:
        raise OrderTooHighError(f"order {r} exceeds the supported maximum {MAX_HAHN_ORDER}")
    if r == 1:
        return hahn_derivative(f, p, t, match_eps=match_eps)

    def inner(x: float) -> float:
        return hahn_derivative_higher(f, p, x, r - 1, match_eps=match_eps, nested_step=nested_step)

    step = nested_step * max(1.0, abs(p.omega0))
    return hahn_derivative(inner, p, t, match_eps=match_eps, step=step)


def q_derivative(
    f: RealFunc,
    q: float,
    t: float,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> float:
    """Jackson q-导数 (f(qt) − f(t)) / ((q−1)t)；t = 0 时取 f′(0)。"""
    return hahn_derivative(f, QOmegaParams(q=q, omega=0.0), t, match_eps=match_eps)


def h_forward_derivative(f: RealFunc, h: float, t: float) -> float:
    if h <= 0:
        raise UsageError("h must be positive")
    return (float(f(t + h)) - float(f(t))) / h


def h_backward_derivative(f: RealFunc, h: float, t: float) -> float:
    if h <= 0:
        raise UsageError("h must be positive")
    return (float(f(t)) - float(f(t - h))) / h


# ---------------------------------------------------------------- integrals


def hahn_primitive(
    f: RealFunc,
    p: QOmegaParams,
    x: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """∫_{ω0}^{x} f = (x(1−q) − ω)·Σ_{k≥0} qᵏ f(σᵏ(x))。"""
    if p.at_fixed_point(x, match_eps):
        return exact(0.0)
    q = p.q

    def term(k: int) -> float:
        return q**k * float(f(sigma_orbit(p, x, k)))

    res = sum_series(term, policy)
    return res.scaled(x * (1.0 - q) - p.omega)


def hahn_integral(
    f: RealFunc,
    p: QOmegaParams,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """∫_a^b f d_{q,ω}t = F(b) − F(a)，F 为从 ω0 起的 q,ω-积分。"""
    if a == b:
        return exact(0.0)
    fb = hahn_primitive(f, p, b, policy, match_eps=match_eps)
    fa = hahn_primitive(f, p, a, policy, match_eps=match_eps)
    out = combine((1.0, fb), (-1.0, fa))
    logger.debug(
        "hahn_integral: q=%s omega=%s [%r, %r] -> %r (terms=%s converged=%s)",
        p.q,
        p.omega,
        a,
        b,
        out.value,
        out.terms_used,
        out.converged,
    )
    return out


def jackson_integral(
    f: RealFunc,
    q: float,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
) -> SeriesResult:
    return hahn_integral(f, QOmegaParams(q=q, omega=0.0), a, b, policy)


def lattice_steps(a: float, b: float, h: float, match_eps: float = DEFAULT_MATCH_EPS) -> int:
    """(b − a)/h 的整数值；不在格上时抛出 NotOnLatticeError。"""
    if h <= 0:
        raise UsageError("h must be positive")
    k = (b - a) / h
    if not math.isfinite(k):
        raise NotOnLatticeError(f"(b - a)/h = {k!r} is not finite")
    n = round(k)
    if abs(k - n) > match_eps * max(1.0, abs(k)):
        raise NotOnLatticeError(f"(b - a)/h = {k!r} is not an integer")
    return int(n)


def h_integral(
    f: RealFunc,
    h: float,
    a: float,
    b: float,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> float:
    """h-积分 h·[f(a) + f(a+h) + … + f(b−h)]；a > b 时取反向和的相反数。"""
    n = lattice_steps(a, b, h, match_eps)
    if n == 0:
        return 0.0
    if n < 0:
        return -h_integral(f, h, b, a, match_eps=match_eps)
    acc = CompensatedSum()
    for i in range(n):
        acc.add(float(f(a + i * h)))
    return h * acc.value
