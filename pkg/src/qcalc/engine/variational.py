# engine/variational.py
"""
量子变分层：泛函求值、三种微积分下的 Euler–Lagrange 残差、数值一阶变分、
联合凸性抽样、Leitmann 等价校验与极小性抽样。

偏导数 ∂_{i+2}L 一律用对偶数求值（精确），差分只出现在 Hahn / 对称算子本身。
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qcalc.engine.errors import (
    BoundaryViolationError,
    InadmissibleVariationError,
    UsageError,
)
from qcalc.engine.expr import DEFAULT_MATCH_EPS, ExprFunc, parse
from qcalc.engine.numerics import RealFunc, SeriesPolicy, central_derivative
from qcalc.engine.quantum import (
    ORBIT_RESOLUTION,
    QUOTIENT_GUARD,
    QOmegaParams,
    hahn_derivative_higher,
    hahn_integral,
    sigma_orbit,
)
from qcalc.engine.symcalc import (
    hahn_sym_derivative,
    hahn_sym_integral,
    q_sym_derivative,
    q_sym_integral,
)

logger = logging.getLogger(__name__)

MAX_VARIATIONAL_ORDER = 4
BOUNDARY_TOL = 1e-9
VARIATION_STEP = 1e-5
CONVEXITY_TOL = 1e-9
LEITMANN_POINT_TOL = 1e-8
LEITMANN_FUNCTIONAL_TOL = 1e-7

ASSUMED_HYPOTHESES: tuple[str, ...] = (
    "L and its partial derivatives in (u0, ..., ur) are continuous (assumed, not verified)",
    "y is classically differentiable at the fixed point omega0 (assumed)",
    "the fundamental lemma of the chosen calculus applies (assumed, not proved)",
)


class Flavor(Enum):
    HAHN_HIGHER = "hahn_higher"
    Q_SYMMETRIC = "q_symmetric"
    HAHN_SYMMETRIC = "hahn_symmetric"


class VariationalProblem(BaseModel):
    """
    变分问题：拉格朗日量 L(t, u0, …, ur)、微积分类型、区间 [a,b] 与边界数据。

    hahn_higher 的状态为 (y^{σʳ}, D[y^{σ^{r−1}}], …, Dʳ[y])；
    对称类型 r = 1，状态为 (y(σ(t)), D̃[y](t))。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, populate_by_name=True)

    flavor: Flavor
    q: float = Field(gt=0, lt=1)
    omega: float = Field(default=0.0, ge=0)
    order: int = Field(alias="r", default=1, ge=1)
    lagrangian: ExprFunc = Field(alias="L")
    a: float
    b: float
    boundary: tuple[tuple[float, float], ...]
    lattice_depth: int = Field(alias="lattice-depth", default=24, gt=0)
    match_eps: float = Field(alias="match-eps", default=DEFAULT_MATCH_EPS, gt=0)
    # 不动点处外层中心差分步长（相对 max(1,|ω0|)）
    nested_step: float = Field(alias="nested-step", default=1e-3, gt=0)

    @field_validator("lagrangian", mode="before")
    @classmethod
    def _parse_lagrangian(cls, v: Any) -> Any:
        if isinstance(v, str):
            return parse(v)
        return v

    @model_validator(mode="after")
    def _check(self) -> VariationalProblem:
        if not self.a < self.b:
            raise ValueError("a must be smaller than b")
        if self.flavor is Flavor.Q_SYMMETRIC and self.omega != 0:
            raise ValueError("q_symmetric problems need omega = 0")
        if self.flavor is not Flavor.HAHN_HIGHER and self.order != 1:
            raise ValueError("symmetric flavors are first order (r = 1)")
        if self.order > MAX_VARIATIONAL_ORDER:
            raise ValueError(f"order r must not exceed {MAX_VARIATIONAL_ORDER}")
        if len(self.boundary) != self.order:
            raise ValueError(f"boundary needs {self.order} (alpha_i, beta_i) pairs")
        allowed = {"t", *(f"u{i}" for i in range(self.order + 1))}
        extra = sorted(self.lagrangian.variables - allowed)
        if extra:
            raise ValueError(f"lagrangian uses variables {extra} beyond (t, u0..u{self.order})")
        return self

    @property
    def params(self) -> QOmegaParams:
        return QOmegaParams(q=self.q, omega=self.omega)

    @property
    def outer_step(self) -> float:
        return self.nested_step * max(1.0, abs(self.params.omega0))


class ResidualReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    flavor: Flavor
    points: list[float]
    residuals: list[float]
    max_abs: float
    functional_value: float
    assumed: list[str] = Field(default_factory=lambda: list(ASSUMED_HYPOTHESES))


# ---------------------------------------------------------------- composition helpers


def _shift(y: RealFunc, p: QOmegaParams, k: int) -> RealFunc:
    if k == 0:
        return y
    return lambda x: float(y(sigma_orbit(p, x, k)))


def _sym_derivative(prob: VariationalProblem, f: RealFunc, t: float, step: float | None = None) -> float:
    if prob.flavor is Flavor.Q_SYMMETRIC:
        return q_sym_derivative(f, prob.q, t, match_eps=prob.match_eps, step=step)
    return hahn_sym_derivative(f, prob.params, t, match_eps=prob.match_eps, step=step)


def _hahn_d(prob: VariationalProblem, f: RealFunc, t: float, order: int) -> float:
    if order == 0:
        return float(f(t))
    return hahn_derivative_higher(
        f,
        prob.params,
        t,
        order,
        match_eps=prob.match_eps,
        nested_step=prob.nested_step,
    )


def state(prob: VariationalProblem, y: RealFunc, t: float) -> list[float]:
    """拉格朗日量在 t 处的参数 (u0, …, ur)。"""
    p = prob.params
    if prob.flavor is Flavor.HAHN_HIGHER:
        r = prob.order
        return [_hahn_d(prob, _shift(y, p, r - j), t, j) for j in range(r + 1)]
    return [float(y(p.sigma(t))), _sym_derivative(prob, y, t)]


def _integrate(prob: VariationalProblem, f: RealFunc, policy: SeriesPolicy | None) -> float:
    match prob.flavor:
        case Flavor.HAHN_HIGHER:
            res = hahn_integral(f, prob.params, prob.a, prob.b, policy, match_eps=prob.match_eps)
        case Flavor.Q_SYMMETRIC:
            res = q_sym_integral(f, prob.q, prob.a, prob.b, policy)
        case Flavor.HAHN_SYMMETRIC:
            res = hahn_sym_integral(f, prob.params, prob.a, prob.b, policy, match_eps=prob.match_eps)
    return res.require()


def integrand(prob: VariationalProblem, y: RealFunc) -> RealFunc:
    L = prob.lagrangian
    return lambda t: L(t, *state(prob, y, t))


def eval_functional(
    prob: VariationalProblem,
    y: RealFunc,
    policy: SeriesPolicy | None = None,
) -> float:
    return _integrate(prob, integrand(prob, y), policy)


def residual_points(prob: VariationalProblem) -> list[float]:
    """
    a、b 两条轨道各取前 N 个点；对称类型取 σ^{2n+1} 轨道。按轨道、下标排序。

    轨道进入 ω0 的 ORBIT_RESOLUTION 邻域后以 ω0 收尾：更近的点上差商的舍入误差超过残差容差。
    """
    p = prob.params
    w0 = p.omega0
    near = ORBIT_RESOLUTION * max(1.0, abs(w0))
    n = prob.lattice_depth
    stride, offset = (1, 0) if prob.flavor is Flavor.HAHN_HIGHER else (2, 1)
    out: list[float] = []
    seen: set[float] = set()

    def add(x: float) -> None:
        if x not in seen:
            seen.add(x)
            out.append(x)

    for s in (prob.a, prob.b):
        for k in range(n):
            x = sigma_orbit(p, s, stride * k + offset)
            if abs(x - w0) < near:
                logger.debug("residual_points: orbit of %r reaches omega0 at k=%s", s, k)
                add(w0)
                break
            add(x)
    add(w0)
    return out


def check_boundary(prob: VariationalProblem, y: RealFunc) -> None:
    for i, (alpha_i, beta_i) in enumerate(prob.boundary):
        got_a = _hahn_d(prob, y, prob.a, i)
        got_b = _hahn_d(prob, y, prob.b, i)
        if abs(got_a - alpha_i) > BOUNDARY_TOL or abs(got_b - beta_i) > BOUNDARY_TOL:
            raise BoundaryViolationError(
                f"D^{i}[y](a)={got_a!r}, D^{i}[y](b)={got_b!r}; expected {alpha_i!r}, {beta_i!r}",
            )


def _partial(L: ExprFunc, i: int, t: float, us: list[float]) -> float:
    return L.partial(f"u{i}", t, *us)


def el_residual(
    prob: VariationalProblem,
    y: RealFunc,
    policy: SeriesPolicy | None = None,
) -> ResidualReport:
    """
    hahn_higher: Σᵢ (−1)ⁱ (1/q)^{i(i−1)/2} Dⁱ[τ ↦ ∂_{i+2}L(τ, …)](t)；
    对称类型: ∂₂L(t, …) − D̃[τ ↦ ∂₃L(σ(τ), y(σ²(τ)), D̃[y](σ(τ)))](t)。
    """
    check_boundary(prob, y)
    L = prob.lagrangian
    p = prob.params

    def residual_at(t: float) -> float:
        if prob.flavor is Flavor.HAHN_HIGHER:
            total = 0.0
            for i in range(prob.order + 1):

                def partial_i(tau: float, i: int = i) -> float:
                    return _partial(L, i, tau, state(prob, y, tau))

                weight = (-1.0) ** i * (1.0 / prob.q) ** (i * (i - 1) // 2)
                total += weight * _hahn_d(prob, partial_i, t, i)
            return total

        def outer(tau: float) -> float:
            s = p.sigma(tau)
            return _partial(L, 1, s, state(prob, y, s))

        step = prob.outer_step if p.at_fixed_point(t, max(prob.match_eps, QUOTIENT_GUARD)) else None
        return _partial(L, 0, t, state(prob, y, t)) - _sym_derivative(prob, outer, t, step)

    points = residual_points(prob)
    residuals = [residual_at(t) for t in points]
    max_abs = max((abs(r) for r in residuals), default=0.0)
    value = eval_functional(prob, y, policy)
    logger.debug(
        "el_residual: flavor=%s points=%s max_abs=%r functional=%r",
        prob.flavor.value,
        len(points),
        max_abs,
        value,
    )
    return ResidualReport(
        flavor=prob.flavor,
        points=points,
        residuals=residuals,
        max_abs=max_abs,
        functional_value=value,
    )


# ---------------------------------------------------------------- first variation


def check_admissible(prob: VariationalProblem, eta: RealFunc) -> None:
    """η(a) = η(b) = 0，hahn_higher 还要求 Dⁱ[η](a) = Dⁱ[η](b) = 0（i < r）。"""
    for i in range(prob.order):
        for end in (prob.a, prob.b):
            v = _hahn_d(prob, eta, end, i)
            if abs(v) > BOUNDARY_TOL:
                raise InadmissibleVariationError(f"D^{i}[eta]({end!r}) = {v!r} does not vanish")


def _perturbed(y: RealFunc, eta: RealFunc, eps: float) -> RealFunc:
    return lambda t: float(y(t)) + eps * float(eta(t))


def first_variation(
    prob: VariationalProblem,
    y: RealFunc,
    eta: RealFunc,
    policy: SeriesPolicy | None = None,
) -> float:
    """ε ↦ L[y + εη] 在 ε = 0 处的中心差分（步长 1e-5，一次 Richardson）。"""
    check_admissible(prob, eta)
    return central_derivative(
        lambda eps: eval_functional(prob, _perturbed(y, eta, eps), policy),
        0.0,
        VARIATION_STEP,
    )


def first_variation_integral(
    prob: VariationalProblem,
    y: RealFunc,
    eta: RealFunc,
    policy: SeriesPolicy | None = None,
) -> float:
    """积分形式 ∫ Σⱼ ∂_{j+2}L · (η 的对应状态分量)。"""
    check_admissible(prob, eta)
    L = prob.lagrangian

    def body(t: float) -> float:
        us = state(prob, y, t)
        vs = state(prob, eta, t)
        return sum(_partial(L, j, t, us) * vs[j] for j in range(len(us)))

    return _integrate(prob, body, policy)


# ---------------------------------------------------------------- convexity


class ConvexityViolation(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    u: float
    v: float
    du: float
    dv: float
    defect: float


class ConvexityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    jointly_convex_evidence: bool
    violations: list[ConvexityViolation]
    samples: int
    seed: int


def convexity_sample(
    L: ExprFunc,
    t_range: tuple[float, float],
    u_range: tuple[float, float],
    v_range: tuple[float, float],
    n: int,
    *,
    seed: int = 0,
    t_points: int = 5,
) -> ConvexityReport:
    """
    抽样检查 L(t, u+u1, v+v1) − L(t, u, v) ≥ ∂₂L·u1 + ∂₃L·v1 − 1e-9。

    只是证据，不是证明；随机流由 numpy default_rng(seed) 决定。
    """
    if n < 2:
        raise UsageError("convexity sampling needs n >= 2")
    extra = sorted(L.variables - {"t", "u0", "u1"})
    if extra:
        raise UsageError(f"convexity sampling needs L(t, u0, u1), got extra {extra}")
    rng = np.random.default_rng(seed)
    ts = np.linspace(t_range[0], t_range[1], t_points if t_range[1] > t_range[0] else 1)
    violations: list[ConvexityViolation] = []
    count = 0
    for t in ts:
        us = rng.uniform(u_range[0], u_range[1], size=n)
        vs = rng.uniform(v_range[0], v_range[1], size=n)
        du = rng.uniform(u_range[0], u_range[1], size=n) - us
        dv = rng.uniform(v_range[0], v_range[1], size=n) - vs
        for u, v, d_u, d_v in zip(us, vs, du, dv, strict=True):
            t_, u_, v_, du_, dv_ = float(t), float(u), float(v), float(d_u), float(d_v)
            env = {"t": t_, "u0": u_, "u1": v_}
            lhs = L(t_, u_ + du_, v_ + dv_) - L(t_, u_, v_)
            rhs = L.eval_dual(env, "u0").tangent * du_ + L.eval_dual(env, "u1").tangent * dv_
            count += 1
            if lhs < rhs - CONVEXITY_TOL:
                violations.append(
                    ConvexityViolation(t=t_, u=u_, v=v_, du=du_, dv=dv_, defect=rhs - lhs),
                )
    logger.debug("convexity_sample: %s samples, %s violations", count, len(violations))
    return ConvexityReport(
        jointly_convex_evidence=not violations,
        violations=violations,
        samples=count,
        seed=seed,
    )


# ---------------------------------------------------------------- Leitmann


class LeitmannReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    samples: int
    seed: int
    max_pointwise_defect: float
    boundary_constant: float
    functional_differences: list[float]
    identity_holds: bool
    constant_holds: bool


def random_bump(
    rng: np.random.Generator,
    a: float,
    b: float,
    ya: float,
    yb: float,
    scale: float = 1.0,
) -> RealFunc:
    """线性插值 + k(t−a)(t−b)(k0 + k1·t)：端点值固定的随机光滑函数。"""
    k0, k1 = (float(x) for x in rng.normal(0.0, scale, size=2))
    slope = (yb - ya) / (b - a)

    def f(t: float) -> float:
        return ya + slope * (t - a) + (t - a) * (t - b) * (k0 + k1 * t)

    return f


def leitmann_check(  # noqa: PLR0913
    L: ExprFunc,
    Lbar: ExprFunc,
    z: ExprFunc,
    zbar: ExprFunc,
    G: ExprFunc,
    prob: VariationalProblem,
    samples: int = 10,
    *,
    seed: int = 0,
    policy: SeriesPolicy | None = None,
) -> LeitmannReport:
    """
    变换 y = z(t, ȳ)、ȳ = z̄(t, y) 下检查
    L(t, y^σ, D̃y) − L̄(t, ȳ^σ, D̃ȳ) = D̃[τ ↦ G(τ, ȳ(τ))](t)
    并比较两个泛函之差与边界常数 G(b, ȳ(b)) − G(a, ȳ(a))。
    """
    if prob.flavor is Flavor.HAHN_HIGHER:
        raise UsageError("Leitmann checks need a symmetric flavor")
    if samples < 1:
        raise UsageError("samples must be positive")
    alpha, beta = prob.boundary[0]
    ya, yb = zbar(prob.a, alpha), zbar(prob.b, beta)
    prob_y = prob.model_copy(update={"lagrangian": L})
    prob_bar = prob.model_copy(update={"lagrangian": Lbar, "boundary": ((ya, yb),)})
    points = residual_points(prob)
    const = G(prob.b, yb) - G(prob.a, ya)
    rng = np.random.default_rng(seed)

    worst = 0.0
    diffs: list[float] = []
    for _ in range(samples):
        ybar = random_bump(rng, prob.a, prob.b, ya, yb)

        def y(t: float, ybar: RealFunc = ybar) -> float:
            return z(t, ybar(t))

        def g_of(t: float, ybar: RealFunc = ybar) -> float:
            return G(t, ybar(t))

        lhs_y, lhs_bar = integrand(prob_y, y), integrand(prob_bar, ybar)
        for t in points:
            lhs = lhs_y(t) - lhs_bar(t)
            rhs = _sym_derivative(prob, g_of, t)
            worst = max(worst, abs(lhs - rhs))
        diffs.append(eval_functional(prob_y, y, policy) - eval_functional(prob_bar, ybar, policy))

    identity = worst <= LEITMANN_POINT_TOL
    constant = all(math.isclose(d, const, rel_tol=0.0, abs_tol=LEITMANN_FUNCTIONAL_TOL) for d in diffs)
    if not identity:
        logger.warning("leitmann_check: pointwise defect %r exceeds %r", worst, LEITMANN_POINT_TOL)
    return LeitmannReport(
        samples=samples,
        seed=seed,
        max_pointwise_defect=worst,
        boundary_constant=const,
        functional_differences=diffs,
        identity_holds=identity,
        constant_holds=constant,
    )


# ---------------------------------------------------------------- sufficiency sampling


class ExtremizerReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_value: float
    min_perturbed: float | None
    improved: bool
    samples: int
    skipped: int
    seed: int
    assumed: list[str] = Field(default_factory=lambda: list(ASSUMED_HYPOTHESES))


def extremizer_sample(
    prob: VariationalProblem,
    y: RealFunc,
    samples: int = 20,
    *,
    seed: int = 0,
    scale: float = 0.5,
    policy: SeriesPolicy | None = None,
) -> ExtremizerReport:
    """抽样可容许变分 η，报告是否有 L[y+η] < L[y] − 1e-7（只检验充分性方向）。"""
    check_boundary(prob, y)
    rng = np.random.default_rng(seed)
    base = eval_functional(prob, y, policy)
    best: float | None = None
    skipped = 0
    for _ in range(samples):
        bump = random_bump(rng, prob.a, prob.b, 0.0, 0.0, scale)
        r = prob.order

        def eta(t: float, bump: RealFunc = bump, r: int = r) -> float:
            return bump(t) * ((t - prob.a) * (t - prob.b)) ** (r - 1)

        try:
            check_admissible(prob, eta)
        except InadmissibleVariationError:
            skipped += 1
            continue
        value = eval_functional(prob, _perturbed(y, eta, 1.0), policy)
        best = value if best is None else min(best, value)
    if skipped:
        logger.warning("extremizer_sample: skipped %s inadmissible variations", skipped)
    improved = best is not None and best < base - 1e-7
    return ExtremizerReport(
        base_value=base,
        min_perturbed=best,
        improved=improved,
        samples=samples,
        skipped=skipped,
        seed=seed,
    )
