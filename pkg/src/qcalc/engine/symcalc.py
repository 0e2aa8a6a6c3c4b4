# engine/symcalc.py
"""
对称量子微积分：α,β-对称导数与 Nörlund 和、q-对称与 Hahn 对称导数/积分、
中值定理见证点构造以及积分不等式校验。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qcalc.engine.errors import (
    EvalError,
    LatticeMismatchError,
    NotOnLatticeError,
    NoWitnessError,
    PreconditionError,
    QCalcError,
    UsageError,
)
from qcalc.engine.expr import DEFAULT_MATCH_EPS
from qcalc.engine.numerics import (
    CompensatedSum,
    RealFunc,
    SeriesPolicy,
    SeriesResult,
    TermFunc,
    bisect_root,
    central_derivative,
    combine,
    exact,
    sum_series,
)
from qcalc.engine.quantum import QUOTIENT_GUARD, QOmegaParams, lattice_steps, sigma_orbit

logger = logging.getLogger(__name__)

MAX_LATTICE_STEPS = 1_000_000
MVT_SAMPLE_POINTS = 256
WITNESS_RESIDUAL_TOL = 1e-8
ROLLE_TOL = 1e-9
FERMAT_HALVINGS = 20
# 有限和路径的尾巴收敛判据：k·|f(x ± kα)| 在 k = 2⁴…2²⁰ 上至少衰减三个数量级
TAIL_SAMPLES = tuple(2**j for j in range(4, 21))
TAIL_DECAY_RATIO = 1e-3


class AlphaBetaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(ge=0)
    beta: float = Field(ge=0)

    @model_validator(mode="after")
    def _one_positive(self) -> AlphaBetaParams:
        if self.alpha + self.beta <= 0:
            raise ValueError("at least one of alpha, beta must be positive")
        return self

    @property
    def weights(self) -> tuple[float, float]:
        s = self.alpha + self.beta
        return self.alpha / s, self.beta / s


# ---------------------------------------------------------------- α,β-symmetric


def ab_sym_derivative(f: RealFunc, p: AlphaBetaParams, t: float) -> float:
    """(f(t+α) − f(t−β)) / (α+β)。"""
    return (float(f(t + p.alpha)) - float(f(t - p.beta))) / (p.alpha + p.beta)


def h_sym_derivative(f: RealFunc, h: float, t: float) -> float:
    """α = β = h 的对称差商。"""
    if h <= 0:
        raise UsageError("h must be positive")
    return ab_sym_derivative(f, AlphaBetaParams(alpha=h, beta=h), t)


def _telescoped_steps(a: float, b: float, step: float, match_eps: float) -> int | None:
    try:
        n = lattice_steps(a, b, step, match_eps)
    except NotOnLatticeError:
        return None
    return n if abs(n) <= MAX_LATTICE_STEPS else None


def _tail_check(g: TermFunc, step: float) -> SeriesResult:
    """
    有限和已给出数值，尾巴只需判断是否收敛（定义要求 a、b 两端的级数都收敛）。

    value 恒为 0；未通过衰减检验时 converged=False，est_error 为最远探测点的 step·k·|g(k)|。
    尾部溢出或无定义同样记为不收敛。
    """

    def weight(k: int) -> float:
        try:
            return k * abs(float(g(k)))
        except (OverflowError, EvalError):
            return math.inf

    weights = [weight(k) for k in TAIL_SAMPLES]
    if not all(math.isfinite(w) for w in weights):
        return SeriesResult(value=0.0, terms_used=len(weights), est_error=math.inf, converged=False)
    top = max(weights)
    last = max(weights[-4:])
    if top == 0.0 or last <= TAIL_DECAY_RATIO * top:
        return exact(0.0, len(weights))
    logger.warning("norlund tail does not decay: k*|f| went from %r to %r", top, last)
    return SeriesResult(value=0.0, terms_used=len(weights), est_error=step * last, converged=False)


def alpha_forward_integral(
    f: RealFunc,
    alpha: float,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """
    Nörlund 和 ∫_a^b f Δ_α t = ∫_a^∞ − ∫_b^∞，∫_x^∞ = α·Σ_{k≥0} f(x+kα)。

    b − a 是 α 的整数倍时两条尾巴相消，直接求有限和 α·Σ_{k<n} f(a+kα)，
    另对 b 端的尾巴做衰减检验。
    """
    if alpha <= 0:
        raise UsageError("alpha must be positive")
    if a == b:
        return exact(0.0)
    n = _telescoped_steps(a, b, alpha, match_eps)
    if n is not None:
        lo, count, sign = (a, n, 1.0) if n > 0 else (b, -n, -1.0)
        acc = CompensatedSum()
        for k in range(count):
            acc.add(float(f(lo + k * alpha)))
        far = lo + count * alpha
        tail = _tail_check(lambda k: f(far + k * alpha), alpha)
        return combine((1.0, exact(sign * alpha * acc.value, count)), (1.0, tail))

    def tail(x: float) -> SeriesResult:
        return sum_series(lambda k: float(f(x + k * alpha)), policy).scaled(alpha)

    return combine((1.0, tail(a)), (-1.0, tail(b)))


def beta_backward_integral(
    f: RealFunc,
    beta: float,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """∫_a^b f ∇_β t = ∫_{−∞}^b − ∫_{−∞}^a，∫_{−∞}^x = β·Σ_{k≥0} f(x−kβ)。"""
    if beta <= 0:
        raise UsageError("beta must be positive")
    if a == b:
        return exact(0.0)
    n = _telescoped_steps(a, b, beta, match_eps)
    if n is not None:
        hi, count, sign = (b, n, 1.0) if n > 0 else (a, -n, -1.0)
        acc = CompensatedSum()
        for k in range(count):
            acc.add(float(f(hi - k * beta)))
        far = hi - count * beta
        tail = _tail_check(lambda k: f(far - k * beta), beta)
        return combine((1.0, exact(sign * beta * acc.value, count)), (1.0, tail))

    def tail(x: float) -> SeriesResult:
        return sum_series(lambda k: float(f(x - k * beta)), policy).scaled(beta)

    return combine((1.0, tail(b)), (-1.0, tail(a)))


def ab_sym_integral(
    f: RealFunc,
    p: AlphaBetaParams,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """α/(α+β)·∫Δ_α + β/(α+β)·∫∇_β；权重为 0 的一侧不求值。"""
    if a == b:
        return exact(0.0)
    w_fwd, w_bwd = p.weights
    parts: list[tuple[float, SeriesResult]] = []
    if w_fwd > 0:
        parts.append((w_fwd, alpha_forward_integral(f, p.alpha, a, b, policy, match_eps=match_eps)))
    if w_bwd > 0:
        parts.append((w_bwd, beta_backward_integral(f, p.beta, a, b, policy, match_eps=match_eps)))
    return combine(*parts)


class FtcDemo(NamedTuple):
    lhs: float
    rhs: float
    antiderivative: float


def _ftc_counterexample(t: float) -> float:
    # 非负整数上取 2^{-t}，其余为 0
    if t >= 0 and float(t).is_integer():
        return 2.0 ** (-t)
    return 0.0


def ab_ftc_failure_demo(t: int) -> FtcDemo:
    """
    α = β = 1 时 D_{1,1}[x ↦ ∫_0^x f] 与 f 不一致的反例。

    >>> ab_ftc_failure_demo(1)
    FtcDemo(lhs=0.5625, rhs=0.5, antiderivative=0.75)
    """
    if t < 1:
        raise UsageError("t must be a positive integer")
    p = AlphaBetaParams(alpha=1.0, beta=1.0)

    def antiderivative(x: float) -> float:
        return ab_sym_integral(_ftc_counterexample, p, 0.0, x).require()

    lhs = ab_sym_derivative(antiderivative, p, float(t))
    return FtcDemo(lhs=lhs, rhs=_ftc_counterexample(float(t)), antiderivative=antiderivative(t))


# ---------------------------------------------------------------- q- and Hahn-symmetric


def q_sym_derivative(
    f: RealFunc,
    q: float,
    t: float,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
    step: float | None = None,
) -> float:
    """(f(qt) − f(t/q)) / (qt − t/q)；|t| 小于舍入阈值时取 t 处的经典导数。"""
    if not 0 < q < 1:
        raise UsageError("q must lie in (0, 1)")
    if abs(t) <= max(match_eps, QUOTIENT_GUARD):
        return central_derivative(f, t, step)
    lo, hi = q * t, t / q
    return (float(f(lo)) - float(f(hi))) / (lo - hi)


def q_sym_primitive(
    f: RealFunc,
    q: float,
    x: float,
    policy: SeriesPolicy | None = None,
) -> SeriesResult:
    """∫_0^x = (1−q²)·x·Σ_{n≥0} q^{2n} f(q^{2n+1}x)。"""
    if x == 0.0:
        return exact(0.0)
    q2 = q * q

    def term(n: int) -> float:
        return q2**n * float(f(q ** (2 * n + 1) * x))

    return sum_series(term, policy).scaled((1.0 - q2) * x)


def q_sym_integral(
    f: RealFunc,
    q: float,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
) -> SeriesResult:
    if not 0 < q < 1:
        raise UsageError("q must lie in (0, 1)")
    if a == b:
        return exact(0.0)
    return combine((1.0, q_sym_primitive(f, q, b, policy)), (-1.0, q_sym_primitive(f, q, a, policy)))


def hahn_sym_derivative(
    f: RealFunc,
    p: QOmegaParams,
    t: float,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
    step: float | None = None,
) -> float:
    """(f(σ(t)) − f(σ⁻¹(t))) / (σ(t) − σ⁻¹(t))；ω0 附近（QUOTIENT_GUARD 以内）取经典导数。"""
    if p.at_fixed_point(t, max(match_eps, QUOTIENT_GUARD)):
        logger.debug("hahn_sym_derivative: t=%r next to omega0, classical branch", t)
        return central_derivative(f, t, step)
    fwd, bwd = p.sigma(t), p.sigma_inv(t)
    return (float(f(fwd)) - float(f(bwd))) / (fwd - bwd)


def hahn_sym_primitive(
    f: RealFunc,
    p: QOmegaParams,
    x: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    """∫_{ω0}^x = (σ⁻¹(x) − σ(x))·Σ_{n≥0} q^{2n+1} f(σ^{2n+1}(x))。"""
    if p.at_fixed_point(x, match_eps):
        return exact(0.0)
    q = p.q

    def term(n: int) -> float:
        return q ** (2 * n + 1) * float(f(sigma_orbit(p, x, 2 * n + 1)))

    return sum_series(term, policy).scaled(p.sigma_inv(x) - p.sigma(x))


def hahn_sym_integral(
    f: RealFunc,
    p: QOmegaParams,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> SeriesResult:
    if a == b:
        return exact(0.0)
    out = combine(
        (1.0, hahn_sym_primitive(f, p, b, policy, match_eps=match_eps)),
        (-1.0, hahn_sym_primitive(f, p, a, policy, match_eps=match_eps)),
    )
    logger.debug("hahn_sym_integral: [%r, %r] -> %r (terms=%s)", a, b, out.value, out.terms_used)
    return out


@dataclass(frozen=True, slots=True)
class SymLatticePoint:
    """[s]_{q,ω} 中的点 σ^{2n+1}(s)。"""

    params: QOmegaParams
    generator: float
    index: int

    @property
    def value(self) -> float:
        return sigma_orbit(self.params, self.generator, 2 * self.index + 1)


def sym_lattice(p: QOmegaParams, s: float, depth: int = 24) -> list[float]:
    """[s]_{q,ω} 的前 depth+1 个点（含 ω0），升序。"""
    if depth < 0:
        raise UsageError("depth must be non-negative")
    pts = {SymLatticePoint(p, s, n).value for n in range(depth + 1)}
    pts.add(p.omega0)
    return sorted(pts)


# ---------------------------------------------------------------- mean value witnesses


class WitnessKind(Enum):
    FERMAT = "fermat"
    ROLLE = "rolle"
    LAGRANGE = "lagrange"
    CAUCHY = "cauchy"


class WitnessRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: WitnessKind
    alpha: float
    beta: float
    c: float
    residual: float
    target: str
    grid: int


def _witness_target(
    kind: WitnessKind,
    f: RealFunc,
    g: RealFunc | None,
    a: float,
    b: float,
) -> tuple[RealFunc, str]:
    fa, fb = float(f(a)), float(f(b))
    match kind:
        case WitnessKind.FERMAT:
            return f, "f"
        case WitnessKind.ROLLE:
            if abs(fa - fb) > ROLLE_TOL:
                raise PreconditionError(f"Rolle needs f(a) = f(b), got {fa!r} and {fb!r}")
            return f, "f"
        case WitnessKind.LAGRANGE:
            slope = (fb - fa) / (b - a)
            return (lambda t: float(f(t)) - slope * t), f"f - {slope!r}*t"
        case WitnessKind.CAUCHY:
            if g is None:
                raise UsageError("cauchy witness needs g")
            ga, gb = float(g(a)), float(g(b))
            if ga == gb:
                raise NoWitnessError("g(a) = g(b): the Cauchy ratio is undefined")
            ratio = (fb - fa) / (gb - ga)
            return (lambda t: float(f(t)) - ratio * float(g(t))), f"f - {ratio!r}*g"
    raise UsageError(f"unknown witness kind {kind!r}")


def _fermat_centre(h: RealFunc, a: float, b: float, t0: float, grid: int) -> tuple[float, float, float]:
    if not a < t0 < b:
        raise PreconditionError(f"t0={t0!r} must lie strictly inside ({a!r}, {b!r})")
    delta = min((b - a) / grid, t0 - a, b - t0)
    h0 = float(h(t0))
    for _ in range(FERMAT_HALVINGS + 1):
        left, right = float(h(t0 - delta)), float(h(t0 + delta))
        if h0 >= left and h0 >= right:
            return t0, delta, 1.0
        if h0 <= left and h0 <= right:
            return t0, delta, -1.0
        delta /= 2.0
    raise PreconditionError(f"f has no local extremum at t0={t0!r}")


def _grid_centre(h: RealFunc, a: float, b: float, grid: int) -> tuple[float, float, float]:
    ts = np.linspace(a, b, grid + 1)
    hs = np.array([float(h(float(t))) for t in ts])
    dev = np.abs(hs[1:-1] - hs[0])
    i = int(np.argmax(dev)) + 1
    delta = (b - a) / grid
    if dev[i - 1] == 0.0:
        # h 在格点上恒定，取中点
        mid = grid // 2
        return float(ts[mid]), delta, 1.0
    sgn = 1.0 if hs[i] > hs[0] else -1.0
    return float(ts[i]), delta, sgn


def mvt_witness(
    kind: WitnessKind | str,
    f: RealFunc,
    g: RealFunc | None,
    a: float,
    b: float,
    t0: float | None = None,
    *,
    grid: int = 1024,
    bisect_tol: float = 1e-14,
) -> WitnessRecord:
    """
    构造性地寻找 (α, β, c) 使 D_{α,β}[目标函数](c) = 0。

    先在确定性网格上取 |h − h(a)| 的最大点 c（Fermat 直接用 t0），
    再令 H = ±h 在 c 处取局部极大，在 [0, δ] 上二分使 H(c+α) = H(c−β)。
    """
    kind = WitnessKind(kind)
    if not a < b:
        raise UsageError("witness search needs a < b")
    h, target = _witness_target(kind, f, g, a, b)
    if kind is WitnessKind.FERMAT:
        if t0 is None:
            raise UsageError("fermat witness needs t0")
        c, delta, sgn = _fermat_centre(h, a, b, t0, grid)
    else:
        c, delta, sgn = _grid_centre(h, a, b, grid)

    def H(t: float) -> float:
        return sgn * float(h(t))

    right, left = H(c + delta), H(c - delta)
    try:
        if right == left:
            alpha = beta = delta
        elif right > left:
            alpha = delta
            beta = bisect_root(lambda r: H(c - r) - right, 0.0, delta, bisect_tol)
        else:
            beta = delta
            alpha = bisect_root(lambda r: H(c + r) - left, 0.0, delta, bisect_tol)
    except QCalcError as e:
        raise NoWitnessError(f"bisection failed near c={c!r}: {e}") from e

    if alpha + beta <= 0:
        raise NoWitnessError(f"degenerate witness at c={c!r}")
    residual = abs(ab_sym_derivative(h, AlphaBetaParams(alpha=alpha, beta=beta), c))
    logger.debug(
        "mvt_witness: kind=%s c=%r alpha=%r beta=%r residual=%r",
        kind.value,
        c,
        alpha,
        beta,
        residual,
    )
    if residual > WITNESS_RESIDUAL_TOL:
        raise NoWitnessError(f"best witness at c={c!r} leaves residual {residual!r}")
    return WitnessRecord(
        kind=kind,
        alpha=alpha,
        beta=beta,
        c=c,
        residual=residual,
        target=target,
        grid=grid,
    )


# ---------------------------------------------------------------- inequalities


class InequalityKind(Enum):
    HOLDER = "holder"
    CAUCHY_SCHWARZ = "cauchy_schwarz"
    MINKOWSKI = "minkowski"


class InequalityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: InequalityKind
    lhs: float
    rhs: float
    holds: bool
    exponent: float
    conjugate: float
    tails_converged: bool = True


class MvtReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: float
    integral_fg: float
    integral_g: float
    inf_f: float
    sup_f: float
    within: bool
    samples: int
    tails_converged: bool = True


def check_lattice(
    p: AlphaBetaParams,
    a: float,
    b: float,
    match_eps: float = DEFAULT_MATCH_EPS,
) -> tuple[int, int]:
    """b ∈ {a + kα}、a ∈ {b − kβ}（k ≤ 10⁶）；返回两侧步数，权重为 0 的一侧记 0。"""
    if a > b:
        raise UsageError("lattice checks need a <= b")
    steps: list[int] = []
    for name, h in (("alpha", p.alpha), ("beta", p.beta)):
        if h == 0:
            steps.append(0)
            continue
        try:
            n = lattice_steps(a, b, h, match_eps)
        except NotOnLatticeError as e:
            raise LatticeMismatchError(f"b - a is not a multiple of {name}={h!r}") from e
        if n > MAX_LATTICE_STEPS:
            raise LatticeMismatchError(f"(b - a)/{name} = {n} exceeds {MAX_LATTICE_STEPS}")
        steps.append(n)
    return steps[0], steps[1]


def _aligned_integral(
    f: RealFunc,
    p: AlphaBetaParams,
    a: float,
    b: float,
    policy: SeriesPolicy | None,
    tails: list[bool],
) -> float:
    """端点对齐时积分就是 𝒜 ∪ ℬ 上的有限和；两端尾巴是否收敛记入 tails。"""
    res = ab_sym_integral(f, p, a, b, policy)
    tails.append(res.converged)
    return res.value


def _norm(
    f: RealFunc,
    p: AlphaBetaParams,
    a: float,
    b: float,
    exponent: float,
    policy: SeriesPolicy | None,
    tails: list[bool],
) -> float:
    val = _aligned_integral(lambda t: abs(float(f(t))) ** exponent, p, a, b, policy, tails)
    return max(val, 0.0) ** (1.0 / exponent)


def inequality_check(
    kind: InequalityKind | str,
    f: RealFunc,
    g: RealFunc,
    p: AlphaBetaParams,
    a: float,
    b: float,
    exponent: float = 2.0,
    policy: SeriesPolicy | None = None,
) -> InequalityReport:
    """
    Hölder / Cauchy–Schwarz / Minkowski 两侧的 α,β-对称积分。

    端点须落在格上；尾巴不收敛时仍按有限和比较，tails_converged 记为 False。
    """
    kind = InequalityKind(kind)
    if kind is InequalityKind.CAUCHY_SCHWARZ:
        exponent = 2.0
    conj = conjugate_exponent(exponent)
    check_lattice(p, a, b)
    tails: list[bool] = []

    if kind is InequalityKind.MINKOWSKI:
        lhs = _norm(lambda t: float(f(t)) + float(g(t)), p, a, b, exponent, policy, tails)
        rhs = _norm(f, p, a, b, exponent, policy, tails) + _norm(g, p, a, b, exponent, policy, tails)
    else:
        lhs = _aligned_integral(lambda t: abs(float(f(t)) * float(g(t))), p, a, b, policy, tails)
        rhs = _norm(f, p, a, b, exponent, policy, tails) * _norm(g, p, a, b, conj, policy, tails)

    holds = lhs <= rhs + 1e-9 * max(1.0, rhs)
    if not holds:
        logger.warning("inequality_check: %s violated lhs=%r rhs=%r", kind.value, lhs, rhs)
    return InequalityReport(
        kind=kind,
        lhs=lhs,
        rhs=rhs,
        holds=holds,
        exponent=exponent,
        conjugate=conj,
        tails_converged=all(tails),
    )


def integral_mvt_check(
    f: RealFunc,
    g: RealFunc,
    p: AlphaBetaParams,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
) -> MvtReport:
    """
    K = ∫fg / ∫g（∫g = 0 时 K = 0），并检查 inf f ≤ K ≤ sup f。

    inf/sup 只在每条轨道前 256 个格点上估计。
    """
    n_fwd, n_bwd = check_lattice(p, a, b)
    pts = [a + k * p.alpha for k in range(min(n_fwd, MVT_SAMPLE_POINTS))]
    pts += [b - k * p.beta for k in range(min(n_bwd, MVT_SAMPLE_POINTS))]
    for t in pts:
        if float(g(t)) < 0:
            raise PreconditionError(f"g must be non-negative on the lattice, g({t!r}) < 0")

    tails: list[bool] = []
    int_fg = _aligned_integral(lambda t: float(f(t)) * float(g(t)), p, a, b, policy, tails)
    int_g = _aligned_integral(g, p, a, b, policy, tails)
    K = 0.0 if int_g == 0.0 else int_fg / int_g

    fs = [float(f(t)) for t in pts] or [K]
    lo, hi = min(fs), max(fs)
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    within = lo - slack <= K <= hi + slack
    if not within:
        logger.warning("integral_mvt_check: K=%r outside sampled [%r, %r]", K, lo, hi)
    return MvtReport(
        K=K,
        integral_fg=int_fg,
        integral_g=int_g,
        inf_f=lo,
        sup_f=hi,
        within=within,
        samples=len(pts),
        tails_converged=all(tails),
    )


def conjugate_exponent(p: float) -> float:
    if p <= 1 or not math.isfinite(p):
        raise UsageError("exponent must be a finite number > 1")
    return p / (p - 1.0)
