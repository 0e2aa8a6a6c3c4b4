# engine/timescale.py
"""
时标微积分：闭区间、孤立点集与 q-格的有限并；跳跃算子、步长函数，
delta / nabla / diamond-α 导数与积分，对称 ◇-导数及其 γ 权重、菱形积分与不等式。

文本格式（CLI / JSON 使用）::

    union(interval(0, 1), points(2, 4))
    hz(h=0.5, lo=0, hi=3)
    qlattice(q=0.5, c=1, lo=0, hi=1)
    r(lo=0, hi=1)
"""

from __future__ import annotations

import bisect
import logging
import math
import re
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from qcalc.engine.errors import (
    BoundaryExcludedError,
    NotInScaleError,
    PreconditionError,
    ScaleDefinitionError,
    UsageError,
)
from qcalc.engine.expr import DEFAULT_MATCH_EPS, parse_number
from qcalc.engine.numerics import (
    CompensatedSum,
    RealFunc,
    SeriesPolicy,
    SeriesResult,
    adaptive_simpson,
    central_derivative,
    combine,
    default_step,
    exact,
    one_sided_derivative,
    sum_series,
)

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 40
INTERVAL_SAMPLES = 65
LATTICE_SAMPLES = 256


# ---------------------------------------------------------------- pieces


def _close(x: float, y: float, eps: float) -> bool:
    return abs(x - y) <= eps * max(1.0, abs(y))


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ScaleDefinitionError(f"interval needs finite lo < hi, got [{self.lo!r}, {self.hi!r}]")

    def snap(self, t: float, eps: float) -> float | None:
        if _close(t, self.lo, eps):
            return self.lo
        if _close(t, self.hi, eps):
            return self.hi
        return t if self.lo < t < self.hi else None

    def next_in(self, t: float) -> float | None:
        return t if t < self.hi else None

    def prev_in(self, t: float) -> float | None:
        return t if t > self.lo else None

    def discrete(self, a: float, b: float) -> tuple[list[float], QTail | None]:
        return [x for x in (self.lo, self.hi) if a <= x <= b], None

    def describe(self) -> str:
        return f"interval({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True, slots=True)
class PointSet:
    points: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ScaleDefinitionError("point set must not be empty")
        if any(not math.isfinite(x) for x in self.points):
            raise ScaleDefinitionError("points must be finite")
        if any(y <= x for x, y in zip(self.points, self.points[1:], strict=False)):
            raise ScaleDefinitionError("points must be strictly increasing")

    @property
    def lo(self) -> float:
        return self.points[0]

    @property
    def hi(self) -> float:
        return self.points[-1]

    def _index(self, t: float, eps: float) -> int | None:
        i = bisect.bisect_left(self.points, t)
        for j in (i - 1, i):
            if 0 <= j < len(self.points) and _close(t, self.points[j], eps):
                return j
        return None

    def snap(self, t: float, eps: float) -> float | None:
        j = self._index(t, eps)
        return None if j is None else self.points[j]

    def next_in(self, t: float) -> float | None:
        j = bisect.bisect_right(self.points, t)
        return self.points[j] if j < len(self.points) else None

    def prev_in(self, t: float) -> float | None:
        j = bisect.bisect_left(self.points, t) - 1
        return self.points[j] if j >= 0 else None

    def discrete(self, a: float, b: float) -> tuple[list[float], QTail | None]:
        lo = bisect.bisect_left(self.points, a)
        hi = bisect.bisect_right(self.points, b)
        return list(self.points[lo:hi]), None

    def describe(self) -> str:
        return f"points({', '.join(repr(x) for x in self.points)})"


class QTail(NamedTuple):
    """q-格上从 point(start) 起向 0 递减的无穷点列。"""

    lattice: QLattice
    start: int


@dataclass(frozen=True, slots=True)
class QLattice:
    """{c·qⁿ : n ∈ ℤ} ∩ [lo, hi]，lo ≤ 0 时含聚点 0。"""

    q: float
    c: float
    bound_lo: float
    bound_hi: float
    n_top: int = field(init=False)
    n_bottom: int | None = field(init=False)

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise ScaleDefinitionError("q-lattice needs 0 < q < 1")
        if self.c <= 0:
            raise ScaleDefinitionError("q-lattice needs c > 0")
        if self.bound_hi <= 0 or self.bound_lo >= self.bound_hi:
            raise ScaleDefinitionError("q-lattice needs lo < hi and hi > 0")
        log_q = math.log(self.q)
        slack = 1e-12
        n = math.ceil(math.log(self.bound_hi / self.c) / log_q)
        while self.point(n) > self.bound_hi * (1 + slack):
            n += 1
        while self.point(n - 1) <= self.bound_hi * (1 + slack):
            n -= 1
        object.__setattr__(self, "n_top", n)
        bottom: int | None = None
        if self.bound_lo > 0:
            m = math.floor(math.log(self.bound_lo / self.c) / log_q)
            while self.point(m) < self.bound_lo * (1 - slack):
                m -= 1
            while self.point(m + 1) >= self.bound_lo * (1 - slack):
                m += 1
            if m < n:
                raise ScaleDefinitionError("q-lattice has no points inside [lo, hi]")
            bottom = m
        object.__setattr__(self, "n_bottom", bottom)

    def point(self, n: int) -> float:
        return self.c * self.q**n

    @property
    def includes_zero(self) -> bool:
        return self.n_bottom is None

    @property
    def lo(self) -> float:
        return 0.0 if self.n_bottom is None else self.point(self.n_bottom)

    @property
    def hi(self) -> float:
        return self.point(self.n_top)

    def index(self, t: float, eps: float) -> int | None:
        if t <= 0:
            return None
        n = round(math.log(t / self.c) / math.log(self.q))
        if n < self.n_top or (self.n_bottom is not None and n > self.n_bottom):
            return None
        return n if abs(self.point(n) - t) <= eps * t else None

    def snap(self, t: float, eps: float) -> float | None:
        if self.includes_zero and abs(t) <= eps:
            return 0.0
        n = self.index(t, eps)
        return None if n is None else self.point(n)

    def next_in(self, t: float) -> float | None:
        if t == 0.0:
            return 0.0
        n = self.index(t, DEFAULT_MATCH_EPS)
        if n is None or n == self.n_top:
            return None
        return self.point(n - 1)

    def prev_in(self, t: float) -> float | None:
        if t == 0.0:
            return None
        n = self.index(t, DEFAULT_MATCH_EPS)
        if n is None or n == self.n_bottom:
            return None
        return self.point(n + 1)

    def discrete(self, a: float, b: float) -> tuple[list[float], QTail | None]:
        pts: list[float] = []
        if self.includes_zero and a <= 0.0 <= b:
            pts.append(0.0)
        if b <= 0:
            return pts, None
        # [a,b] 中最大的格点
        start = max(self.n_top, math.ceil(math.log(b / self.c) / math.log(self.q) - 1e-9))
        while self.point(start) > b * (1 + 1e-12):
            start += 1
        if self.includes_zero and a <= 0:
            return pts, QTail(self, start)
        n = start
        while (self.n_bottom is None or n <= self.n_bottom) and self.point(n) >= a * (1 - 1e-12):
            pts.append(self.point(n))
            n += 1
        return pts, None

    def describe(self) -> str:
        return f"qlattice(q={self.q!r}, c={self.c!r}, lo={self.bound_lo!r}, hi={self.bound_hi!r})"


type Piece = Interval | PointSet | QLattice


# ---------------------------------------------------------------- records


class PointKind(Enum):
    DENSE = "dense"
    LEFT_SCATTERED_RIGHT_DENSE = "left-scattered-right-dense"
    RIGHT_SCATTERED_LEFT_DENSE = "right-scattered-left-dense"
    ISOLATED = "isolated"


class JumpInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    sigma: float
    rho: float
    mu: float
    nu: float
    classification: PointKind
    is_min: bool = False
    is_max: bool = False


class GammaWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma1: float
    gamma2: float
    # 边界点或单侧稠密点：按公式外推，不属于 𝕋^κ_κ 的标准定义
    extended: bool = False


def _classify(mu: float, nu: float) -> PointKind:
    if mu > 0 and nu > 0:
        return PointKind.ISOLATED
    if mu > 0:
        return PointKind.RIGHT_SCATTERED_LEFT_DENSE
    if nu > 0:
        return PointKind.LEFT_SCATTERED_RIGHT_DENSE
    return PointKind.DENSE


# ---------------------------------------------------------------- TimeScale


def _merge_intervals(ivs: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    for iv in sorted(ivs, key=lambda x: x.lo):
        if out and iv.lo <= out[-1].hi:
            out[-1] = Interval(out[-1].lo, max(out[-1].hi, iv.hi))
        else:
            out.append(iv)
    return out


def _normalize(pieces: list[Piece], eps: float) -> tuple[Piece, ...]:
    intervals = _merge_intervals([p for p in pieces if isinstance(p, Interval)])
    lattices = [p for p in pieces if isinstance(p, QLattice)]
    spans: list[Piece] = sorted([*intervals, *lattices], key=lambda p: p.lo)
    for left, right in zip(spans, spans[1:], strict=False):
        if not left.hi < right.lo:
            raise ScaleDefinitionError(f"pieces {left.describe()} and {right.describe()} overlap")

    raw = sorted({x for p in pieces if isinstance(p, PointSet) for x in p.points})
    points: list[float] = []
    for x in raw:
        if points and _close(x, points[-1], eps):
            continue
        if any(s.snap(x, eps) is not None for s in spans):
            continue
        if any(s.lo < x < s.hi for s in spans):
            raise ScaleDefinitionError(f"point {x!r} falls inside a q-lattice gap")
        points.append(x)

    out: list[Piece] = []
    run: list[float] = []
    k = 0
    for s in spans:
        while k < len(points) and points[k] < s.lo:
            run.append(points[k])
            k += 1
        if run:
            out.append(PointSet(tuple(run)))
            run = []
        out.append(s)
    if k < len(points):
        out.append(PointSet(tuple(points[k:])))
    return tuple(out)


@dataclass(frozen=True)
class TimeScale:
    """闭区间、孤立点与 q-格的有限并；pieces 有序、互不相交、间隔为正。"""

    pieces: tuple[Piece, ...]
    match_eps: float = DEFAULT_MATCH_EPS
    _los: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ScaleDefinitionError("a time scale needs at least one piece")
        for left, right in zip(self.pieces, self.pieces[1:], strict=False):
            if not left.hi < right.lo:
                raise ScaleDefinitionError(
                    f"pieces must be sorted with positive gaps: {left.describe()} / {right.describe()}",
                )
        object.__setattr__(self, "_los", tuple(p.lo for p in self.pieces))

    # -- constructors

    @classmethod
    def of(cls, *pieces: Piece, match_eps: float = DEFAULT_MATCH_EPS) -> TimeScale:
        return cls(_normalize(list(pieces), match_eps), match_eps)

    @classmethod
    def real(cls, lo: float, hi: float) -> TimeScale:
        return cls.of(Interval(lo, hi))

    @classmethod
    def points(cls, *xs: float) -> TimeScale:
        return cls.of(PointSet(tuple(sorted(set(xs)))))

    @classmethod
    def hz(cls, h: float, lo: float, hi: float) -> TimeScale:
        """hℤ ∩ [lo, hi]，格点用 k·h 闭式计算。"""
        if h <= 0:
            raise ScaleDefinitionError("hz needs h > 0")
        k0 = math.ceil(lo / h - 1e-9)
        k1 = math.floor(hi / h + 1e-9)
        if k1 < k0:
            raise ScaleDefinitionError(f"hz(h={h!r}) has no points inside [{lo!r}, {hi!r}]")
        return cls.of(PointSet(tuple(k * h for k in range(k0, k1 + 1))))

    @classmethod
    def qlattice(cls, q: float, c: float, lo: float, hi: float) -> TimeScale:
        return cls.of(QLattice(q, c, lo, hi))

    @classmethod
    def union(cls, *scales: TimeScale) -> TimeScale:
        return cls.of(*(p for s in scales for p in s.pieces))

    def describe(self) -> str:
        if len(self.pieces) == 1:
            return self.pieces[0].describe()
        return f"union({', '.join(p.describe() for p in self.pieces)})"

    # -- queries

    @property
    def min(self) -> float:
        return self.pieces[0].lo

    @property
    def max(self) -> float:
        return self.pieces[-1].hi

    def locate(self, t: float) -> tuple[int, float]:
        """返回 (piece 下标, 规整后的 t)。"""
        tol = self.match_eps * max(1.0, abs(t))
        i = bisect.bisect_right(self._los, t + tol) - 1
        for j in (i, i + 1):
            if 0 <= j < len(self.pieces):
                snapped = self.pieces[j].snap(t, self.match_eps)
                if snapped is not None:
                    return j, snapped
        raise NotInScaleError(f"t={t!r} is not a point of {self.describe()}")

    def contains(self, t: float) -> bool:
        try:
            self.locate(t)
        except NotInScaleError:
            return False
        return True

    def jump(self, t: float) -> JumpInfo:
        i, t = self.locate(t)
        piece = self.pieces[i]
        sigma = piece.next_in(t)
        if sigma is None:
            sigma = self.pieces[i + 1].lo if i + 1 < len(self.pieces) else t
        rho = piece.prev_in(t)
        if rho is None:
            rho = self.pieces[i - 1].hi if i > 0 else t
        mu, nu = sigma - t, t - rho
        return JumpInfo(
            t=t,
            sigma=sigma,
            rho=rho,
            mu=mu,
            nu=nu,
            classification=_classify(mu, nu),
            is_min=t == self.min,
            is_max=t == self.max,
        )

    def sample_points(self, a: float, b: float) -> list[float]:
        """[a,b] 中用于 inf/sup 估计的点：孤立点、区间上 65 个等距点、q-格前 256 个点。"""
        out: list[float] = []
        for piece in self.pieces:
            if piece.hi < a or piece.lo > b:
                continue
            if isinstance(piece, Interval):
                lo, hi = max(a, piece.lo), min(b, piece.hi)
                out.extend(float(x) for x in np.linspace(lo, hi, INTERVAL_SAMPLES))
                continue
            pts, tail = piece.discrete(a, b)
            out.extend(pts)
            if tail is not None:
                out.extend(tail.lattice.point(tail.start + n) for n in range(LATTICE_SAMPLES))
        return sorted(set(out))


def jump(T: TimeScale, t: float) -> JumpInfo:
    return T.jump(t)


def in_kappa(T: TimeScale, t: float) -> bool:
    """t ∈ 𝕋^κ：去掉左离散的最大值。"""
    info = T.jump(t)
    return not (info.is_max and info.nu > 0)


def in_kappa_lower(T: TimeScale, t: float) -> bool:
    """t ∈ 𝕋_κ：去掉右离散的最小值。"""
    info = T.jump(t)
    return not (info.is_min and info.mu > 0)


# ---------------------------------------------------------------- derivatives


def _dense_derivative(T: TimeScale, f: RealFunc, t: float, step: float | None) -> float:
    i, t = T.locate(t)
    piece = T.pieces[i]
    h0 = step if step is not None else default_step(t)
    if isinstance(piece, QLattice) and t == 0.0:
        return one_sided_derivative(f, t, "forward", min(h0, piece.hi))
    if not isinstance(piece, Interval):
        raise BoundaryExcludedError(f"t={t!r} has no dense neighbourhood in {T.describe()}")
    left, right = t - piece.lo, piece.hi - t
    if left > 0 and right > 0:
        return central_derivative(f, t, min(h0, left, right))
    if right > 0:
        return one_sided_derivative(f, t, "forward", min(h0, right))
    return one_sided_derivative(f, t, "backward", min(h0, left))


def delta_derivative(T: TimeScale, f: RealFunc, t: float, step: float | None = None) -> float:
    info = T.jump(t)
    if info.is_max and info.nu > 0:
        raise BoundaryExcludedError(f"t={info.t!r} is a left-scattered maximum, outside T^kappa")
    if info.mu > 0:
        return (float(f(info.sigma)) - float(f(info.t))) / info.mu
    if info.is_max and info.is_min:
        raise BoundaryExcludedError("a one-point time scale has no derivative")
    return _dense_derivative(T, f, info.t, step)


def nabla_derivative(T: TimeScale, f: RealFunc, t: float, step: float | None = None) -> float:
    info = T.jump(t)
    if info.is_min and info.mu > 0:
        raise BoundaryExcludedError(f"t={info.t!r} is a right-scattered minimum, outside T_kappa")
    if info.nu > 0:
        return (float(f(info.t)) - float(f(info.rho))) / info.nu
    if info.is_max and info.is_min:
        raise BoundaryExcludedError("a one-point time scale has no derivative")
    return _dense_derivative(T, f, info.t, step)


def gamma_weights(T: TimeScale, t: float) -> GammaWeights:
    """γ₁ = (σ−t)/(σ−ρ)，γ₂ = (t−ρ)/(σ−ρ)；σ = ρ = t 时取 (1/2, 1/2)。"""
    info = T.jump(t)
    one_sided = (info.mu > 0) != (info.nu > 0)
    extended = info.is_min or info.is_max or one_sided
    if info.sigma == info.rho:
        return GammaWeights(gamma1=0.5, gamma2=0.5, extended=extended)
    width = info.sigma - info.rho
    return GammaWeights(gamma1=info.mu / width, gamma2=info.nu / width, extended=extended)


def sym_diamond_derivative(T: TimeScale, f: RealFunc, t: float, step: float | None = None) -> float:
    """非稠密点取 (f(σ) − f(ρ))/(σ − ρ)，稠密点取经典导数（f 需连续）。"""
    info = T.jump(t)
    if info.is_max and info.nu > 0:
        raise BoundaryExcludedError(f"t={info.t!r} is a left-scattered maximum")
    if info.is_min and info.mu > 0:
        raise BoundaryExcludedError(f"t={info.t!r} is a right-scattered minimum")
    if info.classification is not PointKind.DENSE:
        return (float(f(info.sigma)) - float(f(info.rho))) / (info.sigma - info.rho)
    if info.is_max and info.is_min:
        raise BoundaryExcludedError("a one-point time scale has no derivative")
    return _dense_derivative(T, f, info.t, step)


def diamond_alpha_derivative(
    T: TimeScale,
    f: RealFunc,
    t: float,
    alpha: float,
    step: float | None = None,
) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise UsageError("alpha must lie in [0, 1]")
    if alpha == 1.0:
        return delta_derivative(T, f, t, step)
    if alpha == 0.0:
        return nabla_derivative(T, f, t, step)
    return alpha * delta_derivative(T, f, t, step) + (1.0 - alpha) * nabla_derivative(T, f, t, step)


def simple_useful_formula(T: TimeScale, f: RealFunc, t: float) -> tuple[float, float]:
    """返回 (f(σ(t)), f(t) + μ(t)·f^Δ(t))。"""
    info = T.jump(t)
    return float(f(info.sigma)), float(f(info.t)) + info.mu * delta_derivative(T, f, info.t)


# ---------------------------------------------------------------- integrals

Side = Literal["delta", "nabla"]
Contribution = Callable[[float, JumpInfo], float]


def _discrete_sum(
    T: TimeScale,
    a: float,
    b: float,
    contribution: Contribution,
    policy: SeriesPolicy | None,
) -> SeriesResult:
    acc = CompensatedSum()
    used = 0
    parts: list[tuple[float, SeriesResult]] = []
    for piece in T.pieces:
        if piece.hi < a or piece.lo > b:
            continue
        pts, tail = piece.discrete(a, b)
        for x in pts:
            acc.add(contribution(x, T.jump(x)))
            used += 1
        if tail is not None:
            lattice, start = tail

            def term(n: int, lattice: QLattice = lattice, start: int = start) -> float:
                x = lattice.point(start + n)
                return contribution(x, T.jump(x))

            parts.append((1.0, sum_series(term, policy)))
    return combine((1.0, exact(acc.value, used)), *parts)


def _dense_integral(
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    tol: float,
    max_depth: int,
) -> float:
    total = 0.0
    for piece in T.pieces:
        if isinstance(piece, Interval):
            lo, hi = max(a, piece.lo), min(b, piece.hi)
            if lo < hi:
                total += adaptive_simpson(f, lo, hi, tol, max_depth)
    return total


def _endpoints(T: TimeScale, a: float, b: float) -> tuple[float, float]:
    _, a = T.locate(a)
    _, b = T.locate(b)
    return a, b


def _side_integral(  # noqa: PLR0913
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    side: Side,
    policy: SeriesPolicy | None,
    tol: float,
    max_depth: int,
) -> float:
    a, b = _endpoints(T, a, b)
    if a == b:
        return 0.0
    if a > b:
        return -_side_integral(T, f, b, a, side, policy, tol, max_depth)

    def contribution(x: float, info: JumpInfo) -> float:
        if side == "delta":
            return info.mu * float(f(x)) if a <= x < b and info.mu > 0 else 0.0
        return info.nu * float(f(x)) if a < x <= b and info.nu > 0 else 0.0

    dense = _dense_integral(T, f, a, b, tol, max_depth)
    return dense + _discrete_sum(T, a, b, contribution, policy).require()


def delta_integral(
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    tol: float = QUAD_TOL,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """区间部分自适应 Simpson，[a,b) 中右离散点贡献 μ(t)f(t)。"""
    return _side_integral(T, f, a, b, "delta", policy, tol, max_depth)


def nabla_integral(
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    tol: float = QUAD_TOL,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """区间部分自适应 Simpson，(a,b] 中左离散点贡献 ν(t)f(t)。"""
    return _side_integral(T, f, a, b, "nabla", policy, tol, max_depth)


def diamond_alpha_integral(  # noqa: PLR0913
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    alpha: float,
    policy: SeriesPolicy | None = None,
    *,
    tol: float = QUAD_TOL,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise UsageError("alpha must lie in [0, 1]")
    total = 0.0
    if alpha > 0:
        total += alpha * delta_integral(T, f, a, b, policy, tol=tol, max_depth=max_depth)
    if alpha < 1:
        total += (1.0 - alpha) * nabla_integral(T, f, a, b, policy, tol=tol, max_depth=max_depth)
    return total


def diamond_integral(
    T: TimeScale,
    f: RealFunc,
    a: float,
    b: float,
    policy: SeriesPolicy | None = None,
    *,
    tol: float = QUAD_TOL,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """∫γ₁f Δt + ∫γ₂f ∇t；稠密部分 γ₁ = γ₂ = 1/2，两侧合并为 ∫f。"""
    a, b = _endpoints(T, a, b)
    if a == b:
        return 0.0
    if a > b:
        return -diamond_integral(T, f, b, a, policy, tol=tol, max_depth=max_depth)

    def contribution(x: float, info: JumpInfo) -> float:
        if info.mu == 0 and info.nu == 0:
            return 0.0
        g = gamma_weights(T, x)
        if g.extended and (x == a or x == b):
            logger.debug("diamond_integral: extended gamma at boundary t=%r", x)
        out = 0.0
        fx = float(f(x))
        if a <= x < b and info.mu > 0:
            out += g.gamma1 * info.mu * fx
        if a < x <= b and info.nu > 0:
            out += g.gamma2 * info.nu * fx
        return out

    dense = _dense_integral(T, f, a, b, tol, max_depth)
    return dense + _discrete_sum(T, a, b, contribution, policy).require()


# ---------------------------------------------------------------- inequalities


class DiamondKind(Enum):
    HOLDER = "holder"
    CAUCHY_SCHWARZ = "cauchy_schwarz"
    MINKOWSKI = "minkowski"
    MVT = "mvt"


class DiamondReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DiamondKind
    lhs: float
    rhs: float
    holds: bool
    exponent: float | None = None
    K: float | None = None
    inf_f: float | None = None
    sup_f: float | None = None


def diamond_inequality_check(  # noqa: PLR0913
    kind: DiamondKind | str,
    f: RealFunc,
    g: RealFunc,
    T: TimeScale,
    a: float,
    b: float,
    exponent: float = 2.0,
    policy: SeriesPolicy | None = None,
) -> DiamondReport:
    """菱形积分的 Hölder / Cauchy–Schwarz / Minkowski 不等式与积分中值定理。"""
    kind = DiamondKind(kind)

    def integral(h: RealFunc) -> float:
        return diamond_integral(T, h, a, b, policy)

    if kind is DiamondKind.MVT:
        pts = T.sample_points(min(a, b), max(a, b))
        if any(float(g(x)) < 0 for x in pts):
            raise PreconditionError("g must be non-negative on the scale points of [a, b]")
        int_fg = integral(lambda t: float(f(t)) * float(g(t)))
        int_g = integral(g)
        K = 0.0 if int_g == 0.0 else int_fg / int_g
        fs = [float(f(x)) for x in pts]
        lo, hi = min(fs), max(fs)
        slack = 1e-9 * max(1.0, abs(lo), abs(hi))
        return DiamondReport(
            kind=kind,
            lhs=lo,
            rhs=hi,
            holds=lo - slack <= K <= hi + slack,
            K=K,
            inf_f=lo,
            sup_f=hi,
        )

    if kind is DiamondKind.CAUCHY_SCHWARZ:
        exponent = 2.0
    if exponent <= 1:
        raise UsageError(f"exponent must exceed 1, got {exponent!r}")
    conj = exponent / (exponent - 1.0)

    def norm(h: RealFunc, p: float) -> float:
        return max(integral(lambda t: abs(float(h(t))) ** p), 0.0) ** (1.0 / p)

    if kind is DiamondKind.MINKOWSKI:
        lhs = norm(lambda t: float(f(t)) + float(g(t)), exponent)
        rhs = norm(f, exponent) + norm(g, exponent)
    else:
        lhs = integral(lambda t: abs(float(f(t)) * float(g(t))))
        rhs = norm(f, exponent) * norm(g, conj)
    holds = lhs <= rhs + 1e-9 * max(1.0, rhs)
    if not holds:
        logger.warning("diamond_inequality_check: %s violated lhs=%r rhs=%r", kind.value, lhs, rhs)
    return DiamondReport(kind=kind, lhs=lhs, rhs=rhs, holds=holds, exponent=exponent)


# ---------------------------------------------------------------- text format

_CALL_RE = re.compile(r"^\s*([a-z]+)\s*\((.*)\)\s*$", re.DOTALL)


def _split_args(body: str) -> list[str]:
    args: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            args.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or args:
        args.append(tail)
    return args


def _bind(name: str, args: list[str], params: tuple[str, ...]) -> dict[str, float]:
    out: dict[str, float] = {}
    for i, raw in enumerate(args):
        key, eq, val = raw.partition("=")
        if eq:
            key = key.strip()
            if key not in params:
                raise UsageError(f"{name}() has no parameter {key!r}")
            out[key] = parse_number(val)
        elif i < len(params):
            out[params[i]] = parse_number(raw)
        else:
            raise UsageError(f"{name}() takes at most {len(params)} arguments")
    missing = [p for p in params if p not in out]
    if missing:
        raise UsageError(f"{name}() is missing {missing}")
    return out


def parse_scale(text: str) -> TimeScale:
    """解析时标文本，例如 ``union(interval(0,1), points(2,4))``。"""
    m = _CALL_RE.match(text)
    if m is None:
        raise UsageError(f"cannot parse time scale {text!r}")
    name, body = m.group(1), m.group(2)
    args = _split_args(body)
    match name:
        case "r" | "interval":
            kw = _bind(name, args, ("lo", "hi"))
            return TimeScale.real(kw["lo"], kw["hi"])
        case "points":
            if not args:
                raise UsageError("points() needs at least one point")
            return TimeScale.points(*(parse_number(a) for a in args))
        case "hz":
            kw = _bind(name, args, ("h", "lo", "hi"))
            return TimeScale.hz(kw["h"], kw["lo"], kw["hi"])
        case "qlattice":
            kw = _bind(name, args, ("q", "c", "lo", "hi"))
            return TimeScale.qlattice(kw["q"], kw["c"], kw["lo"], kw["hi"])
        case "union":
            if not args:
                raise UsageError("union() needs at least one scale")
            return TimeScale.union(*(parse_scale(a) for a in args))
    raise UsageError(f"unknown time scale constructor {name!r}")
