# cli/commands/calculus.py
"""deriv / integ：单个差分算子或积分的求值。"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import typer

from qcalc.cli import jobs
from qcalc.cli.commands.common import JOB_HELP, OUTPUT_HELP, OVERRIDE_HELP, emit
from qcalc.cli.schemas import Command, JobSpec
from qcalc.engine import quantum, symcalc, timescale
from qcalc.engine.errors import UsageError
from qcalc.engine.expr import parse_number
from qcalc.engine.numerics import RealFunc, SeriesPolicy, SeriesResult, exact

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig

DerivativeOp = Callable[[RealFunc, float], float]
IntegralOp = Callable[[RealFunc, float, float, SeriesPolicy], SeriesResult | float]

DERIV_OPS = (
    "hahn",
    "hahn-higher",
    "q",
    "h-forward",
    "h-backward",
    "h-sym",
    "ab-sym",
    "q-sym",
    "hahn-sym",
    "delta",
    "nabla",
    "diamond",
    "diamond-alpha",
)
INTEG_OPS = (
    "hahn",
    "jackson",
    "h",
    "alpha-forward",
    "beta-backward",
    "ab-sym",
    "q-sym",
    "hahn-sym",
    "delta",
    "nabla",
    "diamond",
    "diamond-alpha",
)


def _unknown(kind: str, op: str | None, choices: tuple[str, ...]) -> UsageError:
    return UsageError(f"unknown {kind} operator {op!r}; choose --op from {', '.join(choices)}")


def derivative_op(spec: JobSpec, cfg: AppConfig) -> DerivativeOp:
    eps = cfg.expr.match_eps
    match spec.op:
        case "hahn":
            p = jobs.qomega(spec)
            return lambda f, t: quantum.hahn_derivative(f, p, t, match_eps=eps)
        case "hahn-higher":
            p = jobs.qomega(spec)
            r, nested = spec.r, cfg.variational.nested_step
            return lambda f, t: quantum.hahn_derivative_higher(
                f, p, t, r, match_eps=eps, nested_step=nested
            )
        case "q":
            q = jobs.qomega(spec).q
            return lambda f, t: quantum.q_derivative(f, q, t, match_eps=eps)
        case "h-forward" | "h-backward" | "h-sym":
            h = spec.num("h")
            fn = {
                "h-forward": quantum.h_forward_derivative,
                "h-backward": quantum.h_backward_derivative,
                "h-sym": symcalc.h_sym_derivative,
            }[spec.op]
            return lambda f, t: fn(f, h, t)
        case "ab-sym":
            ab = jobs.alpha_beta(spec)
            return lambda f, t: symcalc.ab_sym_derivative(f, ab, t)
        case "q-sym":
            q = jobs.qomega(spec).q
            return lambda f, t: symcalc.q_sym_derivative(f, q, t, match_eps=eps)
        case "hahn-sym":
            p = jobs.qomega(spec)
            return lambda f, t: symcalc.hahn_sym_derivative(f, p, t, match_eps=eps)
        case "delta" | "nabla" | "diamond":
            T = jobs.scale(spec, cfg)
            ts_fn = {
                "delta": timescale.delta_derivative,
                "nabla": timescale.nabla_derivative,
                "diamond": timescale.sym_diamond_derivative,
            }[spec.op]
            return lambda f, t: ts_fn(T, f, t)
        case "diamond-alpha":
            T = jobs.scale(spec, cfg)
            alpha = spec.num("alpha")
            return lambda f, t: timescale.diamond_alpha_derivative(T, f, t, alpha)
    raise _unknown("derivative", spec.op, DERIV_OPS)


def integral_op(spec: JobSpec, cfg: AppConfig) -> IntegralOp:
    eps = cfg.expr.match_eps
    tol, depth = cfg.quadrature.tol, cfg.quadrature.max_depth
    match spec.op:
        case "hahn":
            p = jobs.qomega(spec)
            return lambda f, a, b, pol: quantum.hahn_integral(f, p, a, b, pol, match_eps=eps)
        case "jackson":
            q = jobs.qomega(spec).q
            return lambda f, a, b, pol: quantum.jackson_integral(f, q, a, b, pol)
        case "h":
            h = spec.num("h")
            return lambda f, a, b, _pol: exact(quantum.h_integral(f, h, a, b, match_eps=eps))
        case "alpha-forward":
            alpha = spec.num("alpha")
            return lambda f, a, b, pol: symcalc.alpha_forward_integral(
                f, alpha, a, b, pol, match_eps=eps
            )
        case "beta-backward":
            beta = spec.num("beta")
            return lambda f, a, b, pol: symcalc.beta_backward_integral(
                f, beta, a, b, pol, match_eps=eps
            )
        case "ab-sym":
            ab = jobs.alpha_beta(spec)
            return lambda f, a, b, pol: symcalc.ab_sym_integral(f, ab, a, b, pol, match_eps=eps)
        case "q-sym":
            q = jobs.qomega(spec).q
            return lambda f, a, b, pol: symcalc.q_sym_integral(f, q, a, b, pol)
        case "hahn-sym":
            p = jobs.qomega(spec)
            return lambda f, a, b, pol: symcalc.hahn_sym_integral(f, p, a, b, pol, match_eps=eps)
        case "delta" | "nabla" | "diamond":
            T = jobs.scale(spec, cfg)
            ts_fn = {
                "delta": timescale.delta_integral,
                "nabla": timescale.nabla_integral,
                "diamond": timescale.diamond_integral,
            }[spec.op]
            return lambda f, a, b, pol: ts_fn(T, f, a, b, pol, tol=tol, max_depth=depth)
        case "diamond-alpha":
            T = jobs.scale(spec, cfg)
            alpha = spec.num("alpha")
            return lambda f, a, b, pol: timescale.diamond_alpha_integral(
                T, f, a, b, alpha, pol, tol=tol, max_depth=depth
            )
    raise _unknown("integral", spec.op, INTEG_OPS)


def parse_grid(text: str) -> list[float]:
    """``lo:hi:n`` -> n 个等距点。"""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid {text!r} must look like 'lo:hi:n'")
    lo, hi = (float(parse_number(x)) for x in parts[:2])
    try:
        n = int(parts[2])
    except ValueError:
        raise UsageError(f"grid count {parts[2]!r} is not an integer") from None
    if n < 1:
        raise UsageError("grid needs at least one point")
    return [float(x) for x in np.linspace(lo, hi, n)]


def deriv(  # noqa: PLR0913
    ctx: typer.Context,
    op: str | None = typer.Option(None, "--op", help=f"算子：{', '.join(DERIV_OPS)}"),
    f: str | None = typer.Option(None, "--f", help="函数表达式，如 't^2'"),
    t: str | None = typer.Option(None, "--t", help="求值点"),
    q: str | None = typer.Option(None, "--q", help="q ∈ (0,1)"),
    omega: str | None = typer.Option(None, "--omega", help="ω ≥ 0"),
    h: str | None = typer.Option(None, "--h", help="步长 h > 0"),
    alpha: str | None = typer.Option(None, "--alpha", help="α（α,β-对称算子的步长或菱形-α 权重）"),
    beta: str | None = typer.Option(None, "--beta", help="β"),
    r: int | None = typer.Option(None, "--r", help="hahn-higher 的阶数（≤ 6）"),
    scale: str | None = typer.Option(None, "--scale", help="时标，如 'union(interval(0,1),points(2,4))'"),
    grid: str | None = typer.Option(None, "--grid", help="lo:hi:n，在网格上逐点求导（CSV 友好）"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """在一点（或 --grid 网格）上求差分导数"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        "op": op,
        "f": f,
        "t": t,
        "q": q,
        "omega": omega,
        "h": h,
        "alpha": alpha,
        "beta": beta,
        "r": r,
        "scale": scale,
        "grid": grid,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.DERIV, job, flags)
    fn = jobs.function(spec, "f", cfg)
    d = derivative_op(spec, cfg)

    if spec.grid is not None:
        rows = [{"t": x, "value": d(fn, x)} for x in parse_grid(spec.grid)]
        emit(ctx, spec, jobs.report(spec, rows=rows))
        return
    x = spec.num("t")
    emit(ctx, spec, jobs.report(spec, value=d(fn, x), est_error=None))


def integ(  # noqa: PLR0913
    ctx: typer.Context,
    op: str | None = typer.Option(None, "--op", help=f"积分：{', '.join(INTEG_OPS)}"),
    f: str | None = typer.Option(None, "--f", help="被积函数"),
    a: str | None = typer.Option(None, "--a", help="下限，可写 1/3"),
    b: str | None = typer.Option(None, "--b", help="上限"),
    q: str | None = typer.Option(None, "--q", help="q ∈ (0,1)"),
    omega: str | None = typer.Option(None, "--omega", help="ω ≥ 0"),
    h: str | None = typer.Option(None, "--h", help="步长 h > 0"),
    alpha: str | None = typer.Option(None, "--alpha", help="α"),
    beta: str | None = typer.Option(None, "--beta", help="β"),
    scale: str | None = typer.Option(None, "--scale", help="时标文本"),
    abs_tol: float | None = typer.Option(None, "--abs-tol", help="级数绝对容差"),
    rel_tol: float | None = typer.Option(None, "--rel-tol", help="级数相对容差"),
    max_terms: int | None = typer.Option(None, "--max-terms", help="级数最大项数"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """求 q,ω / 对称 / 时标积分"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        "op": op,
        "f": f,
        "a": a,
        "b": b,
        "q": q,
        "omega": omega,
        "h": h,
        "alpha": alpha,
        "beta": beta,
        "scale": scale,
        "abs_tol": abs_tol,
        "rel_tol": rel_tol,
        "max_terms": max_terms,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.INTEG, job, flags)
    spec.need("a", "b")
    fn = jobs.function(spec, "f", cfg)
    res = integral_op(spec, cfg)(fn, spec.num("a"), spec.num("b"), jobs.policy(spec, cfg))

    if isinstance(res, SeriesResult):
        warnings = [] if res.converged else [f"series did not stagnate within {res.terms_used} terms"]
        out = jobs.report(
            spec,
            value=res.value,
            est_error=res.est_error,
            converged=res.converged,
            details={"terms_used": res.terms_used},
            warnings=warnings,
        )
    else:
        out = jobs.report(spec, value=res, details={"quadrature_tol": cfg.quadrature.tol})
    emit(ctx, spec, out)

