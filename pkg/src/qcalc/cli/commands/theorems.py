# cli/commands/theorems.py
"""ineq / mvt：积分不等式与中值定理见证点。"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import typer

from qcalc.cli import jobs
from qcalc.cli.commands.common import JOB_HELP, OUTPUT_HELP, OVERRIDE_HELP, emit
from qcalc.cli.schemas import Command
from qcalc.engine.errors import UsageError
from qcalc.engine.symcalc import InequalityKind, WitnessKind, inequality_check, integral_mvt_check, mvt_witness
from qcalc.engine.timescale import diamond_inequality_check

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig

INEQ_KINDS = ("holder", "cauchy_schwarz", "minkowski", "mvt")
CALCULI = ("ab-sym", "diamond")


def _kind(raw: str | None, choices: tuple[str, ...], flag: str) -> str:
    if raw is None or raw not in choices:
        raise UsageError(f"{flag} must be one of {', '.join(choices)}, got {raw!r}")
    return raw


def ineq(  # noqa: PLR0913
    ctx: typer.Context,
    calculus: str | None = typer.Option(None, "--calculus", help="ab-sym（α,β-对称积分）或 diamond（时标菱形积分）"),
    kind: str | None = typer.Option(None, "--kind", help=f"不等式：{', '.join(INEQ_KINDS)}"),
    f: str | None = typer.Option(None, "--f", help="f(t)"),
    g: str | None = typer.Option(None, "--g", help="g(t)"),
    a: str | None = typer.Option(None, "--a", help="区间左端"),
    b: str | None = typer.Option(None, "--b", help="区间右端"),
    alpha: str | None = typer.Option(None, "--alpha", help="α（ab-sym）"),
    beta: str | None = typer.Option(None, "--beta", help="β（ab-sym）"),
    scale: str | None = typer.Option(None, "--scale", help="时标文本（diamond）"),
    exponent: str | None = typer.Option(None, "--exponent", help="Hölder / Minkowski 指数 p > 1"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """Hölder / Cauchy–Schwarz / Minkowski / 积分中值定理检查"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        "op": calculus,
        "kind": kind,
        "f": f,
        "g": g,
        "a": a,
        "b": b,
        "alpha": alpha,
        "beta": beta,
        "scale": scale,
        "exponent": exponent,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.INEQ, job, flags)
    which = _kind(spec.op or "ab-sym", CALCULI, "--calculus")
    k = _kind(spec.kind, INEQ_KINDS, "--kind")
    fn, gn = jobs.function(spec, "f", cfg), jobs.function(spec, "g", cfg)
    lo, hi = spec.num("a"), spec.num("b")
    pol = jobs.policy(spec, cfg)

    tails = True
    if which == "diamond":
        drep = diamond_inequality_check(k, fn, gn, jobs.scale(spec, cfg), lo, hi, spec.exponent, pol)
        holds, details = drep.holds, drep.model_dump(mode="json")
    elif k == "mvt":
        mrep = integral_mvt_check(fn, gn, jobs.alpha_beta(spec), lo, hi, pol)
        holds, details, tails = mrep.within, mrep.model_dump(mode="json"), mrep.tails_converged
    else:
        irep = inequality_check(InequalityKind(k), fn, gn, jobs.alpha_beta(spec), lo, hi, spec.exponent, pol)
        holds, details, tails = irep.holds, irep.model_dump(mode="json"), irep.tails_converged

    warnings = [] if holds else [f"{k} does not hold for the given data"]
    if not tails:
        warnings.append("integral tails do not converge; finite lattice sums were compared")
    emit(ctx, spec, jobs.report(spec, details=details, warnings=warnings))


def mvt(  # noqa: PLR0913
    ctx: typer.Context,
    kind: str | None = typer.Option(None, "--kind", help="fermat | rolle | lagrange | cauchy"),
    f: str | None = typer.Option(None, "--f", help="f(t)"),
    g: str | None = typer.Option(None, "--g", help="g(t)（cauchy）"),
    a: str | None = typer.Option(None, "--a", help="区间左端"),
    b: str | None = typer.Option(None, "--b", help="区间右端"),
    t0: str | None = typer.Option(None, "--t0", help="极值点（fermat）"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """构造 α,β-对称中值定理的见证点 (α, β, c)"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        "kind": kind,
        "f": f,
        "g": g,
        "a": a,
        "b": b,
        "t0": t0,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.MVT, job, flags)
    wk = WitnessKind(_kind(spec.kind, tuple(k.value for k in WitnessKind), "--kind"))
    gn = jobs.function(spec, "g", cfg) if wk is WitnessKind.CAUCHY else None
    rec = mvt_witness(
        wk,
        jobs.function(spec, "f", cfg),
        gn,
        spec.num("a"),
        spec.num("b"),
        spec.t0,
        grid=cfg.witness.grid,
        bisect_tol=cfg.witness.bisect_tol,
    )
    emit(ctx, spec, jobs.report(spec, value=rec.residual, details=rec.model_dump(mode="json")))

