from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import typer

from qcalc.cli import jobs
from qcalc.cli.commands.common import JOB_HELP, OUTPUT_HELP, emit
from qcalc.cli.schemas import Command
from qcalc.engine.timescale import TimeScale, gamma_weights, in_kappa, in_kappa_lower

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig


def describe_point(T: TimeScale, t: float) -> dict[str, Any]:
    info = T.jump(t)
    gw = gamma_weights(T, t)
    return {
        "t": info.t,
        "sigma": info.sigma,
        "rho": info.rho,
        "mu": info.mu,
        "nu": info.nu,
        "classification": info.classification.value,
        "gamma1": gw.gamma1,
        "gamma2": gw.gamma2,
        "gamma_extended": gw.extended,
        "in_kappa": in_kappa(T, t),
        "in_kappa_lower": in_kappa_lower(T, t),
    }


def ts_query(
    ctx: typer.Context,
    scale: str | None = typer.Option(None, "--scale", help="时标文本，如 'hz(h=0.5, lo=0, hi=3)'"),
    t: list[str] = typer.Option([], "--t", help="查询点，可重复"),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """查询时标点的 σ、ρ、μ、ν、分类与 γ 权重"""
    cfg: AppConfig = ctx.obj["cfg"]
    spec = jobs.resolve(Command.TS_QUERY, job, {"scale": scale, "points": t, "output": output})
    T = jobs.scale(spec, cfg)
    rows = [describe_point(T, x) for x in spec.points]
    details = {"scale": T.describe(), "min": T.min, "max": T.max}
    emit(ctx, spec, jobs.report(spec, rows=rows, details=details))
