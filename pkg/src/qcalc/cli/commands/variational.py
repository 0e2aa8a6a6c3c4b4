# cli/commands/variational.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

import typer

from qcalc.cli import jobs
from qcalc.cli.commands.common import JOB_HELP, OUTPUT_HELP, OVERRIDE_HELP, emit
from qcalc.cli.schemas import Command, JobSpec
from qcalc.engine import variational as var
from qcalc.engine.errors import UsageError

if TYPE_CHECKING:
    from qcalc.cli.schemas import OperationReport
    from qcalc.engine.config import AppConfig

logger = logging.getLogger(__name__)

# el-check 报告中 max_abs 超过此值时给出警告（退出码不变）
RESIDUAL_WARN = 1e-7
VAR_CHECKS = ("first-variation", "convexity", "extremizer")


def _problem_flags(  # noqa: PLR0913
    flavor: str | None,
    q: str | None,
    omega: str | None,
    r: int | None,
    lagrangian: str | None,
    a: str | None,
    b: str | None,
    boundary: list[str],
) -> dict[str, Any]:
    return {
        "flavor": flavor,
        "q": q,
        "omega": omega,
        "r": r,
        "lagrangian": lagrangian,
        "a": a,
        "b": b,
        "boundary": boundary,
    }


def _series_flags(abs_tol: float | None, rel_tol: float | None, max_terms: int | None) -> dict[str, Any]:
    return {"abs_tol": abs_tol, "rel_tol": rel_tol, "max_terms": max_terms}


def el_check(  # noqa: PLR0913
    ctx: typer.Context,
    flavor: str | None = typer.Option(None, "--flavor", help="hahn_higher | q_symmetric | hahn_symmetric"),
    q: str | None = typer.Option(None, "--q", help="q ∈ (0,1)"),
    omega: str | None = typer.Option(None, "--omega", help="ω ≥ 0（q_symmetric 必须为 0）"),
    r: int | None = typer.Option(None, "--r", help="阶数 r（对称类型为 1）"),
    lagrangian: str | None = typer.Option(None, "--L", help="拉格朗日量 L(t, u0, …, ur)"),
    a: str | None = typer.Option(None, "--a", help="区间左端"),
    b: str | None = typer.Option(None, "--b", help="区间右端"),
    boundary: list[str] = typer.Option([], "--boundary", help="边界条件 alpha_i:beta_i，按 i 顺序重复"),
    y: str | None = typer.Option(None, "--y", help="候选极值函数 y(t)"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    abs_tol: float | None = typer.Option(None, "--abs-tol", help="级数绝对容差"),
    rel_tol: float | None = typer.Option(None, "--rel-tol", help="级数相对容差"),
    max_terms: int | None = typer.Option(None, "--max-terms", help="级数最大项数"),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """在 σ 轨道上检查 Euler–Lagrange 残差"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        **_problem_flags(flavor, q, omega, r, lagrangian, a, b, boundary),
        **_series_flags(abs_tol, rel_tol, max_terms),
        "y": y,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.EL_CHECK, job, flags)
    prob = jobs.problem(spec, cfg)
    rep = var.el_residual(prob, jobs.function(spec, "y", cfg), jobs.policy(spec, cfg))

    warnings = []
    if rep.max_abs > RESIDUAL_WARN:
        warnings.append(f"max |residual| = {rep.max_abs!r} exceeds {RESIDUAL_WARN!r}")
    out = jobs.report(
        spec,
        value=rep.max_abs,
        rows=[{"t": t, "residual": res} for t, res in zip(rep.points, rep.residuals, strict=True)],
        details={
            "flavor": rep.flavor.value,
            "max_abs": rep.max_abs,
            "functional_value": rep.functional_value,
            "points": len(rep.points),
            "assumed": rep.assumed,
        },
        warnings=warnings,
    )
    emit(ctx, spec, out)


def _first_variation(spec: JobSpec, cfg: AppConfig) -> OperationReport:
    prob = jobs.problem(spec, cfg)
    y, eta = jobs.function(spec, "y", cfg), jobs.function(spec, "eta", cfg)
    pol = jobs.policy(spec, cfg)
    direct = var.first_variation(prob, y, eta, pol)
    integral = var.first_variation_integral(prob, y, eta, pol)
    return jobs.report(
        spec,
        value=direct,
        details={"integral_form": integral, "difference": direct - integral},
    )


def _convexity(spec: JobSpec, cfg: AppConfig) -> OperationReport:
    spec.need("a", "b")
    seed = jobs.seed_of(spec, cfg)
    rep = var.convexity_sample(
        jobs.function(spec, "L", cfg),
        (spec.num("a"), spec.num("b")),
        spec.u_range,
        spec.v_range,
        spec.samples,
        seed=seed,
    )
    return jobs.report(
        spec,
        seed=seed,
        rows=[v.model_dump() for v in rep.violations],
        details={
            "jointly_convex_evidence": rep.jointly_convex_evidence,
            "violations": len(rep.violations),
            "samples": rep.samples,
        },
    )


def _extremizer(spec: JobSpec, cfg: AppConfig) -> OperationReport:
    seed = jobs.seed_of(spec, cfg)
    rep = var.extremizer_sample(
        jobs.problem(spec, cfg),
        jobs.function(spec, "y", cfg),
        spec.samples,
        seed=seed,
        policy=jobs.policy(spec, cfg),
    )
    warnings = [f"skipped {rep.skipped} inadmissible variations"] if rep.skipped else []
    return jobs.report(
        spec,
        value=rep.base_value,
        seed=seed,
        details=rep.model_dump(mode="json", exclude={"seed"}),
        warnings=warnings,
    )


def var_check(  # noqa: PLR0913
    ctx: typer.Context,
    check: str | None = typer.Option(None, "--check", help=f"检查项：{', '.join(VAR_CHECKS)}"),
    flavor: str | None = typer.Option(None, "--flavor", help="hahn_higher | q_symmetric | hahn_symmetric"),
    q: str | None = typer.Option(None, "--q", help="q ∈ (0,1)"),
    omega: str | None = typer.Option(None, "--omega", help="ω ≥ 0"),
    r: int | None = typer.Option(None, "--r", help="阶数 r"),
    lagrangian: str | None = typer.Option(None, "--L", help="拉格朗日量"),
    a: str | None = typer.Option(None, "--a", help="区间左端"),
    b: str | None = typer.Option(None, "--b", help="区间右端"),
    boundary: list[str] = typer.Option([], "--boundary", help="边界条件 alpha_i:beta_i"),
    y: str | None = typer.Option(None, "--y", help="候选函数 y(t)"),
    eta: str | None = typer.Option(None, "--eta", help="可容许变分 η(t)"),
    samples: int | None = typer.Option(None, "--samples", help="抽样数"),
    seed: int | None = typer.Option(None, "--seed", help="随机种子；默认取配置 seed"),
    override: list[str] = typer.Option([], "--override", help=OVERRIDE_HELP),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """一阶变分 / 联合凸性抽样 / 极小性抽样"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        **_problem_flags(flavor, q, omega, r, lagrangian, a, b, boundary),
        "op": check,
        "y": y,
        "eta": eta,
        "samples": samples,
        "seed": seed,
        "override": override,
        "output": output,
    }
    spec = jobs.resolve(Command.VAR_CHECK, job, flags)
    match spec.op or "first-variation":
        case "first-variation":
            out = _first_variation(spec, cfg)
        case "convexity":
            out = _convexity(spec, cfg)
        case "extremizer":
            out = _extremizer(spec, cfg)
        case other:
            raise UsageError(f"unknown check {other!r}; choose --check from {', '.join(VAR_CHECKS)}")
    emit(ctx, spec, out)


def leitmann(  # noqa: PLR0913
    ctx: typer.Context,
    flavor: str | None = typer.Option(None, "--flavor", help="q_symmetric | hahn_symmetric"),
    q: str | None = typer.Option(None, "--q", help="q ∈ (0,1)"),
    omega: str | None = typer.Option(None, "--omega", help="ω ≥ 0"),
    lagrangian: str | None = typer.Option(None, "--L", help="原问题拉格朗日量 L"),
    lagrangian_bar: str | None = typer.Option(None, "--Lbar", help="变换后拉格朗日量 L̄"),
    z: str | None = typer.Option(None, "--z", help="y = z(t, ȳ)，ȳ 写作 u0"),
    zbar: str | None = typer.Option(None, "--zbar", help="ȳ = z̄(t, y)，y 写作 u0"),
    gauge: str | None = typer.Option(None, "--G", help="G(t, ȳ)，ȳ 写作 u0"),
    a: str | None = typer.Option(None, "--a", help="区间左端"),
    b: str | None = typer.Option(None, "--b", help="区间右端"),
    boundary: list[str] = typer.Option([], "--boundary", help="边界条件 alpha:beta"),
    samples: int | None = typer.Option(None, "--samples", help="随机 ȳ 的个数"),
    seed: int | None = typer.Option(None, "--seed", help="随机种子"),
    output: str | None = typer.Option(None, "--output", help=OUTPUT_HELP),
    job: Path | None = typer.Option(None, "--job", help=JOB_HELP),
) -> None:
    """Leitmann 直接法：检查 L 与 L̄ 相差一个 D̃[G]"""
    cfg: AppConfig = ctx.obj["cfg"]
    flags = {
        **_problem_flags(flavor, q, omega, None, lagrangian, a, b, boundary),
        "lagrangian_bar": lagrangian_bar,
        "z": z,
        "zbar": zbar,
        "gauge": gauge,
        "samples": samples,
        "seed": seed,
        "output": output,
    }
    spec = jobs.resolve(Command.LEITMANN, job, flags)
    seed_used = jobs.seed_of(spec, cfg)
    L = jobs.function(spec, "L", cfg)
    rep = var.leitmann_check(
        L,
        jobs.function(spec, "Lbar", cfg),
        jobs.function(spec, "z", cfg),
        jobs.function(spec, "zbar", cfg),
        jobs.function(spec, "G", cfg),
        jobs.problem(spec, cfg, L),
        spec.samples,
        seed=seed_used,
        policy=jobs.policy(spec, cfg),
    )
    warnings = []
    if not rep.identity_holds:
        warnings.append(f"pointwise defect {rep.max_pointwise_defect!r} exceeds 1e-8")
    if not rep.constant_holds:
        warnings.append("functional differences do not match G(b, ȳ(b)) - G(a, ȳ(a))")
    out = jobs.report(
        spec,
        value=rep.max_pointwise_defect,
        seed=seed_used,
        rows=[{"sample": i, "difference": d} for i, d in enumerate(rep.functional_differences)],
        details=rep.model_dump(mode="json", exclude={"functional_differences", "seed"}),
        warnings=warnings,
    )
    emit(ctx, spec, out)
