# cli/jobs.py
"""命令行参数 + JSON 作业文件 -> JobSpec，以及由 JobSpec 构造引擎对象。"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import ValidationError

from qcalc.cli.schemas import PRIMARY_FUNCTION, Command, JobSpec, OperationReport
from qcalc.engine.errors import UsageError
from qcalc.engine.expr import ExprFunc, parse, parse_override
from qcalc.engine.numerics import SeriesPolicy
from qcalc.engine.quantum import QOmegaParams
from qcalc.engine.symcalc import AlphaBetaParams
from qcalc.engine.timescale import TimeScale, parse_scale
from qcalc.engine.utils_logging import snippet
from qcalc.engine.variational import VariationalProblem

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig

logger = logging.getLogger(__name__)


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(x) for x in err["loc"]) or "job"
    return f"{loc}: {err['msg']}"


def load_job(path: Path) -> dict[str, Any]:
    p = path.expanduser()
    if not p.exists():
        raise UsageError(f"job file {p} does not exist")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"job file {p} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise UsageError(f"job file {p} must hold a JSON object")
    return data


def resolve(command: Command, job: Path | None, flags: dict[str, Any]) -> JobSpec:
    """合并作业文件与命令行参数；命令行中显式给出的值优先。"""
    data = load_job(job) if job is not None else {}
    declared = data.pop("command", command.value)
    if declared != command.value:
        raise UsageError(f"job file is for {declared!r}, not {command.value!r}")

    given = {k: v for k, v in flags.items() if v is not None and v != [] and v != ()}
    cli_overrides = given.pop("override", [])
    merged: dict[str, Any] = {**data, **given}
    if cli_overrides:
        primary = PRIMARY_FUNCTION[command]
        table = dict(merged.get("overrides", {}))
        table[primary] = [*table.get(primary, []), *cli_overrides]
        merged["overrides"] = table

    try:
        spec = JobSpec.model_validate({**merged, "command": command})
    except ValidationError as e:
        raise UsageError(f"invalid job: {_first_error(e)}") from None
    logger.debug("resolve: %s job=%s keys=%s", command.value, job, sorted(merged))
    return spec


def function(spec: JobSpec, name: str, cfg: AppConfig) -> ExprFunc:
    """按名字（``f``、``y``、``L`` …）解析函数文本并附加覆盖点。"""
    sources = spec.sources()
    if name not in sources:
        raise UsageError(f"{spec.command.value} needs --{name} (pass the flag or set it in the --job file)")
    overrides = [parse_override(o) for o in spec.overrides.get(name, [])]
    logger.debug("function: %s = %s (%s overrides)", name, snippet(sources[name]), len(overrides))
    return parse(sources[name], overrides, cfg.expr.match_eps)


def policy(spec: JobSpec, cfg: AppConfig) -> SeriesPolicy:
    base = SeriesPolicy.from_config(cfg)
    updates = {
        k: v
        for k, v in (("abs_tol", spec.abs_tol), ("rel_tol", spec.rel_tol), ("max_terms", spec.max_terms))
        if v is not None
    }
    if not updates:
        return base
    try:
        return SeriesPolicy(**{**base.model_dump(), **updates})
    except ValidationError as e:
        raise UsageError(f"invalid series policy: {_first_error(e)}") from None


def qomega(spec: JobSpec) -> QOmegaParams:
    spec.need("q")
    try:
        return QOmegaParams(q=spec.q, omega=spec.omega or 0.0)
    except ValidationError as e:
        raise UsageError(f"invalid (q, omega): {_first_error(e)}") from None


def alpha_beta(spec: JobSpec) -> AlphaBetaParams:
    spec.need("alpha", "beta")
    try:
        return AlphaBetaParams(alpha=spec.alpha, beta=spec.beta)
    except ValidationError as e:
        raise UsageError(f"invalid (alpha, beta): {_first_error(e)}") from None


def scale(spec: JobSpec, cfg: AppConfig) -> TimeScale:
    spec.need("scale")
    assert spec.scale is not None
    T = parse_scale(spec.scale)
    if T.match_eps != cfg.expr.match_eps:
        T = TimeScale.of(*T.pieces, match_eps=cfg.expr.match_eps)
    return T


def problem(spec: JobSpec, cfg: AppConfig, lagrangian: ExprFunc | None = None) -> VariationalProblem:
    spec.need("flavor", "q", "a", "b")
    L = lagrangian if lagrangian is not None else function(spec, "L", cfg)
    try:
        return VariationalProblem(
            flavor=spec.flavor,
            q=spec.q,
            omega=spec.omega or 0.0,
            order=spec.r,
            lagrangian=L,
            a=spec.a,
            b=spec.b,
            boundary=tuple(spec.boundary),
            lattice_depth=cfg.variational.lattice_depth,
            match_eps=cfg.expr.match_eps,
            nested_step=cfg.variational.nested_step,
        )
    except ValidationError as e:
        raise UsageError(f"invalid variational problem: {_first_error(e)}") from None


def seed_of(spec: JobSpec, cfg: AppConfig) -> int:
    return spec.seed if spec.seed is not None else cfg.seed


def report(spec: JobSpec, **fields: Any) -> OperationReport:
    inputs = spec.model_dump(mode="json", by_alias=True, exclude_none=True, exclude={"command"})
    return OperationReport(command=spec.command.value, inputs=inputs, **fields)
