from __future__ import annotations

from typing import TYPE_CHECKING

import typer

from qcalc.cli.printers import emit_report
from qcalc.engine.errors import EXIT_NON_CONVERGENT

if TYPE_CHECKING:
    from qcalc.cli.schemas import JobSpec, OperationReport
    from qcalc.engine.config import AppConfig

OUTPUT_HELP = "输出格式 json|csv|table；默认取配置 [output] format"
JOB_HELP = "JSON 作业文件；命令行参数覆盖文件中的同名字段"
OVERRIDE_HELP = "点值覆盖，如 t=0.5:1 或 t=1/6:6，可重复"


def emit(ctx: typer.Context, spec: JobSpec, report: OperationReport) -> None:
    """按格式输出报告；未收敛时仍输出部分结果，再以退出码 3 结束。"""
    cfg: AppConfig = ctx.obj["cfg"]
    emit_report(report, spec.output or cfg.output.format, cfg.logging.dict_style)
    if not report.converged:
        raise typer.Exit(code=EXIT_NON_CONVERGENT)

