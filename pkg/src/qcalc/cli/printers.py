# cli/printers.py
from __future__ import annotations

import csv
import io
from typing import TYPE_CHECKING, Any

import typer
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.pretty import Pretty
from rich.table import Table
from rich.text import Text

if TYPE_CHECKING:
    from qcalc.cli.schemas import OperationReport, OutputFormat

# 报告走 stdout，提示面板与日志走 stderr
_console = Console()
_err_console = Console(stderr=True)


def err_console() -> Console:
    return _err_console


# 圆角面板
def _panel(
    msg: str | Text,
    *,
    title: str | None = None,
    style: str = "none",
    border: str = "cyan",
) -> Panel:
    return Panel(
        msg if isinstance(msg, Text) else Text(str(msg)),
        title=title,
        title_align="left",
        box=box.ROUNDED,
        border_style=border,
        expand=True,
        style=style,
        padding=(0, 1),
    )


def print_success(msg: str, title: str = "OK") -> None:
    _err_console.print(_panel(msg, title=title, border="green"))


def print_warning(msg: str, title: str = "WARN") -> None:
    _err_console.print(_panel(msg, title=title, border="yellow"))


def print_error(msg: str, title: str = "ERROR") -> None:
    _err_console.print(_panel(msg, title=title, border="red"))


def _kv_table(title: str, as_what: str, *, group: bool = False) -> Table:
    # table: 紧凑的 str 单元格；dict: Pretty 展开，带行分隔
    compact = as_what == "table"
    tbl = Table(
        title=title,
        safe_box=compact,
        show_lines=not compact,
        expand=False,
        box=box.HEAVY_HEAD if compact else box.SIMPLE_HEAVY,
    )
    if group:
        tbl.add_column("Section", style="bold yellow", no_wrap=True)
    tbl.add_column("Key", style="cyan", no_wrap=True)
    tbl.add_column("Value", style="magenta", overflow="fold")
    return tbl


def _cell(v: object, as_what: str) -> str | Pretty:
    return str(v) if as_what == "table" else Pretty(v, expand_all=True)


def print_kv(title: str, mapping: dict[str, object], as_what: str) -> None:
    """as_what: "table" -> 值以 str 渲染；其他 -> Pretty(v, expand_all=True)"""
    tbl = _kv_table(title, as_what)
    for k, v in mapping.items():
        tbl.add_row(str(k), _cell(v, as_what))
    _console.print(tbl)


def print_rows(title: str, rows: list[dict[str, Any]]) -> None:
    if not rows:
        return
    table = Table(title=title, safe_box=True, expand=False)
    for col in rows[0]:
        table.add_column(str(col), style="cyan" if col == "t" else "magenta")
    for row in rows:
        table.add_row(*(str(v) for v in row.values()))
    _console.print(table)


def _scalar_fields(report: OperationReport) -> dict[str, Any]:
    out: dict[str, Any] = {
        "value": report.value,
        "est_error": report.est_error,
        "converged": report.converged,
    }
    if report.seed is not None:
        out["seed"] = report.seed
    for k, v in report.details.items():
        if isinstance(v, str | int | float | bool) or v is None:
            out[k] = v
    return out


def to_csv(report: OperationReport) -> str:
    """有逐点结果时每点一行，否则输出单行标量字段。"""
    buf = io.StringIO()
    rows = report.rows or [_scalar_fields(report)]
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def emit_report(report: OperationReport, as_what: OutputFormat, dict_style: str = "table") -> None:
    match as_what:
        case "json":
            typer.echo(report.model_dump_json(indent=2))
        case "csv":
            typer.echo(to_csv(report), nl=False)
        case "table":
            print_kv(report.command, _scalar_fields(report), dict_style)
            print_rows(f"{report.command} rows", report.rows)
            for w in report.warnings:
                print_warning(w)


def print_kv_grouped(title: str, groups: dict[str, dict[str, object]], as_what: str = "table") -> None:
    """按配置节分组打印；``as_what`` 含义同 :func:`print_kv`。"""
    tbl = _kv_table(title, as_what, group=True)
    last = next(reversed(groups), None)
    for name, section in groups.items():
        tbl.add_row(f"[bold]{name}[/bold]", "", "")
        for k, v in section.items():
            tbl.add_row("", str(k), _cell(v, as_what))
        if name != last:
            tbl.add_section()
    _console.print(tbl)
