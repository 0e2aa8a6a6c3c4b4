from __future__ import annotations

import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import click
import typer
from pydantic import ValidationError
from rich.logging import RichHandler

from qcalc.cli.commands import calculus, scale, theorems, variational
from qcalc.cli.commands.config import config_app
from qcalc.cli.printers import err_console, print_error
from qcalc.engine.errors import EXIT_USAGE, QCalcError
from qcalc.engine.utils_logging import format_argv

logger = logging.getLogger(__name__)

app = typer.Typer(
    add_completion=False,
    help="量子微积分 / 时标微积分数值引擎",
)


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console(), rich_tracebacks=False, show_path=False)],
        force=True,
    )


@app.callback()
def main(
    ctx: typer.Context,
    config: str | None = typer.Option(
        None,
        "--config",
        "-c",
        help="TOML 配置文件路径; default: env QCALC_CONFIG_PATH or ~/.config/qcalc/config.toml",
    ),
    debug: bool = typer.Option(
        False,
        "--debug",
        help="Debug mode",
    ),
) -> None:
    from qcalc.engine.config import load_config  # noqa: PLC0415

    ctx.ensure_object(dict)
    ctx.obj["debug"] = debug

    app.pretty_exceptions_show_locals = debug

    cfg = load_config(Path(config) if config else None)
    _setup_logging("DEBUG" if debug else cfg.logging.level)
    logger.debug("qcalc %s", format_argv(ctx.obj.get("argv", sys.argv[1:])))

    ctx.obj["cfg"] = cfg


app.command("deriv")(calculus.deriv)
app.command("integ")(calculus.integ)
app.command("el-check")(variational.el_check)
app.command("var-check")(variational.var_check)
app.command("leitmann")(variational.leitmann)
app.command("ineq")(theorems.ineq)
app.command("mvt")(theorems.mvt)
app.command("ts-query")(scale.ts_query)
app.add_typer(config_app, name="config")


def run(args: Sequence[str] | None = None) -> int:
    """
    程序化入口：返回退出码而不是调用 sys.exit。

    0 成功，1 用法错误，2 领域错误，3 级数不收敛。
    """
    argv = list(args) if args is not None else sys.argv[1:]
    try:
        rv = app(args=argv, standalone_mode=False, obj={"argv": argv})
    except click.UsageError as e:
        where = e.ctx.command_path if e.ctx is not None else "qcalc"
        print_error(f"{e.format_message()}\nhint: run `{where} --help`", title="USAGE")
        return EXIT_USAGE
    except click.ClickException as e:
        print_error(e.format_message())
        return e.exit_code
    except click.Abort:
        return EXIT_USAGE
    except QCalcError as e:
        print_error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (FileNotFoundError, FileExistsError) as e:
        print_error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except ValidationError as e:
        print_error(str(e), title="CONFIG")
        return EXIT_USAGE
    return rv if isinstance(rv, int) else 0


def entry() -> None:
    sys.exit(run())
