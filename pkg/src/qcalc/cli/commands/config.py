from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import typer

from qcalc.cli.printers import print_kv_grouped, print_success
from qcalc.engine.config import DEFAULT_CONFIG_PATH, dump_config, write_default_config
from qcalc.engine.utils_logging import qcalc_env

if TYPE_CHECKING:
    from qcalc.engine.config import AppConfig

config_app = typer.Typer(help="查看 / 生成配置文件")


@config_app.command("show")
def show(
    ctx: typer.Context,
    raw: bool = typer.Option(False, "--toml", help="以 TOML 文本输出（可直接保存为配置文件）"),
) -> None:
    """打印生效的配置（文件 + 环境变量覆盖）"""
    cfg: AppConfig = ctx.obj["cfg"]
    if raw:
        typer.echo(dump_config(cfg), nl=False)
        return
    data = cfg.model_dump(by_alias=True)
    groups: dict[str, dict[str, Any]] = {"(top)": {"seed": data.pop("seed")}}
    groups.update({name: dict(section) for name, section in data.items()})
    env = qcalc_env()
    if env:
        groups["env"] = dict(env)
    print_kv_grouped("QCalc 配置", groups, cfg.logging.dict_style)


@config_app.command("init")
def init(
    path: Path = typer.Option(DEFAULT_CONFIG_PATH, "--path", help="写入位置"),
    force: bool = typer.Option(False, "--force", help="覆盖已存在的文件"),
) -> None:
    """写出带默认值的配置文件"""
    p = write_default_config(path, overwrite=force)
    print_success(f"已写入 {p}")
