# engine/utils_logging.py
from __future__ import annotations

import os
import shlex
from collections.abc import Mapping, Sequence

MAX_KEEP = 120  # 表达式源码片段长度

QCALC_ENV_PREFIX = "QCALC_"


def snippet(s: str | None, keep: int = MAX_KEEP) -> str:
    """截断过长的表达式源码，保留首尾（仅用于日志）。"""
    if s is None:
        return ""
    if len(s) <= keep:
        return s
    head = s[: keep // 2]
    tail = s[-keep // 2 :]
    return head + " …[TRUNCATED]… " + tail


def format_argv(argv: Sequence[str]) -> str:
    """把 argv 美观地拼为一行 shell 命令（仅用于日志）。"""
    try:
        return shlex.join(argv)
    except Exception:  # noqa: BLE001
        return " ".join(repr(x) for x in argv)


def qcalc_env(env: Mapping[str, str] | None = None) -> dict[str, str]:
    """返回影响本进程的 QCALC_* 环境变量摘要。"""
    src = os.environ if env is None else env
    return {k: src[k] for k in sorted(src) if k.startswith(QCALC_ENV_PREFIX)}

