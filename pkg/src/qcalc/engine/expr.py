# engine/expr.py
"""
函数定义小语言：解析、求值、点值覆盖与对偶数方向导数。

语法::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?
    base   := number | ident | ident '(' args ')' | '(' expr ')' | '-' factor

变量为 ``t, u0 … u9``，按位置调用：``f(t, u0, u1, …)``。
"""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

from qcalc.engine.errors import EvalError, OverrideNotDifferentiableError, ParseError, UsageError

logger = logging.getLogger(__name__)

VARIABLES: tuple[str, ...] = ("t",) + tuple(f"u{i}" for i in range(10))
SLOT: dict[str, int] = {name: i for i, name in enumerate(VARIABLES)}
CONSTANTS: dict[str, float] = {"pi": math.pi, "e": math.e}
UNARY_FUNCS = frozenset({"abs", "sqrt", "exp", "ln", "sin", "cos"})
NARY_FUNCS = frozenset({"min", "max"})
DEFAULT_MATCH_EPS = 1e-12

_BASE_START = frozenset({"number", "identifier", "'('", "'-'"})


# ---------------------------------------------------------------- AST


@dataclass(frozen=True, slots=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Neg:
    operand: Node
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str
    left: Node
    right: Node
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple[Node, ...]
    pos: int = field(default=0, compare=False)


type Node = Num | Var | Neg | BinOp | Call


# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))",
)


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # number / ident / op / end
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(src)
    while i < n:
        if src[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(src, i)
        if m is None or m.end() == i:
            raise ParseError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup or "op"
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        i = m.end()
    tokens.append(_Token("end", "", len(src.rstrip()) if src.strip() else len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str) -> None:
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _is_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def _fail(self, expected: frozenset[str]) -> ParseError:
        t = self.tok
        what = "end of input" if t.kind == "end" else f"token {t.text!r}"
        return ParseError(f"unexpected {what}", t.pos, expected)

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self._fail(frozenset({"operator", "end of input"}))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._is_op("+", "-"):
            op = self._advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._is_op("*", "/"):
            op = self._advance()
            node = BinOp(op.text, node, self.factor(), op.pos)
        return node

    def factor(self) -> Node:
        node = self.base()
        if self._is_op("^"):
            op = self._advance()
            # 右结合
            node = BinOp("^", node, self.factor(), op.pos)
        return node

    def base(self) -> Node:
        t = self.tok
        if t.kind == "number":
            self._advance()
            return Num(float(t.text), t.pos)
        if t.kind == "ident":
            self._advance()
            if self._is_op("("):
                return self._call(t)
            if t.text in SLOT:
                return Var(t.text, t.pos)
            if t.text in CONSTANTS:
                return Num(CONSTANTS[t.text], t.pos)
            raise ParseError(f"unknown identifier {t.text!r}", t.pos, frozenset(VARIABLES))
        if self._is_op("("):
            self._advance()
            node = self.expr()
            if not self._is_op(")"):
                raise self._fail(frozenset({"')'"}))
            self._advance()
            return node
        if self._is_op("-"):
            self._advance()
            return Neg(self.factor(), t.pos)
        raise self._fail(_BASE_START)

    def _call(self, name: _Token) -> Node:
        if name.text not in UNARY_FUNCS | NARY_FUNCS:
            raise ParseError(
                f"unknown function {name.text!r}",
                name.pos,
                frozenset(UNARY_FUNCS | NARY_FUNCS),
            )
        self._advance()  # '('
        args = [self.expr()]
        while self._is_op(","):
            self._advance()
            args.append(self.expr())
        if not self._is_op(")"):
            raise self._fail(frozenset({"','", "')'"}))
        self._advance()
        if name.text in UNARY_FUNCS and len(args) != 1:
            raise ParseError(f"{name.text}() takes exactly one argument", name.pos)
        if name.text in NARY_FUNCS and len(args) < 2:
            raise ParseError(f"{name.text}() takes at least two arguments", name.pos)
        return Call(name.text, tuple(args), name.pos)


# ---------------------------------------------------------------- scalar semantics


def _power(base: float, exponent: float, pos: int) -> float:
    if exponent.is_integer():
        if base == 0.0 and exponent < 0:
            raise EvalError("zero raised to a negative power", pos)
        try:
            return base ** int(exponent)
        except OverflowError:
            raise EvalError("overflow in power", pos) from None
    if base <= 0.0:
        raise EvalError("real exponent requires a positive base", pos)
    try:
        return math.pow(base, exponent)
    except OverflowError:
        raise EvalError("overflow in power", pos) from None


def _apply(name: str, args: Sequence[float], pos: int) -> float:
    x = args[0]
    match name:
        case "abs":
            return abs(x)
        case "sqrt":
            if x < 0:
                raise EvalError("sqrt of a negative number", pos)
            return math.sqrt(x)
        case "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise EvalError("overflow in exp", pos) from None
        case "ln":
            if x <= 0:
                raise EvalError("ln of a non-positive number", pos)
            return math.log(x)
        case "sin":
            return math.sin(x)
        case "cos":
            return math.cos(x)
        case "min":
            return min(args)
        case "max":
            return max(args)
    raise EvalError(f"unknown function {name!r}", pos)


type _Compiled = Callable[[Sequence[float]], float]


def _compile(node: Node) -> _Compiled:
    """把语法树编译成嵌套闭包，env 为按槽位排列的实数序列。"""
    match node:
        case Num(value=v):
            return lambda env: v
        case Var(name=name):
            idx = SLOT[name]
            return lambda env: env[idx]
        case Neg(operand=inner):
            f = _compile(inner)
            return lambda env: -f(env)
        case BinOp(op=op, left=left, right=right, pos=pos):
            lf = _compile(left)
            rf = _compile(right)
            if op == "+":
                return lambda env: lf(env) + rf(env)
            if op == "-":
                return lambda env: lf(env) - rf(env)
            if op == "*":
                return lambda env: lf(env) * rf(env)
            if op == "/":

                def div(env: Sequence[float]) -> float:
                    d = rf(env)
                    if d == 0.0:
                        raise EvalError("division by zero", pos)
                    return lf(env) / d

                return div
            return lambda env: _power(lf(env), rf(env), pos)
        case Call(name=name, args=args, pos=pos):
            fs = tuple(_compile(a) for a in args)
            if len(fs) == 1:
                f0 = fs[0]
                return lambda env: _apply(name, (f0(env),), pos)
            return lambda env: _apply(name, [g(env) for g in fs], pos)
    raise TypeError(f"not an expression node: {node!r}")


def _free_variables(node: Node) -> frozenset[str]:
    match node:
        case Var(name=name):
            return frozenset({name})
        case Neg(operand=inner):
            return _free_variables(inner)
        case BinOp(left=left, right=right):
            return _free_variables(left) | _free_variables(right)
        case Call(args=args):
            out: frozenset[str] = frozenset()
            for a in args:
                out |= _free_variables(a)
            return out
    return frozenset()


def to_source(node: Node) -> str:
    """全括号打印；parse(to_source(parse(s))) 与 parse(s) 结构相同。"""
    match node:
        case Num(value=v):
            return repr(v)
        case Var(name=name):
            return name
        case Neg(operand=inner):
            return f"(-{to_source(inner)})"
        case BinOp(op=op, left=left, right=right):
            return f"({to_source(left)} {op} {to_source(right)})"
        case Call(name=name, args=args):
            return f"{name}({', '.join(to_source(a) for a in args)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- dual numbers


@dataclass(frozen=True, slots=True)
class DualValue:
    """前向自动微分的对偶数 primal + tangent·ε（ε² = 0）。"""

    primal: float
    tangent: float = 0.0

    def __add__(self, other: DualValue) -> DualValue:
        return DualValue(self.primal + other.primal, self.tangent + other.tangent)

    def __sub__(self, other: DualValue) -> DualValue:
        return DualValue(self.primal - other.primal, self.tangent - other.tangent)

    def __mul__(self, other: DualValue) -> DualValue:
        return DualValue(
            self.primal * other.primal,
            self.primal * other.tangent + self.tangent * other.primal,
        )

    def __truediv__(self, other: DualValue) -> DualValue:
        q = self.primal / other.primal
        return DualValue(q, (self.tangent - q * other.tangent) / other.primal)

    def __neg__(self) -> DualValue:
        return DualValue(-self.primal, -self.tangent)


def _dual_power(x: DualValue, y: DualValue, pos: int) -> DualValue:
    value = _power(x.primal, y.primal, pos)
    tangent = 0.0
    if x.tangent != 0.0:
        if y.primal.is_integer():
            n = int(y.primal)
            tangent += n * _power(x.primal, float(n - 1), pos) * x.tangent if n != 0 else 0.0
        else:
            tangent += y.primal * value / x.primal * x.tangent
    if y.tangent != 0.0:
        if x.primal <= 0.0:
            raise EvalError("variable exponent requires a positive base", pos)
        tangent += value * math.log(x.primal) * y.tangent
    return DualValue(value, tangent)


def _dual_apply(name: str, args: Sequence[DualValue], pos: int) -> DualValue:
    x = args[0]
    match name:
        case "abs":
            if x.primal == 0.0 and x.tangent != 0.0:
                raise EvalError("abs is not differentiable at 0", pos)
            return DualValue(abs(x.primal), math.copysign(1.0, x.primal) * x.tangent)
        case "sqrt":
            r = _apply("sqrt", (x.primal,), pos)
            if r == 0.0 and x.tangent != 0.0:
                raise EvalError("sqrt is not differentiable at 0", pos)
            return DualValue(r, x.tangent / (2.0 * r) if x.tangent else 0.0)
        case "exp":
            v = _apply("exp", (x.primal,), pos)
            return DualValue(v, v * x.tangent)
        case "ln":
            return DualValue(_apply("ln", (x.primal,), pos), x.tangent / x.primal)
        case "sin":
            return DualValue(math.sin(x.primal), math.cos(x.primal) * x.tangent)
        case "cos":
            return DualValue(math.cos(x.primal), -math.sin(x.primal) * x.tangent)
        case "min":
            return min(args, key=lambda d: d.primal)
        case "max":
            return max(args, key=lambda d: d.primal)
    raise EvalError(f"unknown function {name!r}", pos)


def _dual_eval(node: Node, env: Mapping[str, DualValue]) -> DualValue:
    match node:
        case Num(value=v):
            return DualValue(v)
        case Var(name=name, pos=pos):
            if name not in env:
                raise EvalError(f"unbound variable {name!r}", pos)
            return env[name]
        case Neg(operand=inner):
            return -_dual_eval(inner, env)
        case BinOp(op=op, left=left, right=right, pos=pos):
            lv = _dual_eval(left, env)
            rv = _dual_eval(right, env)
            if op == "+":
                return lv + rv
            if op == "-":
                return lv - rv
            if op == "*":
                return lv * rv
            if op == "/":
                if rv.primal == 0.0:
                    raise EvalError("division by zero", pos)
                return lv / rv
            return _dual_power(lv, rv, pos)
        case Call(name=name, args=args, pos=pos):
            return _dual_apply(name, [_dual_eval(a, env) for a in args], pos)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- ExprFunc

Override = tuple[tuple[float, ...], float]


def _close(x: float, y: float, eps: float) -> bool:
    return abs(x - y) <= eps * max(1.0, abs(y))


class ExprFunc:
    """
    已解析的实函数 + 有限个点值覆盖。

    覆盖点坐标按槽位顺序 (t, u0, …) 给出；求值时若所有坐标都在
    ``match_eps·max(1,|坐标|)`` 内匹配则返回覆盖值，否则按语法树计算。
    """

    __slots__ = ("_fn", "arity", "ast", "match_eps", "overrides", "source", "variables")

    def __init__(
        self,
        ast: Node,
        source: str | None = None,
        overrides: Sequence[Override] = (),
        match_eps: float = DEFAULT_MATCH_EPS,
    ) -> None:
        if match_eps <= 0:
            raise UsageError("match_eps must be positive")
        self.ast = ast
        self.source = source if source is not None else to_source(ast)
        self.match_eps = match_eps
        self.variables = _free_variables(ast)
        self.arity = 1 + max((SLOT[v] for v in self.variables), default=0)
        self.overrides: tuple[Override, ...] = tuple(
            (tuple(float(c) for c in pt), float(v)) for pt, v in overrides
        )
        for i, (p, _) in enumerate(self.overrides):
            for q, _ in self.overrides[i + 1 :]:
                if len(p) == len(q) and all(_close(x, y, match_eps) for x, y in zip(p, q, strict=True)):
                    raise UsageError(f"override points {p} and {q} coincide within match_eps")
        self._fn = _compile(ast)

    def __repr__(self) -> str:
        extra = f", overrides={len(self.overrides)}" if self.overrides else ""
        return f"ExprFunc({self.source!r}{extra})"

    def with_overrides(self, overrides: Sequence[Override]) -> ExprFunc:
        return ExprFunc(self.ast, self.source, (*self.overrides, *overrides), self.match_eps)

    def match_override(self, args: Sequence[float]) -> float | None:
        for point, value in self.overrides:
            if len(point) <= len(args) and all(
                _close(a, p, self.match_eps) for a, p in zip(args, point, strict=False)
            ):
                return value
        return None

    def __call__(self, *args: float) -> float:
        if self.overrides:
            hit = self.match_override(args)
            if hit is not None:
                return hit
        if len(args) < self.arity:
            missing = [v for v in self.variables if SLOT[v] >= len(args)]
            raise EvalError(f"unbound variables {sorted(missing)}")
        return self._fn(args)

    def _positional(self, env: Mapping[str, float]) -> list[float]:
        missing = sorted(v for v in self.variables if v not in env)
        if missing:
            raise EvalError(f"unbound variables {missing}")
        return [float(env.get(VARIABLES[i], 0.0)) for i in range(self.arity)]

    def eval(self, env: Mapping[str, float]) -> float:
        return self(*self._positional(env))

    def eval_dual(self, env: Mapping[str, float], seed_var: str) -> DualValue:
        if seed_var not in SLOT:
            raise UsageError(f"unknown variable {seed_var!r}")
        args = self._positional(env)
        if self.overrides and self.match_override(args) is not None:
            raise OverrideNotDifferentiableError(
                f"point {tuple(args)} matches an override; overrides carry no derivative",
            )
        duals = {
            name: DualValue(float(env.get(name, 0.0)), 1.0 if name == seed_var else 0.0)
            for name in self.variables
        }
        return _dual_eval(self.ast, duals)

    def partial(self, seed_var: str, *args: float) -> float:
        """按位置参数求 ∂f/∂seed_var。"""
        env = {VARIABLES[i]: a for i, a in enumerate(args)}
        return self.eval_dual(env, seed_var).tangent


def parse(
    src: str,
    overrides: Sequence[Override] = (),
    match_eps: float = DEFAULT_MATCH_EPS,
) -> ExprFunc:
    if not src or not src.strip():
        raise ParseError("empty expression", 0, _BASE_START)
    ast = _Parser(src).parse()
    logger.debug("parse: %r -> %s", src, to_source(ast))
    return ExprFunc(ast, src, overrides, match_eps)


def evaluate(f: ExprFunc, env: Mapping[str, float]) -> float:
    return f.eval(env)


def eval_dual(f: ExprFunc, env: Mapping[str, float], seed_var: str) -> DualValue:
    return f.eval_dual(env, seed_var)


def parse_number(text: str) -> float:
    """常数表达式，例如 ``1/6``、``-2^-3``、``pi/4``。"""
    f = parse(text)
    if f.variables:
        raise UsageError(f"{text!r} is not a constant")
    return f()


def parse_override(text: str) -> Override:
    """``t=0.5:1``、``t=1/6:6`` 或 ``t=1,u0=2:3`` -> ((坐标...), 值)。"""
    head, sep, value = text.rpartition(":")
    if not sep or not head:
        raise UsageError(f"override {text!r} must look like 't=0.5:1'")
    coords: dict[int, float] = {}
    for part in head.split(","):
        name, eq, raw = part.partition("=")
        name = name.strip()
        if not eq or name not in SLOT:
            raise UsageError(f"bad override coordinate {part!r}")
        coords[SLOT[name]] = parse_number(raw)
    n = max(coords) + 1
    if sorted(coords) != list(range(n)):
        raise UsageError(f"override {text!r} must bind t, u0, … without gaps")
    return tuple(coords[i] for i in range(n)), parse_number(value)
