import math

import pytest

from qcalc.engine.errors import EvalError, OverrideNotDifferentiableError, ParseError, UsageError
from qcalc.engine.expr import eval_dual, evaluate, parse, parse_number, parse_override, to_source

pytestmark = pytest.mark.unit


def _counterexample():
    # q = 1/2 时 q-对称积分为负的反例：f(1/2) = 1，f(1/6) = 6，其余为 0
    return parse("0", [parse_override("t=1/2:1"), parse_override("t=1/6:6")])


def test_parse_and_eval():
    f = parse("t^2+1")
    assert evaluate(f, {"t": 2.0}) == 5.0
    assert f(2.0) == 5.0
    assert f.variables == frozenset({"t"})


def test_precedence_and_associativity():
    assert parse("2^3^2")() == 512.0
    assert parse("-2^2")() == -4.0
    assert parse("8/4/2")() == 1.0
    assert parse("1 - 2 - 3")() == -4.0
    assert parse("2*-3")() == -6.0


@pytest.mark.parametrize(
    "src",
    ["-t^2 + 2^-u0", "max(sin(t), 1/(1+u1^2))", "e^(pi*t) - ln(abs(t)+1)", "1 - (2 - 3)"],
)
def test_to_source_reparses_to_same_tree(src):
    f = parse(src)
    assert parse(to_source(f.ast)).ast == f.ast


def test_functions_and_constants():
    f = parse("sqrt(1+u1^2)")
    assert f.variables == frozenset({"u1"})
    assert f.arity == 3
    assert f(0.0, 0.0, 1.0) == pytest.approx(math.sqrt(2))
    assert parse("max(1, t, 3)")(5.0) == 5.0
    assert parse("min(abs(t), 2)")(-1.5) == 1.5
    assert parse("ln(e) + cos(pi)")() == pytest.approx(0.0)


@pytest.mark.parametrize(("src", "offset"), [("t^", 2), ("", 0), ("(t", 2), ("2 $ 3", 2)])
def test_parse_errors_carry_offsets(src, offset):
    with pytest.raises(ParseError) as ei:
        parse(src)
    assert ei.value.offset == offset


def test_unknown_names_are_rejected():
    with pytest.raises(ParseError):
        parse("x + 1")
    with pytest.raises(ParseError):
        parse("tan(t)")


def test_overrides_take_precedence():
    f = _counterexample()
    assert f(1 / 6) == 6.0
    assert f(0.5) == 1.0
    assert f(0.3) == 0.0
    assert evaluate(f, {"t": 1 / 6}) == 6.0


def test_override_matching_is_relative():
    f = parse("0", [parse_override("t=0.166666666666:6")])
    assert f(1 / 6) == 6.0
    assert f(0.1667) == 0.0


def test_coinciding_overrides_rejected():
    with pytest.raises(UsageError, match="coincide"):
        parse("0", [((0.5,), 1.0), ((0.5,), 2.0)])


@pytest.mark.parametrize(
    ("src", "env"),
    [
        ("1/t", {"t": 0.0}),
        ("sqrt(t)", {"t": -1.0}),
        ("ln(t)", {"t": 0.0}),
        ("t^0.5", {"t": -4.0}),
        ("u0 + 1", {"t": 1.0}),
    ],
)
def test_eval_errors(src, env):
    with pytest.raises(EvalError):
        evaluate(parse(src), env)


def test_eval_dual():
    d = eval_dual(parse("u1^2"), {"u1": 3.0}, "u1")
    assert (d.primal, d.tangent) == (9.0, 6.0)

    d = eval_dual(parse("t*u0"), {"t": 2.0, "u0": 5.0}, "u0")
    assert (d.primal, d.tangent) == (10.0, 2.0)

    d = eval_dual(parse("sqrt(1+u1^2)"), {"u1": 1.0}, "u1")
    assert d.primal == pytest.approx(math.sqrt(2))
    assert d.tangent == pytest.approx(1 / math.sqrt(2))


def test_dual_matches_finite_difference():
    f = parse("exp(u0)*sin(t) + u0^3/(1+t^2)")
    env = {"t": 0.7, "u0": -0.4}
    h = 1e-6
    fd = (f.eval({**env, "u0": env["u0"] + h}) - f.eval({**env, "u0": env["u0"] - h})) / (2 * h)
    assert f.eval_dual(env, "u0").tangent == pytest.approx(fd, rel=1e-7)


def test_partial_is_positional():
    L = parse("u1^2 + 0.5*u0 + t*u1")
    # (t, u0, u1) = (3, 1, 2)
    assert L.partial("u0", 3.0, 1.0, 2.0) == 0.5
    assert L.partial("u1", 3.0, 1.0, 2.0) == 7.0
    assert L.partial("t", 3.0, 1.0, 2.0) == 2.0


def test_overrides_are_not_differentiable():
    f = _counterexample()
    with pytest.raises(OverrideNotDifferentiableError):
        f.eval_dual({"t": 0.5}, "t")


def test_parse_number():
    assert parse_number("1/6") == pytest.approx(1 / 6)
    assert parse_number("-2^-3") == -0.125
    with pytest.raises(UsageError, match="not a constant"):
        parse_number("t+1")


def test_parse_override_forms():
    assert parse_override("t=1/2:1") == ((0.5,), 1.0)
    assert parse_override("t=1,u0=2:3") == ((1.0, 2.0), 3.0)
    with pytest.raises(UsageError):
        parse_override("t=1")
    with pytest.raises(UsageError, match="without gaps"):
        parse_override("u0=1:2")
