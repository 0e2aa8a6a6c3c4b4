import numpy as np
import pytest
from pydantic import ValidationError

from qcalc.engine.errors import BoundaryViolationError, InadmissibleVariationError, UsageError
from qcalc.engine.expr import parse, parse_override
from qcalc.engine.variational import (
    Flavor,
    VariationalProblem,
    convexity_sample,
    el_residual,
    eval_functional,
    extremizer_sample,
    first_variation,
    first_variation_integral,
    leitmann_check,
    random_bump,
    residual_points,
    state,
)

pytestmark = pytest.mark.unit


@pytest.fixture
def hahn_higher_problem() -> VariationalProblem:
    return VariationalProblem(
        flavor=Flavor.HAHN_HIGHER,
        q=0.5,
        omega=0.5,
        r=1,
        L="(u0+1/2)^2*(u1^2-1)^2",
        a=-1.0,
        b=1.0,
        boundary=((0.0, -1.0),),
    )


@pytest.fixture
def q_sym_problem() -> VariationalProblem:
    return VariationalProblem(
        flavor="q_symmetric",
        q=0.5,
        L="1+u1^2",
        a=0.0,
        b=1.0,
        boundary=((0.0, 1.0),),
    )


@pytest.fixture
def leitmann_problem() -> VariationalProblem:
    return VariationalProblem(
        flavor=Flavor.HAHN_SYMMETRIC,
        q=0.5,
        omega=1.0,
        L="u1^2 + 0.5*u0 + t*u1",
        a=2.0,
        b=4.0,
        boundary=((0.0, 2.0),),
    )


def _piecewise_minimizer():
    # y = −t，y(−1) = 0，y(0) = 1
    return parse("-t", [parse_override("t=-1:0"), parse_override("t=0:1")])


# ---------------------------------------------------------------- problem model


def test_problem_parses_lagrangian(q_sym_problem):
    assert q_sym_problem.lagrangian.variables == frozenset({"u1"})
    assert q_sym_problem.order == 1
    assert q_sym_problem.params.omega0 == 0.0


@pytest.mark.parametrize(
    "update",
    [
        {"flavor": "q_symmetric", "omega": 1.0},
        {"flavor": "hahn_symmetric", "r": 2, "boundary": ((0.0, 1.0), (0.0, 0.0))},
        {"flavor": "hahn_higher", "r": 5, "boundary": ((0.0, 1.0),) * 5},
        {"a": 1.0, "b": 1.0},
        {"boundary": ((0.0, 1.0), (0.0, 0.0))},
        {"L": "u2 + 1"},
    ],
)
def test_problem_validation(update):
    fields = {
        "flavor": "q_symmetric",
        "q": 0.5,
        "L": "1+u1^2",
        "a": 0.0,
        "b": 1.0,
        "boundary": ((0.0, 1.0),),
        **update,
    }
    with pytest.raises(ValidationError):
        VariationalProblem(**fields)


def test_residual_points_include_fixed_point(hahn_higher_problem, q_sym_problem):
    pts = residual_points(hahn_higher_problem)
    assert pts[:3] == [-1.0, 0.0, 0.5]
    # σᵏ(−1) = 1 − 2^{1−k}：k ≤ 17 可分辨，随后以 ω0 = 1 收尾；b = ω0 不再贡献点
    assert pts[-1] == 1.0
    assert len(pts) == 19
    sym = residual_points(q_sym_problem)
    # a = 0 是不动点；σ^{2n+1}(1) = 0.5^{2n+1} 到 0.5^15 为止
    assert sym[:3] == [0.0, 0.5, 0.125]
    assert sym[-1] == 0.5**15
    assert len(sym) == 9


def test_state_for_symmetric_flavor(q_sym_problem):
    u0, u1 = state(q_sym_problem, parse("t^2"), 2.0)
    assert u0 == 1.0
    assert u1 == pytest.approx(2.0 * (0.5 + 2.0), rel=1e-12)


# ---------------------------------------------------------------- Euler–Lagrange


@pytest.mark.golden
def test_hahn_higher_piecewise_minimizer(hahn_higher_problem):
    y = _piecewise_minimizer()
    assert eval_functional(hahn_higher_problem, y) == pytest.approx(0.0, abs=1e-12)
    rep = el_residual(hahn_higher_problem, y)
    assert rep.flavor is Flavor.HAHN_HIGHER
    assert rep.max_abs <= 1e-7
    assert rep.functional_value == pytest.approx(0.0, abs=1e-12)
    assert rep.assumed


def _second_order(boundary: tuple[tuple[float, float], ...]) -> VariationalProblem:
    return VariationalProblem(flavor=Flavor.HAHN_HIGHER, q=0.5, omega=0.0, r=2, L="u2^2", a=1.0, b=2.0, boundary=boundary)


def test_hahn_higher_second_order_quadratic():
    # D²[t²] = 1 + q 为常数，∂L/∂u2 的二阶导为零
    rep = el_residual(_second_order(((1.0, 4.0), (1.5, 3.0))), parse("t^2"))
    assert rep.max_abs <= 1e-7
    assert rep.functional_value == pytest.approx(2.25, abs=1e-10)


def test_hahn_higher_second_order_quartic_is_not_extremal():
    rep = el_residual(_second_order(((1.0, 16.0), (1.875, 15.0))), parse("t^4"))
    assert rep.max_abs > 1e-3


def test_hahn_higher_near_classical_limit():
    prob = VariationalProblem(
        flavor=Flavor.HAHN_HIGHER,
        q=1.0 - 1e-6,
        omega=1e-9,
        L="u1^2 - 2*u1 + 1",
        a=0.0,
        b=1.0,
        boundary=((0.0, 1.0),),
    )
    rep = el_residual(prob, parse("t"))
    assert rep.max_abs <= 1e-5
    assert rep.functional_value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.golden
def test_q_symmetric_straight_line(q_sym_problem):
    rep = el_residual(q_sym_problem, parse("t"))
    assert rep.max_abs <= 1e-8
    assert rep.functional_value == pytest.approx(2.0, abs=1e-10)


def test_q_symmetric_parabola_is_not_extremal(q_sym_problem):
    rep = el_residual(q_sym_problem, parse("t^2"))
    assert rep.max_abs > 1e-3


def test_boundary_violation(q_sym_problem):
    with pytest.raises(BoundaryViolationError):
        el_residual(q_sym_problem, parse("2*t"))


# ---------------------------------------------------------------- first variation


def test_first_variation_vanishes_on_extremal(q_sym_problem):
    eta = parse("t*(1-t)")
    delta = first_variation(q_sym_problem, parse("t"), eta)
    assert abs(delta) <= 1e-6
    assert first_variation_integral(q_sym_problem, parse("t"), eta) == pytest.approx(delta, abs=1e-6)


def test_first_variation_on_non_extremal(q_sym_problem):
    y, eta = parse("t^2"), parse("t*(1-t)")
    delta = first_variation(q_sym_problem, y, eta)
    assert abs(delta) > 1e-3
    assert first_variation_integral(q_sym_problem, y, eta) == pytest.approx(delta, abs=1e-5)


def test_variation_must_vanish_at_ends(q_sym_problem):
    with pytest.raises(InadmissibleVariationError):
        first_variation(q_sym_problem, parse("t"), parse("t"))


# ---------------------------------------------------------------- convexity


@pytest.mark.parametrize("src", ["u1^2", "sqrt(1+u1^2)", "t^2*u1^2 + u0^2"])
def test_convex_lagrangians(src):
    rep = convexity_sample(parse(src), (0.0, 1.0), (-2.0, 2.0), (-2.0, 2.0), 50, seed=3)
    assert rep.jointly_convex_evidence
    assert rep.violations == []
    assert rep.samples == 5 * 50


def test_concave_lagrangian_has_violations():
    rep = convexity_sample(parse("-u1^2"), (0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), 20, seed=1)
    assert not rep.jointly_convex_evidence
    assert all(v.defect > 0 for v in rep.violations)


def test_convexity_is_reproducible():
    L = parse("u0*u1")
    one = convexity_sample(L, (0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), 10, seed=11)
    two = convexity_sample(L, (0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), 10, seed=11)
    assert one == two


def test_convexity_arguments():
    with pytest.raises(UsageError):
        convexity_sample(parse("u1^2"), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 1)
    with pytest.raises(UsageError):
        convexity_sample(parse("u2^2"), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 10)


# ---------------------------------------------------------------- Leitmann


def test_random_bump_keeps_endpoints():
    f = random_bump(np.random.default_rng(5), 2.0, 4.0, -1.0, 3.0)
    assert f(2.0) == pytest.approx(-1.0)
    assert f(4.0) == pytest.approx(3.0)


@pytest.mark.golden
def test_leitmann_minimizer(leitmann_problem):
    rep = el_residual(leitmann_problem, parse("t-2"))
    assert rep.max_abs <= 1e-8


@pytest.mark.golden
def test_leitmann_equivalence(leitmann_problem):
    rep = leitmann_check(
        leitmann_problem.lagrangian,
        parse("u1^2"),
        parse("u0 + t - 2"),
        parse("u0 - t + 2"),
        parse("2*u0 + (0.5*t+1)*u0 + (0.5*t+1)*t"),
        leitmann_problem,
        samples=10,
        seed=42,
    )
    assert leitmann_problem.lattice_depth == 24
    assert rep.identity_holds
    assert rep.max_pointwise_defect <= 1e-8
    assert rep.constant_holds
    assert rep.boundary_constant == pytest.approx(8.0)
    assert len(rep.functional_differences) == 10


def test_leitmann_trivial_transformation(leitmann_problem):
    L = parse("u1^2 + u0")
    ident = parse("u0")
    rep = leitmann_check(L, L, ident, ident, parse("0"), leitmann_problem, samples=3, seed=1)
    assert rep.identity_holds
    assert rep.functional_differences == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_leitmann_detects_wrong_gauge(leitmann_problem):
    rep = leitmann_check(
        leitmann_problem.lagrangian,
        parse("u1^2"),
        parse("u0 + t - 2"),
        parse("u0 - t + 2"),
        parse("2*u0 + (0.5*t+1)*u0 + (0.5*t+1)*t + t"),
        leitmann_problem,
        samples=2,
        seed=42,
    )
    assert not rep.identity_holds


def test_leitmann_rejects_hahn_higher(hahn_higher_problem):
    L = hahn_higher_problem.lagrangian
    with pytest.raises(UsageError):
        leitmann_check(L, L, parse("u0"), parse("u0"), parse("0"), hahn_higher_problem)


# ---------------------------------------------------------------- extremizer sampling


def test_extremizer_sample_on_minimizer(q_sym_problem):
    rep = extremizer_sample(q_sym_problem, parse("t"), samples=8, seed=4)
    assert not rep.improved
    assert rep.base_value == pytest.approx(2.0, abs=1e-10)
    assert rep.skipped == 0
    assert rep.min_perturbed >= rep.base_value - 1e-7


def test_extremizer_sample_finds_improvement(q_sym_problem):
    rep = extremizer_sample(q_sym_problem, parse("t + 3*t*(1-t)"), samples=20, seed=4)
    assert rep.improved
