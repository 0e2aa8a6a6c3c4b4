import pytest
from pydantic import ValidationError

from qcalc.engine.errors import NotOnLatticeError, OrderTooHighError, UsageError
from qcalc.engine.expr import parse, parse_override
from qcalc.engine.quantum import (
    OrbitPoint,
    QOmegaParams,
    h_backward_derivative,
    h_forward_derivative,
    h_integral,
    hahn_derivative,
    hahn_derivative_higher,
    hahn_integral,
    hahn_lattice,
    jackson_integral,
    q_derivative,
    q_number,
    sigma_orbit,
)

pytestmark = pytest.mark.unit


def _sq(t: float) -> float:
    return t * t


def test_params_validation():
    with pytest.raises(ValidationError):
        QOmegaParams(q=1.0, omega=0.0)
    with pytest.raises(ValidationError):
        QOmegaParams(q=0.5, omega=-1.0)
    assert QOmegaParams(q=0.5, omega=1.0).omega0 == 2.0


def test_sigma_orbit(hahn_half_one):
    assert sigma_orbit(hahn_half_one, 6.0, 2) == 3.0
    assert sigma_orbit(hahn_half_one, 6.0, 0) == 6.0
    assert sigma_orbit(hahn_half_one, 2.0, 17) == 2.0
    # 负下标走 σ⁻¹ 方向
    assert sigma_orbit(hahn_half_one, 3.0, -1) == pytest.approx(4.0)
    assert q_number(3, 0.5) == pytest.approx(1.75)


def test_orbit_point(hahn_half_one):
    pt = OrbitPoint(hahn_half_one, 6.0, 2)
    assert pt.value == 3.0
    assert hahn_half_one.sigma(pt.value) == pt.succ().value
    assert pt.pred().pred().value == 6.0
    assert OrbitPoint(hahn_half_one, 2.0, 40).value == 2.0


def test_hahn_lattice(hahn_half_one):
    pts = hahn_lattice(hahn_half_one, 2.0, 4.0, depth=3)
    assert pts == [2.0, 2.25, 2.5, 3.0, 4.0]
    with pytest.raises(UsageError):
        hahn_lattice(hahn_half_one, 2.0, 4.0, depth=-1)


def test_hahn_derivative(hahn_half_one):
    assert hahn_derivative(_sq, hahn_half_one, 4.0) == pytest.approx(7.0, abs=1e-12)
    assert hahn_derivative(lambda t: 5.0, hahn_half_one, 4.0) == 0.0
    # 不动点取经典导数
    assert hahn_derivative(_sq, hahn_half_one, 2.0) == pytest.approx(4.0, abs=1e-8)


def test_hahn_derivative_higher(hahn_half_one):
    assert hahn_derivative_higher(_sq, hahn_half_one, 5.0, 2) == pytest.approx(1.5, abs=1e-9)
    assert hahn_derivative_higher(lambda t: 3.0 * t - 1.0, hahn_half_one, 5.0, 2) == pytest.approx(0.0, abs=1e-9)
    assert hahn_derivative_higher(_sq, hahn_half_one, 4.0, 1) == hahn_derivative(_sq, hahn_half_one, 4.0)
    with pytest.raises(OrderTooHighError):
        hahn_derivative_higher(_sq, hahn_half_one, 4.0, 7)
    with pytest.raises(UsageError):
        hahn_derivative_higher(_sq, hahn_half_one, 4.0, 0)


def test_hahn_reduces_to_q_derivative():
    p = QOmegaParams(q=0.3, omega=0.0)
    f = parse("t^3 - 2*t")
    for t in (0.5, 1.0, -2.0):
        assert hahn_derivative(f, p, t) == q_derivative(f, 0.3, t)
        expected = (f(0.3 * t) - f(t)) / (0.3 * t - t)
        assert q_derivative(f, 0.3, t) == pytest.approx(expected, rel=1e-12)


def test_hahn_tends_to_forward_difference():
    f = parse("t^2 + sin(t)")
    p = QOmegaParams(q=1.0 - 1e-8, omega=0.25)
    assert hahn_derivative(f, p, 1.5) == pytest.approx(h_forward_derivative(f, 0.25, 1.5), abs=1e-6)


def test_h_derivatives():
    assert h_forward_derivative(_sq, 1.0, 3.0) == 7.0
    assert h_backward_derivative(_sq, 1.0, 3.0) == 5.0
    assert h_forward_derivative(lambda t: 2.0, 0.1, 3.0) == 0.0
    with pytest.raises(UsageError):
        h_forward_derivative(_sq, 0.0, 3.0)


def test_hahn_integral(hahn_half_one, policy):
    assert hahn_integral(_sq, hahn_half_one, 3.0, 3.0, policy).value == 0.0
    res = hahn_integral(lambda t: 1.0, hahn_half_one, 3.0, 4.0, policy)
    assert res.converged
    assert res.value == pytest.approx(1.0, abs=1e-12)


def test_jackson_integral(policy):
    res = jackson_integral(lambda t: t, 0.5, 0.0, 1.0, policy)
    assert res.value == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_jackson_integral_breaks_triangle_inequality(policy):
    # f ≥ 0 只在 1/3 处非零，而 1/3 不在 [1]_q 上
    f = parse("0", [parse_override("t=1/3:1")])
    signed = jackson_integral(f, 0.5, 1.0 / 3.0, 1.0, policy).value
    absolute = jackson_integral(lambda t: abs(f(t)), 0.5, 1.0 / 3.0, 1.0, policy).value
    assert signed == pytest.approx(-1.0 / 6.0, abs=1e-12)
    assert abs(signed) > absolute


def test_hahn_integral_one_step_identity(hahn_half_one, policy):
    # ∫_{σ(t)}^{t} f = (t(1−q) − ω)·f(t)
    f = parse("exp(t/3)")
    t = 5.0
    res = hahn_integral(f, hahn_half_one, hahn_half_one.sigma(t), t, policy)
    assert res.value == pytest.approx((t * 0.5 - 1.0) * f(t), abs=1e-10)


def test_h_integral():
    assert h_integral(lambda t: 1.0, 0.25, 0.0, 1.0) == 1.0
    assert h_integral(lambda t: t, 0.5, 0.0, 1.0) == 0.25
    assert h_integral(lambda t: t, 0.5, 1.0, 0.0) == -0.25
    with pytest.raises(NotOnLatticeError):
        h_integral(lambda t: t, 0.3, 0.0, 1.0)
