import mpmath as mp
import pytest

from fracit.differintegral import (
    EvalConfig,
    differintegral_at_zero,
    integral_part,
    series_part,
    zero_limit_identity,
    zero_limit_report,
)
from fracit.dynamics import Affine, ExpBase
from fracit.errors import DomainError, NearIntegerPole
from fracit.iteration import orbit_theta
from fracit.numerics import PrecisionContext
from fracit.theta import affine_theta, constant_theta, theta_from_coefficients

with mp.workdps(250):
    SQRT2 = mp.sqrt(2)
CFG = EvalConfig()


def test_series_part_examples():
    zero = theta_from_coefficients([0] * 8, 0)
    assert series_part(zero, mp.mpf("0.5"), CFG) == 0
    ones = constant_theta(1)
    with mp.workdps(40):
        # sum (-1)^k / (k! (k + 1/2)) = sqrt(pi) erf(1), by termwise integration of exp(-t^2).
        oracle = mp.sqrt(mp.pi) * mp.erf(1)
        brute = mp.fsum((-1) ** k / (mp.factorial(k) * (k + mp.mpf(1) / 2)) for k in range(60))
    assert abs(oracle - brute) < mp.mpf(10) ** -35
    assert abs(series_part(ones, mp.mpf("0.5"), CFG) - oracle) < 1e-25


def test_series_part_affine_brute_force():
    ts = affine_theta(Affine(SQRT2))
    with mp.workdps(50):
        brute = mp.fsum(SQRT2 ** (k + 1) * (-1) ** k / (mp.factorial(k) * (k + mp.mpf(1) / 2)) for k in range(120))
    assert abs(series_part(ts, mp.mpf("0.5"), CFG) - brute) < 1e-25


def test_series_part_rejects_poles():
    with pytest.raises(NearIntegerPole):
        series_part(constant_theta(1), 2 + mp.mpf("1e-9"), CFG)


def test_integral_part_examples():
    with mp.workdps(40):
        e1 = 2 * mp.e1(1)
    assert abs(integral_part(constant_theta(2), 1, CFG) - e1) < 1e-12
    assert integral_part(theta_from_coefficients([0] * 8, 0), mp.mpf("0.5"), CFG) == 0
    with mp.workdps(40):
        closed = mp.exp(-SQRT2)
    assert abs(integral_part(affine_theta(Affine(SQRT2)), 0, CFG) - closed) < 1e-12


def test_affine_reproduces_powers():
    ts = affine_theta(Affine(SQRT2))
    for z in [mp.mpf("0.5"), mp.mpf("1.75"), mp.mpc("0.5", "1"), mp.mpc("2.25", "-0.5")]:
        r = differintegral_at_zero(ts, z - 1, CFG)
        with mp.workdps(40):
            assert abs(r.value - mp.power(SQRT2, z)) < 1e-10
        assert r.error_estimate <= CFG.tol
    half = differintegral_at_zero(ts, mp.mpf("-0.5"), CFG)
    assert abs(half.value - mp.mpf("1.1892071")) < 1e-7


def test_integer_orders_return_coefficients():
    ts = affine_theta(Affine(SQRT2))
    r = differintegral_at_zero(ts, 0, CFG)
    assert abs(r.value - ts.coefficient(0)) < mp.mpf(10) ** -35
    assert r.path == "near_integer" and r.series_part is None
    # General path either side of an integer brackets the coefficient.
    for m in [1, 2, 3]:
        lo = differintegral_at_zero(ts, m - 1 - mp.mpf("2e-6"), CFG).value
        hi = differintegral_at_zero(ts, m - 1 + mp.mpf("2e-6"), CFG).value
        assert abs((lo + hi) / 2 - ts.coefficient(m - 1)) < 1e-9


@pytest.mark.parametrize("z", [mp.mpf("-0.5"), mp.mpf("0.3"), mp.mpc("0.7", "2"), mp.mpf("2.5")])
def test_constant_series_is_constant(z):
    r = differintegral_at_zero(constant_theta(2), z, CFG)
    assert abs(r.value - 2) < 1e-10


def test_vertical_line_bound():
    ts = affine_theta(Affine(mp.mpf("1.2")))
    for y in range(-4, 5):
        v = differintegral_at_zero(ts, mp.mpc("-0.5", y), CFG).value
        assert abs(v) < 10 * mp.mpf("1.2")


def test_order_domain():
    with pytest.raises(DomainError):
        differintegral_at_zero(constant_theta(1), -1.5, CFG)


def test_zero_limit_identity():
    assert zero_limit_identity(constant_theta(2), CFG, xi=2) < 1e-12
    m = ExpBase(SQRT2)
    for xi in [mp.mpf(1), mp.mpf("1.9")]:
        ts = orbit_theta(m, xi, CFG)
        rep = zero_limit_report(ts, CFG, xi=xi, exact_tail=True)
        assert rep.residual < 1e-10
        assert rep.tail_kind == "exact"


def test_parameter_robustness_affine():
    ts = affine_theta(Affine(SQRT2))
    z = mp.mpc("1.3", "0.4") - 1
    base = differintegral_at_zero(ts, z, CFG)
    for variant in [
        CFG.with_(series_terms_max=2 * CFG.series_terms_max),
        CFG.with_(panel_order=2 * CFG.panel_order),
        CFG.with_(W_max_factor=2),
    ]:
        other = differintegral_at_zero(ts, z, variant)
        assert abs(other.value - base.value) <= 2 * max(base.error_estimate, other.error_estimate)


def test_config_invariants():
    with pytest.raises(DomainError):
        EvalConfig(tol=1e-40)
    with pytest.raises(DomainError):
        EvalConfig(integer_guard=0.5)
    assert EvalConfig(ctx=PrecisionContext(40), tol=1e-20).tol == 1e-20
