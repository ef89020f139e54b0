import mpmath as mp
import pytest

from fracit.differintegral import EvalConfig
from fracit.dynamics import Affine, ExpBase, find_fixed_point, map_eval
from fracit.errors import BasinEscape, DomainError
from fracit.iteration import (
    complex_iterate,
    iterate_result,
    period,
    verify_periodicity,
    verify_semigroup,
)

with mp.workdps(250):
    SQRT2 = mp.sqrt(2)
M = ExpBase(SQRT2)
CFG = EvalConfig()


def test_integer_heights_are_natural_iterates():
    assert abs(complex_iterate(M, 1, 1, CFG) - SQRT2) < 1e-30
    assert abs(complex_iterate(M, 2, 1, CFG) - mp.mpf("1.6325269194381528")) < 1e-15
    xi = mp.mpf("1.5")
    assert abs(complex_iterate(M, 1, xi, CFG) - map_eval(M, xi)) < 1e-28


def test_interpolation_through_orbit():
    x = mp.mpf(1)
    for n in range(1, 7):
        x = map_eval(M, x)
        assert abs(complex_iterate(M, n, 1, CFG) - x) <= CFG.tol


def test_half_iterate_composes_to_one_step():
    assert verify_semigroup(M, mp.mpf("0.5"), mp.mpf("0.5"), 1, CFG) < 1e-8
    half = complex_iterate(M, mp.mpf("0.5"), 1, CFG)
    assert abs(complex_iterate(M, mp.mpf("0.5"), half, CFG) - SQRT2) < 1e-8


def test_semigroup_complex_heights():
    assert verify_semigroup(M, mp.mpf("0.3"), mp.mpc("0.7", "0.2"), 1, CFG) < 1e-7


def test_affine_iterates_are_powers():
    m = Affine(mp.mpf("1.2"))
    r = iterate_result(m, mp.mpc("0.5", "0.5"), 1, CFG)
    with mp.workdps(40):
        assert abs(r.value - mp.power(mp.mpf("1.2"), mp.mpc("0.5", "0.5"))) < 1e-10


def test_real_monotone_and_bounded():
    prev = mp.mpf(1)
    for k in range(1, 40):
        r = iterate_result(M, mp.mpf(k) / 10, 1, CFG)
        v = r.value
        im = v.imag if isinstance(v, mp.mpc) else 0
        assert abs(im) < 1e-10
        re = v.real if isinstance(v, mp.mpc) else v
        assert prev < re < 2
        prev = re


def test_contraction_towards_fixed_point():
    # Below beta each step contracts by at most lambda, so the gap after 20.5
    # steps from 1 is under lambda**20 (about 6.6e-4, far from 1e-6).
    fp = find_fixed_point(M, CFG.ctx)
    r = iterate_result(M, mp.mpf("20.5"), 1, CFG)
    gap = abs(r.value - fp.beta)
    assert 0 < gap <= fp.multiplier**20 * 1
    assert r.error_estimate <= CFG.tol


@pytest.mark.parametrize("z", [1, 2])
def test_periodicity_near_fixed_point(z):
    assert verify_periodicity(M, z, mp.mpf("1.9"), CFG) < 1e-6


def test_period_value():
    with mp.workdps(40):
        expected = 2j * mp.pi / mp.log(mp.log(2))
    assert abs(period(M, CFG) - expected) < 1e-25


def test_domain_errors():
    with pytest.raises(DomainError):
        complex_iterate(M, mp.mpf("-0.5"), 1, CFG)
    with pytest.raises(BasinEscape):
        complex_iterate(M, mp.mpf("0.5"), 5, CFG)


def test_fixed_point_start_is_stationary():
    fp = find_fixed_point(M, CFG.ctx)
    assert abs(complex_iterate(M, mp.mpf("0.7"), fp.beta, CFG) - fp.beta) < 1e-12
