import mpmath as mp
import pytest

from fracit.differintegral import EvalConfig
from fracit.dynamics import ExpBase
from fracit.errors import DomainError
from fracit.koenigs import koenigs_iterate, schroder_model
from fracit.tetration import tetrate, tetrate_result, verify_tetration

with mp.workdps(250):
    SQRT2 = mp.sqrt(2)
CFG = EvalConfig()


def tower(alpha, n):
    x = mp.mpf(1)
    with mp.workdps(50):
        for _ in range(n):
            x = mp.power(alpha, x)
    return x


def test_examples():
    assert abs(tetrate(SQRT2, 1, CFG) - SQRT2) < 1e-30
    assert abs(tetrate(SQRT2, 2, CFG) - mp.mpf("1.6325269194381528")) < 1e-15
    # lambda**10 ~ 0.026 bounds the approach; the height-10 tower sits ~0.016 below 2.
    v = tetrate(SQRT2, 10, CFG)
    assert abs(v - tower(SQRT2, 10)) < 1e-28
    assert 0 < 2 - v < mp.log(2) ** 10


def test_domain():
    with pytest.raises(DomainError):
        tetrate("1.5", 1, CFG)
    with pytest.raises(DomainError):
        tetrate("0.9", 1, CFG)


def test_recursion():
    assert verify_tetration(SQRT2, 1, CFG) <= CFG.tol
    assert verify_tetration(SQRT2, mp.mpf("0.5"), CFG) < 1e-8
    assert verify_tetration(mp.mpf("1.2"), mp.mpc("0.5", "0.5"), CFG) < 1e-7


def test_real_increasing_below_two():
    prev = mp.mpf(1)
    for k in range(1, 41):
        r = tetrate_result(SQRT2, mp.mpf(k) / 10, CFG)
        v = r.value
        assert abs(v.imag if isinstance(v, mp.mpc) else 0) < 1e-10
        re = v.real if isinstance(v, mp.mpc) else v
        assert prev < re < 2
        prev = re


@pytest.mark.parametrize("z", ["0.5", "1.5", "2.5"])
def test_base_monotonicity(z):
    a, b, c = (tetrate(alpha, mp.mpf(z), CFG) for alpha in ("1.1", "1.3", "1.44"))
    assert a.real < b.real < c.real


def test_agrees_with_koenigs_construction():
    # phi^z(1) = phi^-n(phi^z(phi^n(1))): the Koenigs iterate runs from a start
    # inside the validated disk and log_alpha carries it back n steps.
    m = ExpBase(SQRT2)
    model = schroder_model(m, CFG.ctx)
    n = 8
    start = tower(SQRT2, n)
    assert abs(start - model.fp.beta) < model.radius
    for z in [mp.mpf("0.5"), mp.mpf("1.25"), mp.mpc("0.5", "0.5")]:
        k = koenigs_iterate(model, m, z, start, CFG.ctx)
        with mp.workdps(60):
            for _ in range(n):
                k = mp.log(k) / mp.log(SQRT2)
        assert abs(k - tetrate(SQRT2, z, CFG)) < 1e-7
