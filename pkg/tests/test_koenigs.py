import mpmath as mp
import pytest

from fracit.dynamics import ExpBase, map_eval
from fracit.errors import DomainError
from fracit.koenigs import SchroderModel, koenigs_inverse, koenigs_iterate, koenigs_psi, schroder_model
from fracit.numerics import PrecisionContext

with mp.workdps(250):
    SQRT2 = mp.sqrt(2)
M = ExpBase(SQRT2)
CTX = PrecisionContext(30)


@pytest.fixture(scope="module")
def model():
    return schroder_model(M, CTX)


def test_calibration(model):
    assert 0 < model.radius <= 0.5
    assert model.image_radius > 0
    assert abs(model.fp.beta - 2) < mp.mpf(10) ** -40


def test_psi_at_fixed_point_is_zero(model):
    assert abs(koenigs_psi(model, M, model.fp.beta, CTX)) < mp.mpf(10) ** -60


def test_functional_equation(model):
    lam = model.fp.multiplier
    xi = model.fp.beta - mp.mpf("0.05")
    ratio = koenigs_psi(model, M, map_eval(M, xi, CTX), CTX) / koenigs_psi(model, M, xi, CTX)
    assert abs(ratio - lam) < 1e-8
    b = model.fp.beta
    for k in range(8):
        xi = b + model.radius * mp.mpf("0.9") * mp.expjpi(mp.mpf(k) / 4)
        psi = koenigs_psi(model, M, xi, CTX)
        lhs = koenigs_psi(model, M, map_eval(M, xi, CTX), CTX)
        assert abs(lhs - lam * psi) <= 1e-8 * max(1, abs(psi))


def test_psi_reproducible_across_depths(model):
    deeper = SchroderModel(model.fp, model.n_limit + 10, model.radius, model.image_radius)
    xi = model.fp.beta - mp.mpf("0.1")
    assert abs(koenigs_psi(model, M, xi, CTX) - koenigs_psi(deeper, M, xi, CTX)) < 1e-8


def test_normalised_derivative(model):
    h = mp.mpf(10) ** -8
    b = model.fp.beta
    d = (koenigs_psi(model, M, b + h, CTX) - koenigs_psi(model, M, b - h, CTX)) / (2 * h)
    assert abs(d - 1) < 1e-6


def test_inverse(model):
    assert abs(koenigs_inverse(model, M, 0, CTX) - model.fp.beta) < mp.mpf(10) ** -35
    xi = model.fp.beta - mp.mpf("0.05")
    assert abs(koenigs_inverse(model, M, koenigs_psi(model, M, xi, CTX), CTX) - xi) < 1e-8
    xi = model.fp.beta - mp.mpf("0.1")
    u = koenigs_psi(model, M, xi, CTX) * model.fp.multiplier
    assert abs(koenigs_inverse(model, M, u, CTX) - map_eval(M, xi, CTX)) < 1e-8


def test_iterate(model):
    xi = mp.mpf("1.9")
    assert koenigs_iterate(model, M, 0, xi, CTX) == xi
    assert abs(koenigs_iterate(model, M, 1, xi, CTX) - map_eval(M, xi, CTX)) < 1e-8
    half = koenigs_iterate(model, M, mp.mpf("0.5"), xi, CTX)
    assert abs(koenigs_iterate(model, M, mp.mpf("0.5"), half, CTX) - map_eval(M, xi, CTX)) < 1e-8


def test_exact_periodicity(model):
    xi = mp.mpf("1.8")
    with mp.workdps(40):
        z = mp.mpc("0.7", "0.3")
        shifted = z + 2j * mp.pi / mp.log(model.fp.multiplier)
    a = koenigs_iterate(model, M, z, xi, CTX)
    b = koenigs_iterate(model, M, shifted, xi, CTX)
    assert abs(a - b) < mp.mpf(10) ** -25


def test_domain_checks(model):
    with pytest.raises(DomainError):
        koenigs_psi(model, M, model.fp.beta + 2 * model.radius, CTX)
    with pytest.raises(DomainError):
        koenigs_inverse(model, M, 10 * model.image_radius, CTX)
