"""Schröder-function oracle near an attracting fixed point.

With ``lambda = phi'(beta)`` the Koenigs limit

    Psi(xi) = lim lambda**-n * (phi^n(xi) - beta)

conjugates ``phi`` to multiplication, ``Psi(phi(xi)) = lambda * Psi(xi)``, and
``Psi^-1(lambda**z * Psi(xi))`` is a complex iterate built without any
differintegral.  Its scale is fixed by ``Psi'(beta) = 1``.

This module is deliberately independent of :mod:`fracit.iteration` so the two
constructions can check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath as mp

from .dynamics import FixedPointData, MapSpec, find_fixed_point, map_eval
from .errors import BasinEscape, DomainError, NoConvergence
from .numerics import PrecisionContext, check_digits, xcomplex

#: Residual the functional equation must meet on the calibration circle.
CALIBRATION_TOL = 1e-8
CALIBRATION_POINTS = 16
CALIBRATION_START = 0.5
_MIN_RADIUS = 1e-6


@dataclass(frozen=True)
class SchroderModel:
    """Fixed-point data plus the disk on which the oracle was validated.

    ``image_radius`` is the smallest ``|Psi|`` seen on the calibration circle;
    inverses are only attempted for ``|u|`` below it.
    """

    fp: FixedPointData
    n_limit: int = 200
    radius: float = CALIBRATION_START
    image_radius: Optional[object] = None
    digits: Optional[int] = None

    def __post_init__(self):
        lam = self.fp.multiplier
        if not 0 < lam < 1:
            raise DomainError(f"Schröder model needs 0 < multiplier < 1, got {mp.nstr(lam, 10)}")
        if not self.radius > 0:
            raise DomainError("Schröder model needs radius > 0")
        if self.n_limit < 1:
            raise DomainError("n_limit must be >= 1")


def _working_digits(n_limit: int, lam, ctx: PrecisionContext) -> int:
    # Dividing by lambda**n magnifies the rounding of phi^n(xi) - beta.
    return check_digits(ctx.working + int(math.ceil(n_limit * -math.log10(float(lam)))) + 5)


def _psi(model: SchroderModel, m: MapSpec, xi, ctx: PrecisionContext):
    """Koenigs limit with early exit; returns ``(Psi, cauchy_error)``."""
    lam = model.fp.multiplier
    tol = mp.mpf(10) ** (-ctx.decimal_digits + 4)
    # Remaining Cauchy differences form a geometric series in lambda.
    tail = max(1.0, float(lam) / (1 - float(lam)))
    with mp.workdps(_working_digits(model.n_limit, lam, ctx)):
        beta = model.fp.beta
        x = xcomplex(xi)
        scale = mp.mpf(1)
        prev = x - beta
        if prev == 0:
            return mp.mpc(0), mp.mpf(0)
        inner = PrecisionContext(mp.mp.dps - 5, 5)
        diff = None
        for _ in range(model.n_limit):
            x = map_eval(m, x, inner)
            if abs(x) > 1e6:
                raise BasinEscape(f"orbit of {mp.nstr(xi, 10)} left the basin while computing Psi")
            scale /= lam
            cur = (x - beta) * scale
            diff = abs(cur - prev)
            prev = cur
            if diff * tail < tol:
                return +cur, diff * tail
    raise NoConvergence(
        f"Koenigs limit stalled: Cauchy difference {mp.nstr(diff, 3)} after {model.n_limit} steps "
        f"exceeds {mp.nstr(tol, 3)}"
    )


def _calibrate(m: MapSpec, fp: FixedPointData, n_limit: int, ctx: PrecisionContext):
    rho = CALIBRATION_START
    lam = fp.multiplier
    while rho >= _MIN_RADIUS:
        probe = SchroderModel(fp=fp, n_limit=n_limit, radius=rho)
        try:
            worst_image = None
            ok = True
            for k in range(CALIBRATION_POINTS):
                with mp.workdps(ctx.working):
                    xi = fp.beta + rho * mp.expjpi(mp.mpf(2 * k) / CALIBRATION_POINTS)
                psi, _ = _psi(probe, m, xi, ctx)
                psi_next, _ = _psi(probe, m, map_eval(m, xi, ctx.raised(5)), ctx)
                if abs(psi_next - lam * psi) > CALIBRATION_TOL * max(1, abs(psi)):
                    ok = False
                    break
                worst_image = abs(psi) if worst_image is None else min(worst_image, abs(psi))
        except (NoConvergence, BasinEscape):
            ok = False
        if ok:
            return rho, worst_image
        rho /= 2
    raise NoConvergence("no disk around the fixed point passed the functional-equation check")


def _default_n_limit(lam, ctx: PrecisionContext) -> int:
    # The Koenigs limit converges like lambda**n; aim a few digits past the target.
    return max(200, int(math.ceil((ctx.decimal_digits + 5) * math.log(10) / -math.log(float(lam)))) + 20)


def schroder_model(
    m: MapSpec,
    ctx: PrecisionContext = PrecisionContext(),
    n_limit: Optional[int] = None,
    radius: Optional[float] = None,
) -> SchroderModel:
    """Fixed point at the precision the limit needs, then radius calibration.

    ``n_limit`` defaults to enough steps for ``lambda**n`` to fall below the
    target accuracy.

    Calibration halves ``rho`` from 0.5 until the functional equation holds to
    ``1e-8`` on 16 points of the circle ``|xi - beta| = rho``.  Passing
    ``radius`` skips the search (the image radius is still measured).
    """
    rough = find_fixed_point(m, ctx)
    if n_limit is None:
        n_limit = _default_n_limit(rough.multiplier, ctx)
    digits = _working_digits(n_limit, rough.multiplier, ctx)
    fp = find_fixed_point(m, PrecisionContext(digits, ctx.guard_digits))
    if radius is None:
        radius, image = _calibrate(m, fp, n_limit, ctx)
    else:
        probe = SchroderModel(fp=fp, n_limit=n_limit, radius=radius)
        image = min(
            abs(_psi(probe, m, fp.beta + radius * mp.expjpi(mp.mpf(2 * k) / CALIBRATION_POINTS), ctx)[0])
            for k in range(CALIBRATION_POINTS)
        )
    return SchroderModel(fp=fp, n_limit=n_limit, radius=radius, image_radius=image, digits=ctx.decimal_digits)


def koenigs_psi(model: SchroderModel, m: MapSpec, xi, ctx: PrecisionContext = PrecisionContext()):
    """``Psi(xi)`` for ``|xi - beta| < model.radius``."""
    with mp.workdps(ctx.working):
        xi = xcomplex(xi)
    if not abs(xi - model.fp.beta) < model.radius:
        raise DomainError(
            f"|xi - beta| = {mp.nstr(abs(xi - model.fp.beta), 6)} is outside the calibrated radius {model.radius}"
        )
    return _psi(model, m, xi, ctx)[0]


def koenigs_inverse(model: SchroderModel, m: MapSpec, u, ctx: PrecisionContext = PrecisionContext(), max_iter: int = 60):
    """Solve ``Psi(xi) = u`` by damped Newton seeded at ``beta + u``.

    The derivative is a central difference; only the residual decides
    convergence, so its inaccuracy costs iterations, not digits.
    """
    with mp.workdps(ctx.working):
        u = xcomplex(u)
    if model.image_radius is not None and not abs(u) < model.image_radius:
        raise DomainError(
            f"|u| = {mp.nstr(abs(u), 6)} is outside the validated image disk of radius {mp.nstr(model.image_radius, 6)}"
        )
    if u == 0:
        with mp.workdps(ctx.working):
            return +model.fp.beta
    tol = mp.mpf(10) ** (-ctx.decimal_digits + 5)
    h = mp.mpf(10) ** (-(ctx.decimal_digits // 3))
    with mp.workdps(ctx.working):
        xi = model.fp.beta + u
        res = _psi(model, m, xi, ctx)[0] - u
        for _ in range(max_iter):
            if abs(res) < tol:
                return xi
            slope = (_psi(model, m, xi + h, ctx)[0] - _psi(model, m, xi - h, ctx)[0]) / (2 * h)
            if slope == 0:
                break
            step = res / slope
            for _ in range(30):
                cand = xi - step
                try:
                    cand_res = _psi(model, m, cand, ctx)[0] - u
                except (BasinEscape, NoConvergence):
                    cand_res = None
                if cand_res is not None and abs(cand_res) < abs(res):
                    break
                step /= 2
            else:
                break
            xi, res = cand, cand_res
    raise NoConvergence(f"Schröder inverse did not converge for u = {mp.nstr(u, 10)}")


def koenigs_iterate(model: SchroderModel, m: MapSpec, z, xi, ctx: PrecisionContext = PrecisionContext()):
    """``Psi^-1(lambda**z * Psi(xi))``."""
    with mp.workdps(ctx.working):
        z = xcomplex(z)
        if z == 0:
            return xcomplex(xi)
    psi = koenigs_psi(model, m, xi, ctx)
    with mp.workdps(ctx.working + 5):
        u = mp.power(model.fp.multiplier, z) * psi
    return koenigs_inverse(model, m, u, ctx)
