"""Iterable maps, their attracting fixed points, and natural orbits.

Three families are supported:

* :class:`ExpBase` -- ``xi -> alpha**xi`` with ``1 < alpha < e**(1/e)``;
* :class:`Affine` -- ``xi -> alpha*xi`` (the bottom rung of the hyper-operator ladder);
* :class:`HyperStep` -- ``xi -> alpha ^^n xi`` evaluated by a completed hyper-operator tower.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import mpmath as mp

from .errors import BasinEscape, DegenerateMultiplier, DomainError, NoConvergence
from .numerics import PrecisionContext, check_digits, ensure_finite, xcomplex

#: Orbits leaving ``|xi| <= DIVERGENCE_BOUND`` are declared outside the basin.
DIVERGENCE_BOUND = mp.mpf(10) ** 6
#: Multipliers within this distance of 0 or 1 are rejected.
MULTIPLIER_TOL = 1e-6

_ALPHA_DIGITS = 250


def _exact_alpha(alpha) -> mp.mpf:
    # Decimal strings and floats are parsed at high precision so that the
    # stored base does not depend on the caller's ambient precision.
    if isinstance(alpha, mp.mpf):
        return alpha
    with mp.workdps(_ALPHA_DIGITS):
        if isinstance(alpha, float):
            return mp.mpf(repr(alpha))
        return mp.mpf(alpha)


def e_to_one_over_e(digits: int = 60) -> mp.mpf:
    with mp.workdps(digits):
        return mp.exp(1 / mp.e)


class MapSpec:
    """Marker base class for iterable maps."""

    family: str = ""


@dataclass(frozen=True)
class ExpBase(MapSpec):
    """``f(xi) = alpha**xi``.

    Strict mode rejects bases outside ``(1, e**(1/e)]``; the boundary itself is
    accepted here and rejected later as a degenerate multiplier.
    """

    alpha: mp.mpf
    permissive: bool = False
    family: str = field(default="ExpBase", init=False)

    def __post_init__(self):
        alpha = _exact_alpha(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if alpha <= 1:
            raise DomainError(f"alpha out of range: ExpBase needs alpha > 1, got {mp.nstr(alpha, 15)}")
        with mp.workdps(_ALPHA_DIGITS):
            upper = mp.exp(1 / mp.e)
            # Tolerate the boundary value typed with limited digits.
            slack = mp.mpf(10) ** -12
        if alpha > upper + slack and not self.permissive:
            raise DomainError(
                f"alpha out of range: ExpBase needs 1 < alpha < e^(1/e) ~ 1.444667861, got {mp.nstr(alpha, 15)}"
            )

    @property
    def log_alpha(self):
        return mp.log(self.alpha)


@dataclass(frozen=True)
class Affine(MapSpec):
    """``f(xi) = alpha*xi`` -- multiplication, ``alpha ^^0 xi``."""

    alpha: mp.mpf
    family: str = field(default="Affine", init=False)

    def __post_init__(self):
        alpha = _exact_alpha(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if alpha <= 1:
            raise DomainError(f"alpha out of range: Affine needs alpha > 1, got {mp.nstr(alpha, 15)}")


@dataclass(frozen=True, eq=False)
class HyperStep(MapSpec):
    """``F(xi) = alpha ^^level xi`` backed by a completed tower.

    ``tower`` must provide ``evaluate(z)`` and ``derivative(z)`` returning
    mpmath numbers, and ``alpha``/``level`` attributes.
    """

    level: int
    tower: object
    family: str = field(default="HyperStep", init=False)

    @property
    def alpha(self):
        return self.tower.alpha


@dataclass(frozen=True)
class FixedPointData:
    """Attracting fixed point ``beta`` with multiplier ``phi'(beta)``."""

    beta: object
    multiplier: object
    residual: object


@dataclass(frozen=True)
class Orbit:
    """Natural iterates ``phi^n(start)`` for ``n = 1, 2, ...``."""

    start: object
    values: tuple
    converged_at: Optional[int]
    limit: FixedPointData
    digits: int


def map_eval(m: MapSpec, xi, ctx: PrecisionContext = PrecisionContext()):
    """Evaluate ``phi(xi)``."""
    if isinstance(m, ExpBase):
        with mp.workdps(check_digits(ctx.working)):
            return ensure_finite(mp.power(m.alpha, xi))
    if isinstance(m, Affine):
        with mp.workdps(check_digits(ctx.working)):
            return m.alpha * xi
    if isinstance(m, HyperStep):
        re = xi.real if isinstance(xi, mp.mpc) else xi
        if re <= 0:
            raise DomainError("HyperStep maps are defined for Re(xi) > 0 only")
        return m.tower.evaluate(xi)
    raise DomainError(f"unknown map family {m!r}")


def map_derivative(m: MapSpec, xi, ctx: PrecisionContext = PrecisionContext()):
    """``phi'(xi)``: analytic for ExpBase/Affine, delegated to the tower otherwise."""
    if isinstance(m, ExpBase):
        with mp.workdps(check_digits(ctx.working)):
            return mp.log(m.alpha) * mp.power(m.alpha, xi)
    if isinstance(m, Affine):
        return m.alpha
    if isinstance(m, HyperStep):
        return m.tower.derivative(xi)
    raise DomainError(f"unknown map family {m!r}")


def map_inverse(m: MapSpec, y, ctx: PrecisionContext = PrecisionContext(), seed=None, tol=None):
    """Branch of ``phi^{-1}(y)`` continuous with the real orbit.

    ExpBase uses the principal logarithm; HyperStep solves ``F(x) = y`` by
    damped Newton from ``seed``.
    """
    if isinstance(m, ExpBase):
        with mp.workdps(check_digits(ctx.working)):
            return mp.log(y) / mp.log(m.alpha)
    if isinstance(m, Affine):
        with mp.workdps(check_digits(ctx.working)):
            return y / m.alpha
    if isinstance(m, HyperStep):
        return _newton_inverse(m, y, ctx, seed, tol)
    raise DomainError(f"unknown map family {m!r}")


def map_inverse_with_derivative(m: MapSpec, y, ctx: PrecisionContext = PrecisionContext(), seed=None, tol=None):
    """``(x, phi'(x))`` with ``phi(x) = y`` on the branch of :func:`map_inverse`."""
    if isinstance(m, ExpBase):
        with mp.workdps(check_digits(ctx.working)):
            log_alpha = mp.log(m.alpha)
            return mp.log(y) / log_alpha, log_alpha * y
    if isinstance(m, Affine):
        with mp.workdps(check_digits(ctx.working)):
            return y / m.alpha, m.alpha
    if isinstance(m, HyperStep):
        return _newton_inverse(m, y, ctx, seed, tol, with_derivative=True)
    raise DomainError(f"unknown map family {m!r}")


def _value_and_slope(m, x, ctx):
    both = getattr(m.tower, "evaluate_with_derivative", None)
    if both is not None:
        return both(x)
    return map_eval(m, x, ctx), map_derivative(m, x, ctx)


def _newton_inverse(m, y, ctx, seed, tol, max_iter=60, with_derivative=False):
    tol = mp.mpf(10) ** (-ctx.working) if tol is None else mp.mpf(tol)
    x = y if seed is None else seed
    with mp.workdps(ctx.working + 5):
        fx, slope = _value_and_slope(m, x, ctx)
        resid = fx - y
        for _ in range(max_iter):
            if abs(resid) <= tol:
                return (x, slope) if with_derivative else x
            step = resid / slope
            damping = mp.mpf(1)
            for _ in range(30):
                candidate = x - damping * step
                re = candidate.real if isinstance(candidate, mp.mpc) else candidate
                if re > 0:
                    f_new, s_new = _value_and_slope(m, candidate, ctx)
                    new_resid = f_new - y
                    if abs(new_resid) < abs(resid) or damping < mp.mpf(2) ** -20:
                        break
                damping /= 2
            else:
                raise NoConvergence("damped Newton inverse could not reduce the residual")
            x, resid, slope = candidate, new_resid, s_new
    raise NoConvergence(f"inverse of {m.family} did not converge; last residual {mp.nstr(abs(resid), 5)}")


def _check_multiplier(lam, level=None):
    lam_re = lam.real if isinstance(lam, mp.mpc) else lam
    if not (MULTIPLIER_TOL < lam_re < 1 - MULTIPLIER_TOL):
        where = f" at level {level}" if level is not None else ""
        raise DegenerateMultiplier(
            f"fixed-point multiplier {mp.nstr(lam_re, 12)}{where} is outside ({MULTIPLIER_TOL}, 1-{MULTIPLIER_TOL}); "
            "the degenerate cases F'(omega) in {0, 1} are only reachable through the density/limit argument, "
            "which is not computed",
            multiplier=lam_re,
            level=level,
        )


def find_fixed_point(m: MapSpec, ctx: PrecisionContext = PrecisionContext(), check: bool = True) -> FixedPointData:
    """Real attracting fixed point of ``m`` on ``(1, e]`` and its multiplier.

    Bracketed Newton on ``g(b) = phi(b) - b`` with bisection fallback.  With
    ``check`` the multiplier must lie strictly inside ``(1e-6, 1 - 1e-6)``.
    """
    if isinstance(m, Affine):
        raise DegenerateMultiplier(
            "Affine maps have the repelling fixed point 0 (multiplier alpha > 1)", multiplier=m.alpha
        )
    digits = check_digits(ctx.working + 5)
    with mp.workdps(digits):
        if isinstance(m, ExpBase):
            lo, hi = mp.mpf(1), +mp.e
            guess = 1 + (mp.e - 1) * mp.e * mp.log(m.alpha)
        else:
            lo, hi = mp.mpf(m.alpha), +mp.e
            guess = (lo + hi) / 2
        g = lambda b: map_eval(m, b, ctx) - b
        g_lo, g_hi = g(lo), g(hi)
        if g_hi >= 0:
            # No sign change: only the boundary base e^(1/e) (double root at e).
            beta = hi
        else:
            beta = _bracketed_newton(m, g, lo, hi, g_lo, guess, ctx)
        residual = abs(map_eval(m, beta, ctx) - beta)
        if isinstance(m, ExpBase):
            lam = mp.log(beta)
        else:
            lam = map_derivative(m, beta, ctx)
            lam = lam.real if isinstance(lam, mp.mpc) else lam
    fp = FixedPointData(beta=beta, multiplier=lam, residual=residual)
    if check:
        _check_multiplier(lam, getattr(m, "level", None))
    return fp


def _bracketed_newton(m, g, lo, hi, g_lo, guess, ctx, max_iter=400):
    tol = mp.mpf(10) ** (-(ctx.working + 3))
    x = guess if lo < guess < hi else (lo + hi) / 2
    for _ in range(max_iter):
        gx = g(x)
        if gx == 0:
            return x
        if (gx > 0) == (g_lo > 0):
            lo, g_lo = x, gx
        else:
            hi = x
        slope = map_derivative(m, x, ctx)
        slope = slope.real if isinstance(slope, mp.mpc) else slope
        slope -= 1
        step_ok = slope != 0
        if step_ok:
            step = gx / slope
            if abs(step) < tol * max(1, abs(x)):
                return x - step
            candidate = x - step
            step_ok = lo < candidate < hi
        new_x = candidate if step_ok else (lo + hi) / 2
        if abs(new_x - x) < tol * max(1, abs(x)) or hi - lo < tol:
            return new_x
        x = new_x
    raise NoConvergence("fixed-point solver exhausted its iteration budget")


def iterate_map(m: MapSpec, xi, ctx: PrecisionContext = PrecisionContext()) -> Iterator:
    """Yield ``phi(xi), phi(phi(xi)), ...`` raising BasinEscape on divergence."""
    value = xi
    while True:
        value = map_eval(m, value, ctx)
        if abs(value) > DIVERGENCE_BOUND:
            raise BasinEscape(
                f"orbit of {mp.nstr(xi, 10)} exceeded |xi| > 1e6; start point is numerically outside the basin"
            )
        yield value


def orbit(
    m: MapSpec,
    xi,
    fp: FixedPointData,
    max_n: int,
    orbit_tol,
    ctx: PrecisionContext = PrecisionContext(),
) -> Orbit:
    """Iterate ``m`` from ``xi`` until within ``orbit_tol`` of ``fp.beta`` or ``max_n`` steps."""
    if max_n < 1:
        raise DomainError("max_n must be >= 1")
    with mp.workdps(check_digits(ctx.working)):
        xi = xcomplex(xi) if not isinstance(xi, (mp.mpf, mp.mpc)) else xi
        values = []
        converged_at = None
        for k, value in enumerate(iterate_map(m, xi, ctx)):
            values.append(value)
            if abs(value - fp.beta) < orbit_tol:
                converged_at = k
                break
            if k + 1 >= max_n:
                break
    return Orbit(start=xi, values=tuple(values), converged_at=converged_at, limit=fp, digits=ctx.working)
