r"""The auxiliary entire function built from natural iterates.

.. math::

    \vartheta(w, \xi) = \sum_{k \ge 0} \phi^{\circ (k+1)}(\xi) \frac{w^k}{k!}

Coefficients are stored up to index ``K - 1`` and padded with the limit
``beta`` beyond.  Evaluation uses the exact split

.. math::

    \vartheta(w) = \beta e^{w} + \sum_{k<K} (a_k - \beta) \frac{w^k}{k!},

so the padded tail is summed in closed form and only the deviations need the
alternating-series treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import mpmath as mp

from .dynamics import Affine, FixedPointData, Orbit
from .errors import DomainError, NonIntegrable, NotConverged, PrecisionExhausted
from .numerics import LOG10_E, PrecisionContext, binomial_alternating_sum, check_digits


@dataclass(frozen=True)
class ThetaSource:
    """Where a series came from; ``xi`` is the start point when known."""

    kind: str
    map: object = None
    xi: object = None
    shift: int = 0
    level: Optional[int] = None


@dataclass(frozen=True)
class RayAngle:
    """Rotation of the integration ray, ``|theta| < pi/2``."""

    theta: float = 0.0

    def __post_init__(self):
        if not abs(self.theta) < math.pi / 2:
            raise DomainError(f"ray angle must satisfy |theta| < pi/2, got {self.theta}")


@dataclass(frozen=True, eq=False)
class ThetaSeries:
    """Taylor data of the auxiliary function.

    ``coeff_digits`` is the number of decimal digits the coefficients are
    known to (``None`` for exactly represented closed forms).  When ``growth``
    is set the series is the closed form ``coeffs[0] * exp(growth * w)``.
    """

    coeffs: tuple
    K: int
    limit: object
    decay_rate: Optional[float] = None
    source: ThetaSource = ThetaSource("explicit")
    coeff_digits: Optional[int] = None
    growth: object = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.K < 1 or len(self.coeffs) != self.K:
            raise DomainError("ThetaSeries needs K == len(coeffs) >= 1")
        for c in self.coeffs:
            if not mp.isfinite(c):
                raise DomainError("ThetaSeries coefficients must be finite")

    def coefficient(self, k: int):
        """``a_k`` including the padded or closed-form continuation."""
        if k < self.K:
            return self.coeffs[k]
        if self.growth is not None:
            with mp.workdps(250):
                return self.coeffs[0] * mp.power(self.growth, k)
        return self.limit

    @property
    def deviations(self):
        d = self._cache.get("deviations")
        if d is None:
            with mp.workdps(self.coeff_digits or 50):
                d = tuple(c - self.limit for c in self.coeffs)
            self._cache["deviations"] = d
        return d

    @property
    def suffix_bounds(self):
        """``max_{j >= k} |a_j - beta|`` for ``k = 0..K`` (last entry 0)."""
        s = self._cache.get("suffix")
        if s is None:
            with mp.workdps(20):
                out = [mp.mpf(0)] * (self.K + 1)
                running = mp.mpf(0)
                for k in range(self.K - 1, -1, -1):
                    running = max(running, abs(self.deviations[k]))
                    out[k] = running
            s = tuple(out)
            self._cache["suffix"] = s
        return s

    @property
    def max_abs_coeff(self):
        if self.growth is not None:
            raise DomainError("closed-form growth series has unbounded coefficients")
        m = self._cache.get("maxabs")
        if m is None:
            with mp.workdps(20):
                m = max([abs(c) for c in self.coeffs] + [abs(self.limit)])
            self._cache["maxabs"] = m
        return m


def theta_from_coefficients(coeffs, limit, digits=None, source=ThetaSource("explicit")) -> ThetaSeries:
    coeffs = tuple(coeffs)
    return ThetaSeries(coeffs=coeffs, K=len(coeffs), limit=limit, source=source, coeff_digits=digits)


def constant_theta(c, K: int = 8) -> ThetaSeries:
    """Series with every coefficient equal to ``c``: ``c * exp(w)``."""
    c = mp.mpmathify(c)
    return ThetaSeries(coeffs=(c,) * K, K=K, limit=c, source=ThetaSource("constant", xi=c))


def affine_theta(m: Affine, xi=1, K: int = 8) -> ThetaSeries:
    """Closed form for ``xi -> alpha*xi``: ``alpha*xi*exp(alpha*w)``.

    The coefficients ``alpha**(k+1) * xi`` diverge, so no orbit machinery is
    involved; ``coefficient(k)`` reproduces them exactly.
    """
    if not isinstance(m, Affine):
        raise DomainError("affine_theta needs an Affine map")
    with mp.workdps(250):
        xi = mp.mpmathify(xi)
        coeffs = [m.alpha * xi]
        for _ in range(K - 1):
            coeffs.append(coeffs[-1] * m.alpha)
    return ThetaSeries(
        coeffs=tuple(coeffs),
        K=K,
        limit=mp.inf,
        source=ThetaSource("affine", map=m, xi=xi),
        growth=m.alpha,
    )


def build_theta(orb: Orbit, fp: FixedPointData, K_min: int = 8, tail_tol=None, ctx=PrecisionContext()) -> ThetaSeries:
    """Series from an orbit, truncated once ``|a_K - beta| < tail_tol``.

    Coefficients from index ``K`` on are taken to equal ``beta``.
    """
    if tail_tol is None:
        tail_tol = mp.mpf(10) ** (-ctx.working)
    K_min = max(8, int(K_min))
    K = None
    for k, v in enumerate(orb.values):
        if k >= K_min - 1 and abs(v - fp.beta) < tail_tol:
            K = k + 1
            break
    if K is None:
        raise NotConverged(
            f"orbit of length {len(orb.values)} never came within {mp.nstr(tail_tol, 3)} of beta with K >= {K_min}"
        )
    return ThetaSeries(
        coeffs=tuple(orb.values[:K]),
        K=K,
        limit=fp.beta,
        source=ThetaSource("orbit", xi=orb.start),
        coeff_digits=orb.digits,
    )


def _neg_digits(ts: ThetaSeries, t, ctx: PrecisionContext) -> int:
    digits = ctx.working + int(math.ceil(LOG10_E * float(t))) + 2
    if ts.coeff_digits is not None and digits > ts.coeff_digits + ctx.guard_digits:
        raise PrecisionExhausted(
            f"theta(-{float(t):.4g}) needs {digits} digits but coefficients carry {ts.coeff_digits}"
        )
    return check_digits(digits)


def theta_eval_neg(ts: ThetaSeries, t, ctx: PrecisionContext = PrecisionContext()):
    """``theta(-t)`` for real ``t >= 0`` with absolute error below ``10**-digits``.

    The working precision is raised by ``ceil(t log10 e)`` digits to absorb the
    cancellation of the alternating sum.
    """
    if t < 0:
        raise DomainError("theta_eval_neg needs t >= 0")
    if ts.growth is not None:
        with mp.workdps(ctx.working):
            return ts.coeffs[0] * mp.exp(-ts.growth * t)
    digits = _neg_digits(ts, t, ctx)
    with mp.workdps(digits):
        t = mp.mpf(t)
        eps = mp.mpf(10) ** (-(ctx.working + 2))
        total = ts.limit * mp.exp(-t)
        d, bound = ts.deviations, ts.suffix_bounds
        term = mp.mpf(1)
        for k in range(ts.K):
            if d[k]:
                total += d[k] * term
            term = term * (-t) / (k + 1)
            if k + 2 > 2 * t and bound[k + 1] * abs(term) * 2 < eps:
                break
    with mp.workdps(ctx.working):
        return +total


def theta_eval(ts: ThetaSeries, w, ctx: PrecisionContext = PrecisionContext()):
    """``theta(w)`` anywhere in the plane.

    The truncation rule uses the rigorous bound ``M_k |w|^k / k! * 2`` with
    ``M_k`` the largest remaining coefficient deviation.
    """
    w = mp.mpmathify(w)
    if ts.growth is not None:
        with mp.workdps(ctx.working):
            return ts.coeffs[0] * mp.exp(ts.growth * w)
    r = abs(w)
    digits = _neg_digits(ts, r, ctx)
    with mp.workdps(digits):
        eps = mp.mpf(10) ** (-(ctx.working + 2))
        total = ts.limit * mp.exp(w)
        d, bound = ts.deviations, ts.suffix_bounds
        term = mp.mpf(1)
        for k in range(ts.K):
            if d[k]:
                total += d[k] * term
            term = term * w / (k + 1)
            if k + 2 > 2 * r and bound[k + 1] * abs(term) * 2 < eps:
                break
    with mp.workdps(ctx.working):
        return +total


def theta_eval_neg_difference(ts: ThetaSeries, t, ctx: PrecisionContext = PrecisionContext(), n_max=None):
    """Cross-check of :func:`theta_eval_neg` via the difference transform.

    ``theta(-t) = exp(-t) sum_n b_n t^n / n!`` with
    ``b_n = sum_k C(n,k) (-1)^k a_k``.  Each ``b_n`` cancels on its own, so this
    is a slow independent route, not the production evaluator.
    """
    t = mp.mpf(t)
    if n_max is None:
        n_max = int(3 * float(t) + 60)
    a = [ts.coefficient(k) for k in range(n_max + 1)]
    digits = _neg_digits(ts, 0, ctx)
    with mp.workdps(digits):
        eps = mp.mpf(10) ** (-(ctx.working + 2))
        total = mp.mpf(0)
        weight = mp.mpf(1)
        small = 0
        for n in range(n_max + 1):
            b = binomial_alternating_sum(a, n, PrecisionContext(digits, ctx.guard_digits))
            term = b * weight
            total += term
            weight = weight * t / (n + 1)
            small = small + 1 if (n > t and abs(term) < eps) else 0
            if small >= 4:
                break
        total *= mp.exp(-t)
    with mp.workdps(ctx.working):
        return +total


class DecayScan(NamedTuple):
    """Outcome of :func:`decay_scan`.

    ``amplitude * exp(-decay_rate * t)`` bounds the sampled ``|theta(-t)|`` on
    the accepted window.
    """

    W_max: float
    decay_rate: float
    amplitude: float
    warning: Optional[str]


def _window_ok(ts, W, tol, ctx, samples):
    values = []
    for i in range(samples):
        t = W * (1 + mp.mpf(i) / (samples - 1))
        v = abs(theta_eval_neg(ts, t, ctx))
        values.append((t, v))
        if v * (1 + t) >= tol:
            return False, values
    return True, values


def decay_scan(
    ts: ThetaSeries,
    tol,
    ctx: PrecisionContext = PrecisionContext(),
    ceiling: float = 400.0,
    start: float = 4.0,
    predicted_rate=None,
    samples: int = 9,
    refine_steps: int = 5,
) -> DecayScan:
    """Find where ``|theta(-t)| (1 + t)`` stays below ``tol`` and fit its decay.

    ``W`` runs over the doubling grid ``start * 2**j`` (closed off by the
    ceiling itself); the window ``[W, 2W]``
    is sampled at ``samples`` points.  The first accepted ``W`` is refined by
    bisection against the previous grid point.  ``PrecisionExhausted`` from the
    evaluator propagates so that callers can rebuild with more digits.  The decay rate is a least
    squares fit of ``log|theta(-t)|`` over the accepted window and is compared
    with ``predicted_rate`` when given.
    """
    tol = mp.mpf(tol)
    W = mp.mpf(start)
    prev = None
    accepted = None
    ceiling = mp.mpf(ceiling)
    while True:
        if W > ceiling:
            # Last chance: the ceiling itself, if the grid stepped over it.
            if prev is not None and prev < ceiling:
                W = ceiling
            else:
                break
        ok, values = _window_ok(ts, W, tol, ctx, samples)
        if ok:
            accepted = (W, values)
            break
        if W == ceiling:
            break
        prev = W
        W *= 2
    if accepted is None:
        raise NonIntegrable(f"|theta(-t)|(1+t) < {mp.nstr(tol, 3)} not reached for any W <= {ceiling}")
    if prev is not None:
        lo, hi = prev, accepted[0]
        for _ in range(refine_steps):
            mid = (lo + hi) / 2
            ok, values = _window_ok(ts, mid, tol, ctx, samples)
            if ok:
                hi, accepted = mid, (mid, values)
            else:
                lo = mid
    W, values = accepted
    if len(values) < samples:
        _, values = _window_ok(ts, W, mp.inf, ctx, samples)
    rate, amplitude = _fit_decay(values)
    if rate <= 0:
        raise NonIntegrable(f"fitted decay rate {rate:.4g} is not positive")
    warning = None
    if predicted_rate is not None:
        lam = float(predicted_rate)
        if abs(rate - lam) > 0.5 * lam:
            warning = f"fitted decay rate {rate:.4g} differs from the predicted mode {lam:.4g} by more than 50%"
    return DecayScan(float(W), rate, amplitude, warning)


def _fit_decay(values):
    pts = [(float(t), float(mp.log(v))) for t, v in values if v > 0]
    if len(pts) < 2:
        return float("inf"), 0.0
    n = len(pts)
    mt = sum(p[0] for p in pts) / n
    ml = sum(p[1] for p in pts) / n
    var = sum((p[0] - mt) ** 2 for p in pts)
    slope = sum((p[0] - mt) * (p[1] - ml) for p in pts) / var
    rate = -slope
    # Envelope amplitude so that amplitude*exp(-rate*t) dominates every sample.
    amplitude = max(math.exp(l + rate * t) for t, l in pts)
    return rate, amplitude


def with_decay(ts: ThetaSeries, scan: DecayScan) -> ThetaSeries:
    """Copy of ``ts`` carrying the fitted decay rate."""
    return replace(ts, decay_rate=scan.decay_rate, _cache=ts._cache)
