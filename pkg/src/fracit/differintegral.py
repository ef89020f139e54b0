r"""Analytically continued differintegral at zero of an auxiliary series.

For a series with coefficients ``a_k`` the value at height ``z`` is

.. math::

    F(z) = \frac{1}{\Gamma(1-z)} \Big( \sum_k \frac{a_k (-1)^k}{k!\,(k+1-z)}
           + \int_1^\infty \vartheta(-w)\, w^{-z}\, dw \Big),

which interpolates ``F(m) = a_{m-1}`` at the positive integers.  Callers pass
the differintegral order ``z_order = z - 1`` to :func:`differintegral_at_zero`;
the helpers :func:`series_part` and :func:`integral_part` take the height ``z``.

The integral uses a quadrature plan that is built once per series and reused
for every ``z``.  Keeping the node set independent of ``z`` makes the
evaluator a single analytic function of ``z`` (up to rounding), which the
hyper-operator tower relies on when it iterates one level to build the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import mpmath as mp

from .errors import DomainError, NearIntegerPole, NonIntegrable, PrecisionExhausted, QuadratureStall
from .numerics import PrecisionContext, gauss_legendre, reciprocal_gamma
from .theta import RayAngle, ThetaSeries, decay_scan, theta_eval, theta_eval_neg


@dataclass(frozen=True)
class EvalConfig:
    """Knobs for one differintegral evaluation.

    ``gamma_headroom`` is the largest ``|1/Gamma(1-z)|`` the quadrature plan
    is sized for; larger factors are handled by per-call refinement when
    ``refine`` is true and otherwise show up in the error estimate.
    ``W_max_factor`` stretches the integration range beyond the decay scan's
    answer (used by the robustness checks).  ``shift`` and ``shift_max`` only
    concern :mod:`fracit.iteration`; ``shift_max`` is the shift budget for a
    multiplier of 1/2 and grows like ``1/|ln lambda|`` for weaker ones.
    """

    ctx: PrecisionContext = PrecisionContext()
    tol: float = 1e-10
    series_terms_max: int = 4000
    W_max_ceiling: float = 400.0
    panel_order: int = 24
    integer_guard: float = 1e-6
    ray: RayAngle = RayAngle()
    max_panels: int = 4000
    W_max_factor: float = 1.0
    gamma_headroom: float = 10.0
    refine: bool = True
    shift: Optional[int] = None
    shift_max: int = 40

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.tol < 10.0 ** (-self.ctx.decimal_digits + 5):
            raise DomainError(
                f"tol={self.tol:g} is below 10^(-digits+5) for digits={self.ctx.decimal_digits}; raise the precision"
            )
        if not 0 < self.integer_guard <= 0.01:
            raise DomainError("integer_guard must lie in (0, 0.01]")
        if self.panel_order < 4 or self.panel_order % 2:
            raise DomainError("panel_order must be an even integer >= 4")
        if self.series_terms_max < 16:
            raise DomainError("series_terms_max must be >= 16")
        if self.W_max_factor < 1:
            raise DomainError("W_max_factor must be >= 1")
        if self.gamma_headroom < 1:
            raise DomainError("gamma_headroom must be >= 1")

    def with_(self, **changes) -> "EvalConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class DifferintegralResult:
    """One evaluation; ``series_part`` and ``integral_part`` are ``None`` on
    the near-integer path, which never forms them."""

    value: object
    series_part: object
    integral_part: object
    error_estimate: float
    W_max_used: float
    terms_used: int
    path: str


# ---------------------------------------------------------------------------
# series part


def _series_terms(ts: ThetaSeries, cfg: EvalConfig, z) -> int:
    """Number of terms so that the tail is below ``10**-(working+2)``."""
    eps = mp.mpf(10) ** (-(cfg.ctx.working + 2))
    if ts.growth is not None:
        A, g = abs(ts.coeffs[0]), abs(ts.growth)
    else:
        A, g = ts.max_abs_coeff, mp.mpf(1)
    re = float(z.real if isinstance(z, mp.mpc) else z)
    n = 1
    term = A * g  # A g^n / n!
    while not (n > 2 * g and 2 * term < eps):
        n += 1
        term = term * g / n
        if n > cfg.series_terms_max:
            raise PrecisionExhausted(f"series part needs more than series_terms_max={cfg.series_terms_max} terms")
    n = max(n, ts.K if ts.growth is None else 0, int(math.ceil(re)) + 2)
    if n > cfg.series_terms_max:
        raise PrecisionExhausted(f"series part needs more than series_terms_max={cfg.series_terms_max} terms")
    return n


def _series_weights(ts: ThetaSeries, n: int, cfg: EvalConfig):
    """``a_k (-1)^k e^{ik theta} / k!`` for ``k < n``, cached on the series."""
    key = ("series", n, cfg.ctx.working, cfg.ray.theta)
    b = ts._cache.get(key)
    if b is None:
        with mp.workdps(cfg.ctx.working + 5):
            rot = mp.expj(cfg.ray.theta) if cfg.ray.theta else None
            out, fac = [], mp.mpf(1)
            for k in range(n):
                if k:
                    fac = fac * (-1) / k
                    if rot is not None:
                        fac = fac * rot
                out.append(ts.coefficient(k) * fac)
        b = tuple(out)
        ts._cache[key] = b
    return b


def _series_tail_bound(ts: ThetaSeries, n: int, z):
    re = z.real if isinstance(z, mp.mpc) else z
    dist = max(mp.mpf(1), n + 1 - re)
    with mp.workdps(20):
        if ts.growth is not None:
            A, g = abs(ts.coeffs[0]), abs(ts.growth)
        else:
            A, g = ts.max_abs_coeff, 1
        return 2 * A * mp.power(g, n) / mp.factorial(n) / dist


def _series_sum(ts, z, cfg, derivative=False):
    n = _series_terms(ts, cfg, z)
    b = _series_weights(ts, n, cfg)
    with mp.workdps(cfg.ctx.working + 5):
        s = mp.mpf(0)
        ds = mp.mpf(0)
        for k in range(n):
            r = 1 / (k + 1 - z)
            s += b[k] * r
            if derivative:
                ds += b[k] * r * r
    return s, ds, n, _series_tail_bound(ts, n, z)


def series_part(ts: ThetaSeries, z, cfg: EvalConfig = EvalConfig()):
    """``sum_k a_k (-1)^k / (k! (k+1-z))`` at height ``z``.

    Raises :class:`NearIntegerPole` when ``z`` is within ``integer_guard`` of
    a pole ``k + 1``.
    """
    z = mp.mpmathify(z)
    re = z.real if isinstance(z, mp.mpc) else z
    m = int(mp.nint(re))
    if m >= 1 and abs(z - m) <= cfg.integer_guard:
        raise NearIntegerPole(f"z={mp.nstr(z, 10)} is within {cfg.integer_guard} of the pole at {m}")
    s, _, _, _ = _series_sum(ts, z, cfg)
    with mp.workdps(cfg.ctx.working):
        return +s


# ---------------------------------------------------------------------------
# integral part


class _Panel:
    __slots__ = ("a", "b", "hi_c", "hi_l", "lo_c", "lo_l", "abs_mass")

    def __init__(self, a, b, hi, lo):
        self.a, self.b = a, b
        self.hi_c, self.hi_l = hi
        self.lo_c, self.lo_l = lo
        with mp.workdps(15):
            self.abs_mass = mp.fsum(abs(c) for c in self.hi_c)


class QuadraturePlan:
    """Panels on ``[lower, W]`` with cached ``weight * theta(-w)`` and ``ln w``.

    Every panel carries a Gauss-Legendre rule of order ``p`` and one of order
    ``p/2``; their disagreement is the per-panel error estimate.
    """

    def __init__(self, ts: ThetaSeries, lower, W, cfg: EvalConfig, rate: float, target):
        self.ts = ts
        self.cfg = cfg
        self.lower = mp.mpf(lower)
        self.W = mp.mpf(W)
        self.rate = float(rate)
        self.target = mp.mpf(target)
        self.digits = cfg.ctx.working
        self.theta_ctx = PrecisionContext(cfg.ctx.decimal_digits, cfg.ctx.guard_digits)
        self._hi = gauss_legendre(cfg.panel_order, self.digits)
        self._lo = gauss_legendre(cfg.panel_order // 2, self.digits)
        with mp.workdps(self.digits):
            self._rot = mp.expj(cfg.ray.theta) if cfg.ray.theta else None
            self.tail_amplitude = abs(self._theta(self.W))
        self.panels = [self._make(a, b) for a, b in self._initial_breaks()]

    # -- construction -----------------------------------------------------
    def _initial_breaks(self):
        # Geometric grading away from the branch point of w^{-z} at 0, then
        # uniform panels no wider than 8.
        breaks = [self.lower]
        x = self.lower if self.lower > 0 else mp.mpf(1)
        if self.lower == 0:
            breaks.append(x)
        while breaks[-1] < self.W:
            step = min(breaks[-1] if breaks[-1] > 0 else 1, mp.mpf(8))
            breaks.append(min(self.W, breaks[-1] + step))
        return list(zip(breaks[:-1], breaks[1:]))

    def _theta(self, w):
        if self._rot is None:
            return theta_eval_neg(self.ts, w, self.theta_ctx)
        return theta_eval(self.ts, -self._rot * w, self.theta_ctx)

    def _rule(self, a, b, rule):
        nodes, weights = rule
        with mp.workdps(self.digits):
            half, mid = (b - a) / 2, (b + a) / 2
            cs, ls = [], []
            for x, wt in zip(nodes, weights):
                w = mid + half * x
                cs.append(half * wt * self._theta(w))
                ls.append(mp.log(w) if w > 0 else mp.mpf(0))
        return tuple(cs), tuple(ls)

    def _make(self, a, b):
        return _Panel(a, b, self._rule(a, b, self._hi), self._rule(a, b, self._lo))

    def refine(self, probes, target):
        """Split panels until every probe meets ``target`` (absolute, on the integral)."""
        span = self.W - self.lower
        while True:
            bad = []
            for i, p in enumerate(self.panels):
                share = target * (p.b - p.a) / span
                err = max(abs(e) for e in (self._panel_error(p, z) for z in probes))
                if err > share:
                    bad.append(i)
            if not bad:
                return
            if len(self.panels) + len(bad) > self.cfg.max_panels:
                raise QuadratureStall(
                    f"quadrature needs more than max_panels={self.cfg.max_panels} panels to reach {mp.nstr(target, 3)}"
                )
            new = []
            bad_set = set(bad)
            for i, p in enumerate(self.panels):
                if i in bad_set:
                    mid = (p.a + p.b) / 2
                    new.append(self._make(p.a, mid))
                    new.append(self._make(mid, p.b))
                else:
                    new.append(p)
            self.panels = new

    # -- evaluation -------------------------------------------------------
    def _powers(self, ls, z):
        return [mp.exp(-z * l) for l in ls]

    def _panel_sums(self, p, z):
        hi = mp.fdot(p.hi_c, self._powers(p.hi_l, z))
        lo = mp.fdot(p.lo_c, self._powers(p.lo_l, z))
        return hi, lo

    def _panel_error(self, p, z):
        with mp.workdps(self.digits):
            hi, lo = self._panel_sums(p, z)
            return hi - lo

    def integrate(self, z, derivative=False):
        """``(I(z), I'(z), error)`` over the planned range."""
        with mp.workdps(self.digits):
            total = mp.mpf(0)
            dtotal = mp.mpf(0)
            err = mp.mpf(0)
            for p in self.panels:
                pw = self._powers(p.hi_l, z)
                hi = mp.fdot(p.hi_c, pw)
                lo = mp.fdot(p.lo_c, self._powers(p.lo_l, z))
                total += hi
                err += abs(hi - lo)
                if derivative:
                    dtotal -= mp.fdot(p.hi_c, [q * l for q, l in zip(pw, p.hi_l)])
        return total, dtotal, err

    def tail_bound(self, z):
        re = z.real if isinstance(z, mp.mpc) else z
        with mp.workdps(15):
            return self.tail_amplitude * mp.power(self.W, -re) / self.rate

    @property
    def abs_mass(self):
        return sum(p.abs_mass for p in self.panels)

    @property
    def node_count(self):
        return sum(len(p.hi_c) + len(p.lo_c) for p in self.panels)


_PROBES = (mp.mpf("0.25"), mp.mpf(1), mp.mpf(3), mp.mpc("0.5", "1"))


def build_plan(ts: ThetaSeries, cfg: EvalConfig, W=None, rate=None, lower=1) -> QuadraturePlan:
    """Decay scan (unless ``W`` is given) followed by probe-driven panel refinement."""
    tol = mp.mpf(cfg.tol)
    target = tol / (8 * mp.mpf(cfg.gamma_headroom))
    if W is None or rate is None:
        scan = decay_scan(ts, target, cfg.ctx, ceiling=cfg.W_max_ceiling, predicted_rate=ts.decay_rate)
        W = scan.W_max if W is None else W
        rate = scan.decay_rate if rate is None else rate
    W = mp.mpf(W) * mp.mpf(cfg.W_max_factor)
    if W <= lower:
        W = mp.mpf(lower) + 1
    plan = QuadraturePlan(ts, lower, W, cfg, rate, target)
    plan.refine(_PROBES, target)
    return plan


def plan_for(ts: ThetaSeries, cfg: EvalConfig) -> QuadraturePlan:
    """Cached plan for ``(ts, cfg)``."""
    key = ("plan", cfg)
    plan = ts._cache.get(key)
    if plan is None:
        plan = build_plan(ts, cfg)
        ts._cache[key] = plan
    return plan


def integral_part(ts: ThetaSeries, z, cfg: EvalConfig = EvalConfig(), plan: Optional[QuadraturePlan] = None):
    """``int_1^W theta(-w) w^{-z} dw`` at height ``z`` on the cached plan."""
    plan = plan or plan_for(ts, cfg)
    z = mp.mpmathify(z)
    value, _, _ = plan.integrate(z)
    with mp.workdps(cfg.ctx.working):
        return +value


# ---------------------------------------------------------------------------
# full evaluation


def _general(ts, z, cfg, plan, derivative=False):
    """General-path value, optional derivative, and error estimate at height ``z``."""
    with mp.workdps(cfg.ctx.working + 5):
        one_minus = 1 - z
        R = reciprocal_gamma(one_minus, cfg.ctx.raised(5))
        absR = abs(R)
    S, dS, n, s_tail = _series_sum(ts, z, cfg, derivative)
    I, dI, q_err = plan.integrate(z, derivative)
    tail = plan.tail_bound(z)
    budget = mp.mpf(cfg.tol) / (4 * max(mp.mpf(1), absR))
    if cfg.refine and q_err > budget:
        plan.refine([z], budget)
        I, dI, q_err = plan.integrate(z, derivative)
    with mp.workdps(cfg.ctx.working + 5):
        theta = cfg.ray.theta
        pref = R * mp.expj(theta * one_minus) if theta else R
        value = pref * (S + I)
        dvalue = None
        if derivative:
            psi = mp.digamma(one_minus)
            if theta:
                psi = psi - mp.j * theta
            dvalue = pref * (psi * (S + I) + dS + dI)
        rounding = mp.mpf(10) ** (-(cfg.ctx.working - 3)) * (1 + absR * (abs(S) + plan.abs_mass))
        err = absR * (s_tail + q_err + tail) + rounding
    return value, dvalue, S, I, float(err), n


def _near_integer(z, cfg):
    re = z.real if isinstance(z, mp.mpc) else z
    m = int(mp.nint(re))
    if m >= 1 and abs(z - m) <= cfg.integer_guard:
        return m
    return None


def _derivative_at_integer(ts, m, cfg, plan):
    """``F'(m)`` by Richardson-extrapolated symmetric averages of the analytic derivative."""
    h = mp.mpf("1e-4")

    def avg(step):
        _, d1, _, _, e1, _ = _general(ts, m + step, cfg, plan, True)
        _, d2, _, _, e2, _ = _general(ts, m - step, cfg, plan, True)
        return (d1 + d2) / 2, max(e1, e2)

    with mp.workdps(cfg.ctx.working + 5):
        d_h, e_h = avg(h)
        d_2h, _ = avg(2 * h)
        d = (4 * d_h - d_2h) / 3
        # Derivative error: the O(h^4) remainder is gauged by the size of the
        # Richardson correction times h; value noise enters divided by h.
        err = abs(d_h - d_2h) * h + e_h / h
    return d, float(err)


def differintegral_at_zero(
    ts: ThetaSeries, z_order, cfg: EvalConfig = EvalConfig(), plan: Optional[QuadraturePlan] = None
) -> DifferintegralResult:
    """Value at height ``z = z_order + 1`` (``Re z_order > -1``).

    Within ``integer_guard`` of a positive integer ``m`` the stored
    coefficient ``a_{m-1}`` is returned, with a first-order correction when
    ``z`` is not exactly ``m``.  Raises :class:`PrecisionExhausted` if the
    error estimate does not meet ``cfg.tol``.
    """
    res = _evaluate(ts, z_order, cfg, plan, derivative=False)[0]
    return res


def differintegral_with_derivative(
    ts: ThetaSeries, z_order, cfg: EvalConfig = EvalConfig(), plan: Optional[QuadraturePlan] = None
):
    """``(result, dF/dz, derivative_error)`` at height ``z_order + 1``."""
    return _evaluate(ts, z_order, cfg, plan, derivative=True)


def _evaluate(ts, z_order, cfg, plan, derivative):
    z_order = mp.mpmathify(z_order)
    z = z_order + 1
    re = z.real if isinstance(z, mp.mpc) else z
    if not re > 0:
        raise DomainError(f"differintegral needs Re(z_order) > -1, got {mp.nstr(z_order, 10)}")
    m = _near_integer(z, cfg)
    if ts.growth is None and ts.limit == mp.inf:
        raise DomainError("series without a finite limit needs a closed-form growth")
    if m is not None:
        a = ts.coefficient(m - 1)
        offset = z - m
        d = derr = None
        if offset != 0 or derivative:
            plan = plan or plan_for(ts, cfg)
            d, derr = _derivative_at_integer(ts, m, cfg, plan)
        with mp.workdps(cfg.ctx.working):
            value = +(a + offset * d) if offset != 0 else +a
            err = float(abs(offset)) * derr if offset != 0 else 0.0
            err += float(mp.mpf(10) ** (-(cfg.ctx.working - 2)) * max(1, abs(a)))
        result = DifferintegralResult(
            value=value,
            series_part=None,
            integral_part=None,
            error_estimate=err,
            W_max_used=float(plan.W) if plan is not None else 0.0,
            terms_used=m,
            path="near_integer",
        )
        _check(result, cfg)
        return result, d, derr
    plan = plan or plan_for(ts, cfg)
    value, dvalue, S, I, err, n = _general(ts, z, cfg, plan, derivative)
    with mp.workdps(cfg.ctx.working):
        result = DifferintegralResult(
            value=+value,
            series_part=+S,
            integral_part=+I,
            error_estimate=err,
            W_max_used=float(plan.W),
            terms_used=n,
            path="closed_form" if ts.growth is not None else "general",
        )
        dvalue = +dvalue if dvalue is not None else None
    _check(result, cfg)
    return result, dvalue, err


def _check(result, cfg):
    if not result.error_estimate <= cfg.tol:
        raise PrecisionExhausted(
            f"error estimate {result.error_estimate:.3g} exceeds tol={cfg.tol:g} "
            f"(path={result.path}, W={result.W_max_used:.4g})"
        )


# ---------------------------------------------------------------------------
# the z -> 0 identity


def _adaptive_integral(f, a, b, order, tol, digits, max_panels=4000):
    hi_rule = gauss_legendre(order, digits)
    lo_rule = gauss_legendre(order // 2, digits)

    def rule(lo, hi, r):
        nodes, weights = r
        half, mid = (hi - lo) / 2, (hi + lo) / 2
        return half * mp.fsum(wt * f(mid + half * x) for x, wt in zip(nodes, weights))

    with mp.workdps(digits):
        a, b = mp.mpf(a), mp.mpf(b)
        n0 = max(1, int(mp.ceil((b - a) / 4)))
        stack = [(a + (b - a) * i / n0, a + (b - a) * (i + 1) / n0) for i in range(n0)]
        total, err, panels = mp.mpf(0), mp.mpf(0), 0
        while stack:
            lo, hi = stack.pop()
            q_hi, q_lo = rule(lo, hi, hi_rule), rule(lo, hi, lo_rule)
            e = abs(q_hi - q_lo)
            if e <= tol * (hi - lo) / (b - a):
                total += q_hi
                err += e
                panels += 1
            else:
                if panels + len(stack) > max_panels:
                    raise QuadratureStall("zero-limit quadrature exceeded its panel budget")
                mid = (lo + hi) / 2
                stack.extend([(lo, mid), (mid, hi)])
    return total, err


@dataclass(frozen=True)
class ZeroLimitReport:
    residual: float
    integral: object
    W: float
    tail: float
    tail_kind: str
    #: Bound on the error of ``integral`` (quadrature plus tail uncertainty).
    error_estimate: float = 0.0


def zero_limit_report(ts: ThetaSeries, cfg: EvalConfig = EvalConfig(), xi=None, W=None, exact_tail=False) -> ZeroLimitReport:
    """Check ``int_0^inf theta(-w) dw = xi``.

    With ``exact_tail`` the integral beyond ``W`` is ``theta(-W)`` of the
    series whose coefficients are ``(xi, a_0, a_1, ...)``, which is an exact
    antiderivative; any ``W`` works (default 32).  Otherwise ``W`` comes from
    the decay scan and the tail is the fitted exponential model.
    """
    xi = ts.source.xi if xi is None else mp.mpmathify(xi)
    if xi is None:
        raise DomainError("zero_limit_identity needs the start point xi")
    tol = mp.mpf(cfg.tol) / 4
    if exact_tail:
        W = mp.mpf(32 if W is None else W)
        anti = ThetaSeries(
            coeffs=(xi,) + tuple(ts.coeffs),
            K=ts.K + 1,
            limit=ts.limit,
            source=ts.source,
            coeff_digits=ts.coeff_digits,
        )
        with mp.workdps(cfg.ctx.working):
            tail = theta_eval_neg(anti, W, cfg.ctx)
        tail_size = float(abs(tail))
        tail_err = 0.0
        kind = "exact"
    else:
        if W is None:
            scan = decay_scan(ts, tol, cfg.ctx, ceiling=cfg.W_max_ceiling, predicted_rate=ts.decay_rate)
            W, rate = mp.mpf(scan.W_max) * mp.mpf(cfg.W_max_factor), scan.decay_rate
        else:
            W, rate = mp.mpf(W), None
        with mp.workdps(cfg.ctx.working):
            amp = abs(theta_eval_neg(ts, W, cfg.ctx))
        tail = mp.mpf(0)
        tail_size = float(amp / rate) if rate else float(amp)
        tail_err = tail_size
        if tail_size > cfg.tol:
            raise NonIntegrable(f"tail bound {tail_size:.3g} beyond W={float(W):.4g} exceeds tol")
        kind = "model"
    f = lambda w: theta_eval_neg(ts, w, cfg.ctx)
    integral, q_err = _adaptive_integral(f, 0, W, cfg.panel_order, tol, cfg.ctx.working, cfg.max_panels)
    with mp.workdps(cfg.ctx.working):
        total = integral + tail
        residual = abs(total - xi)
        rounding = float(mp.mpf(10) ** (-(cfg.ctx.working - 3)))
    return ZeroLimitReport(float(residual), total, float(W), tail_size, kind, float(q_err) + tail_err + rounding)


def zero_limit_identity(ts: ThetaSeries, cfg: EvalConfig = EvalConfig(), xi=None, W=None, exact_tail=False):
    """``|int_0^inf theta(-w) dw - xi|``; see :func:`zero_limit_report`."""
    return zero_limit_report(ts, cfg, xi=xi, W=W, exact_tail=exact_tail).residual
