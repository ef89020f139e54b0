"""The ladder of bounded hyper-operators ``alpha ^^n z``.

Level ``n`` of a :class:`HyperTower` evaluates ``alpha ^^n z``:

* level 1 is exponentiation, obtained by iterating ``x -> alpha*x`` from 1
  (auxiliary function ``alpha*exp(alpha*w)``);
* level 2 is tetration, iterating ``x -> alpha**x`` from 1;
* level ``n >= 3`` iterates ``x -> alpha ^^(n-1) x`` from 1.

Iterating from 1 is what makes ``alpha ^^n (k+1)`` the ``k``-th auxiliary
coefficient, because ``alpha ^^(n-1) 1 = alpha``.

For ``n >= 3`` the map is itself a differintegral evaluator.  Its orbit
becomes the next level's coefficients, and any rounding noise in those is
multiplied by ``e^t`` when the auxiliary function is summed at ``-t``.  The
lower level is therefore run as a :class:`FrozenLevel`: a fixed quadrature
plan with a fixed truncation, evaluated with enough digits that its rounding
sits below that amplification.  The result is one analytic function,
accurate to the lower tolerance and smooth to full working precision.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional

import mpmath as mp

from .differintegral import EvalConfig
from .dynamics import Affine, ExpBase, FixedPointData, HyperStep, find_fixed_point, orbit
from .errors import DomainError
from .iteration import IterateResult, IterationEngine, iterate_result
from .numerics import LOG10_E, PrecisionContext, xcomplex

#: Highest level built unless the caller raises ``max_level``.
DEFAULT_MAX_LEVEL = 3


def _alpha(alpha):
    # Parse once through ExpBase so every level agrees on the exact base.
    return ExpBase(alpha).alpha


def _decay_range(cfg: EvalConfig, multiplier) -> float:
    """Integration range needed when the slowest mode decays like ``e^{-lambda t}``."""
    digits = -math.log10(cfg.tol) + 6
    return 1.1 * digits * math.log(10) / float(multiplier)


def _coefficient_digits(cfg: EvalConfig, W_est: float) -> int:
    """Digits the next level's coefficients need at this configuration."""
    amp_guess = int(math.ceil(cfg.shift_max * 0.5)) + 4
    working = cfg.ctx.decimal_digits + amp_guess + 2 + 2 + cfg.ctx.guard_digits
    return working + int(math.ceil(LOG10_E * 2 * W_est * cfg.W_max_factor)) + 10


class _ProbeLevel:
    """A user-precision tower seen as a map; used to locate the next fixed point cheaply."""

    def __init__(self, tower: "HyperTower"):
        self.tower = tower
        self.alpha = tower.alpha
        self.level = tower.level

    def evaluate(self, z):
        return self.tower.evaluate_result(z).value

    def derivative(self, z):
        return self.tower.evaluate_result(z, derivative=True).derivative

    def evaluate_with_derivative(self, z):
        r = self.tower.evaluate_result(z, derivative=True)
        return r.value, r.derivative


class FrozenLevel:
    """High-precision evaluator of ``x -> alpha ^^level x`` used as a map.

    ``coeff_digits`` is the precision at which its values are smooth; the
    tolerance ``cfg.tol`` is its accuracy.
    """

    def __init__(self, alpha, level: int, coeff_digits: int, cfg: EvalConfig):
        if level < 2:
            raise DomainError("frozen levels start at 2 (tetration)")
        self.alpha = alpha
        self.level = level
        self.coeff_digits = coeff_digits
        P = coeff_digits + 5
        self.cfg = cfg.with_(ctx=PrecisionContext(P, cfg.ctx.guard_digits), refine=False)
        if level == 2:
            lower_map = ExpBase(alpha)
        else:
            # Same sizing rule one level down, against this level's own needs.
            probe = find_fixed_point(HyperStep(level - 1, _ProbeLevel(build_level(alpha, level - 1, cfg, level))), cfg.ctx)
            W_est = _decay_range(self.cfg, probe.multiplier)
            below = FrozenLevel(alpha, level - 1, _coefficient_digits(self.cfg, W_est), cfg)
            lower_map = below.step
        self.engine = IterationEngine(lower_map, 1, self.cfg, headroom=2)
        self.step = HyperStep(level, self)
        self._fixed_point = None
        self._orbits = {}
        self._lock = threading.Lock()

    def evaluate(self, z):
        return self.engine.evaluate(z).value

    def derivative(self, z):
        return self.engine.evaluate(z, derivative=True).derivative

    def evaluate_with_derivative(self, z):
        r = self.engine.evaluate(z, derivative=True)
        return r.value, r.derivative

    @property
    def fixed_point(self) -> FixedPointData:
        """Attracting fixed point of ``x -> alpha ^^level x`` with multiplier check."""
        if self._fixed_point is None:
            self._fixed_point = find_fixed_point(self.step, PrecisionContext(self.coeff_digits - 10, 5))
        return self._fixed_point

    def orbit(self, xi, fp, max_n, tol):
        """Orbit of ``xi`` under this map, memoised per start point."""
        key = mp.nstr(mp.mpmathify(xi), 40)
        with self._lock:
            if key not in self._orbits:
                self._orbits[key] = orbit(self.step, xi, fp, max_n, tol, PrecisionContext(self.coeff_digits, 5))
            return self._orbits[key]


@dataclass(eq=False)
class HyperTower:
    """Level ``level`` of the ladder for base ``alpha``.

    ``coeffs`` are ``alpha ^^level (k+1)`` for ``k = 0, 1, ...``; ``omega`` is
    the attracting fixed point of the map ``x -> alpha ^^(level-1) x`` that
    generates them (``None`` at level 1, whose map is ``x -> alpha*x``).
    """

    alpha: object
    level: int
    cfg: EvalConfig
    map: object
    omega: Optional[FixedPointData]
    prev: Optional["HyperTower"] = None

    @property
    def coeffs(self):
        if self.level == 1:
            with mp.workdps(self.cfg.ctx.working):
                return tuple(mp.power(self.alpha, k + 1) for k in range(8))
        eng = self.engine()
        return (eng.values[0],) + tuple(eng.values[1:])

    @property
    def theta(self):
        """Unshifted auxiliary series of this level."""
        from .theta import ThetaSeries, ThetaSource, affine_theta

        if self.level == 1:
            return affine_theta(self.map, 1)
        eng = self.engine()
        vals = tuple(eng.values)
        while len(vals) < 8:
            vals = vals + (self.omega.beta,)
        return ThetaSeries(
            coeffs=vals,
            K=len(vals),
            limit=self.omega.beta,
            source=ThetaSource("tower", map=self.map, xi=mp.mpf(1), level=self.level),
            coeff_digits=eng.coeff_digits,
            decay_rate=float(self.omega.multiplier),
        )

    def engine(self, headroom: int = 1) -> IterationEngine:
        from .iteration import get_engine

        return get_engine(self.map, 1, self.cfg, headroom)

    def evaluate_result(self, z, derivative: bool = False) -> IterateResult:
        return iterate_result(self.map, z, 1, self.cfg, derivative)


_towers: dict = {}
_towers_lock = threading.Lock()


def build_level(alpha, n: int, cfg: EvalConfig = EvalConfig(), max_level: int = DEFAULT_MAX_LEVEL) -> HyperTower:
    """Tower for ``alpha ^^n``; lower levels are built on the way.

    Raises :class:`DegenerateMultiplier` when the generating map's fixed
    point has a multiplier too close to 0 or 1.
    """
    n = int(n)
    if n < 1:
        raise DomainError("hyper-operator levels start at 1")
    if n > max_level:
        raise DomainError(f"level {n} exceeds max_level={max_level}")
    a = _alpha(alpha)
    key = (mp.nstr(a, 60), n, cfg)
    with _towers_lock:
        if key in _towers:
            return _towers[key]
    if n == 1:
        tower = HyperTower(a, 1, cfg, Affine(a), None)
    elif n == 2:
        m = ExpBase(a)
        prev = build_level(a, 1, cfg, max_level)
        tower = HyperTower(a, 2, cfg, m, find_fixed_point(m, cfg.ctx), prev)
    else:
        prev = build_level(a, n - 1, cfg, max_level)
        lower_cfg = cfg.with_(tol=cfg.tol / 100)
        # A cheap look at the new fixed point sizes the precision (and rejects
        # degenerate multipliers before any expensive work).
        probe = find_fixed_point(HyperStep(n - 1, _ProbeLevel(prev)), cfg.ctx)
        W_est = _decay_range(cfg, probe.multiplier)
        frozen = FrozenLevel(a, n - 1, _coefficient_digits(cfg, W_est), lower_cfg)
        tower = HyperTower(a, n, cfg, frozen.step, frozen.fixed_point, prev)
    with _towers_lock:
        _towers[key] = tower
    return tower


def hyper_eval_result(t: HyperTower, z, cfg: Optional[EvalConfig] = None) -> IterateResult:
    """``alpha ^^level z`` with its error estimate (``Re z > 0``).

    For levels above 2 the estimate includes the lower level's accuracy,
    propagated through the ``x -> alpha ^^(level-1) x`` iteration.
    """
    if cfg is not None and cfg != t.cfg:
        t = build_level(t.alpha, t.level, cfg)
    z = xcomplex(z) if isinstance(z, str) else mp.mpmathify(z)
    res = t.evaluate_result(z)
    if t.level >= 3:
        # The lower map is only accurate to its tolerance; an error eps in
        # the map moves the iterate by at most eps * (1 + 1/(1 - lambda)).
        lam = float(t.omega.multiplier)
        lower_tol = t.map.tower.cfg.tol
        extra = lower_tol * (1 + 1 / (1 - lam))
        res = IterateResult(res.value, res.error_estimate + extra, res.shift, res.W_max, res.path,
                            res.amplification, res.derivative)
    return res


def hyper_eval(t: HyperTower, z, cfg: Optional[EvalConfig] = None):
    """``alpha ^^level z``; integers return the stored coefficient."""
    return hyper_eval_result(t, z, cfg).value


def verify_hyper_recursion(alpha, n: int, x, cfg: EvalConfig = EvalConfig()):
    """``|alpha ^^n (alpha ^^(n+1) x) - alpha ^^(n+1) (x+1)|`` for real ``x > 0``.

    ``n = 0`` is multiplication, handled in closed form.
    """
    x = mp.mpmathify(x)
    if not x > 0:
        raise DomainError("verify_hyper_recursion needs x > 0")
    upper = build_level(alpha, n + 1, cfg, max(DEFAULT_MAX_LEVEL, n + 1))
    inner = hyper_eval(upper, x)
    after = hyper_eval(upper, x + 1)
    with mp.workdps(cfg.ctx.working):
        if n == 0:
            outer = upper.alpha * inner
        else:
            outer = hyper_eval(build_level(alpha, n, cfg, max(DEFAULT_MAX_LEVEL, n + 1)), inner)
        return abs(outer - after)


@dataclass(frozen=True)
class ShapeReport:
    level: int
    values: tuple
    monotone: bool
    bounded: Optional[bool]
    at_zero: object
    at_zero_ok: bool
    at_infinity: object
    at_infinity_ok: Optional[bool]
    max_error_estimate: float
    #: Per-value estimates aligned with ``values``.
    error_estimates: tuple = ()
    at_zero_error: float = 0.0
    at_infinity_error: Optional[float] = None


def verify_hyper_shape(t: HyperTower, grid, cfg: Optional[EvalConfig] = None) -> ShapeReport:
    """Monotonicity, the bound ``e``, ``0+`` limit and ``+inf`` limit on a grid.

    Level 1 is unbounded and has no attracting limit, so those two flags are
    ``None`` there.
    """
    cfg = cfg or t.cfg
    grid = [mp.mpf(x) for x in grid]
    if any(x <= 0 for x in grid):
        raise DomainError("shape grid must lie in (0, inf)")
    results = [hyper_eval_result(t, x, cfg) for x in grid]
    vals = tuple(r.value for r in results)
    errs = [r.error_estimate for r in results]
    re = [v.real if isinstance(v, mp.mpc) else v for v in vals]
    monotone = all(b >= a - max(e1, e2) for a, b, e1, e2 in zip(re, re[1:], errs, errs[1:]))
    with mp.workdps(cfg.ctx.working):
        zero_res = hyper_eval_result(t, mp.mpf("1e-3"), cfg)
        at_zero = zero_res.value
        at_zero_ok = abs(at_zero - 1) <= mp.mpf("0.05")
        if t.level >= 2:
            bounded = all(v <= mp.e + mp.mpf("1e-9") for v in re)
            inf_res = hyper_eval_result(t, 30, cfg)
            at_inf, inf_err = inf_res.value, inf_res.error_estimate
            at_inf_ok = abs(at_inf - t.omega.beta) <= mp.mpf("1e-3")
        else:
            bounded, at_inf, at_inf_ok, inf_err = None, None, None, None
    return ShapeReport(t.level, vals, monotone, bounded, at_zero, bool(at_zero_ok), at_inf, at_inf_ok,
                       max(errs, default=0.0), tuple(errs), zero_res.error_estimate, inf_err)
