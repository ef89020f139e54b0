"""Complex iterates ``phi^z(xi)`` and their verification contracts.

The auxiliary series of a start point ``xi`` decays only slowly along the
negative axis when ``xi`` is far from the fixed point: besides the
``beta * e^{-t}`` term it carries modes ``e^{-lambda^m t}`` whose weights are
set by the distance ``xi - beta``.  The engine therefore evaluates the
differintegral at a shifted start ``xi_N = phi^N(xi)``, where those weights
have shrunk by ``lambda^N``, and maps the result back with ``N`` applications
of ``phi^{-1}``:

    phi^z(xi) = phi^{-N}(phi^z(xi_N)).

Pulling back divides errors by ``|phi'|`` at each step, so the inner
evaluation runs with a correspondingly smaller tolerance and more digits.
``N`` is chosen by comparing decay scans of the shifted series.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import mpmath as mp

from .differintegral import EvalConfig, build_plan, differintegral_at_zero, differintegral_with_derivative
from .dynamics import (
    Affine,
    FixedPointData,
    HyperStep,
    MapSpec,
    find_fixed_point,
    map_derivative,
    map_inverse_with_derivative,
    orbit,
)
from .errors import DomainError, NonIntegrable, PrecisionExhausted
from .numerics import LOG10_E, PrecisionContext, check_digits, xcomplex
from .theta import ThetaSeries, ThetaSource, affine_theta, decay_scan

_INITIAL_W_GUESS = 64.0
_SHIFT_STEP = 2


@dataclass(frozen=True)
class IterateResult:
    """One evaluation of ``phi^z(xi)``.

    ``derivative`` is ``d/dz`` when requested.  ``amplification`` is the
    factor by which the pull-back magnified the inner error.
    """

    value: object
    error_estimate: float
    shift: int
    W_max: float
    path: str
    amplification: float
    derivative: object = None


def _headroom_exponent(z) -> int:
    """Bucketed number of digits of ``|1/Gamma(1-z)|``.

    Buckets are 1, 2 and then multiples of 3, so nearby heights share an engine.
    """
    with mp.workdps(20):
        r = abs(mp.rgamma(1 - z))
    digits = 0 if r <= 1 else int(math.ceil(float(mp.log10(r))))
    if digits <= 2:
        return max(1, digits)
    return 3 * int(math.ceil(digits / 3))


class IterationEngine:
    """Evaluator of ``z -> phi^z(xi)`` for one map and start point.

    Construction computes the fixed point, the orbit, the shift ``N`` and the
    quadrature plan of the shifted series; :meth:`evaluate` then costs one
    quadrature sum plus ``N`` inverse steps.  ``headroom`` is the exponent of
    the largest ``|1/Gamma(1-z)|`` the plan is sized for.
    """

    def __init__(self, m: MapSpec, xi, cfg: EvalConfig = EvalConfig(), headroom: int = 2, fp: Optional[FixedPointData] = None):
        self.map = m
        self.cfg = cfg
        self.headroom = headroom
        self._lock = threading.RLock()
        with mp.workdps(check_digits(cfg.ctx.working + 10)):
            self.xi = mp.mpmathify(xi) if not isinstance(xi, (mp.mpf, mp.mpc)) else xi
        if isinstance(m, Affine):
            self._build_affine()
        else:
            self._build_orbit_engine(fp)

    # ------------------------------------------------------------------ build
    def _inner_cfg(self, amp_digits: int) -> EvalConfig:
        P, g = self.cfg.ctx.decimal_digits, self.cfg.ctx.guard_digits
        ctx = PrecisionContext(P + amp_digits + self.headroom + 2, g)
        tol = self.cfg.tol / (4 * 10.0**amp_digits)
        return self.cfg.with_(ctx=ctx, tol=tol, gamma_headroom=10.0**self.headroom)

    def _build_affine(self):
        self.fp = None
        self.shift = 0
        self.values = ()
        self.amp_digits = 0
        self.inner = self._inner_cfg(0)
        self.series = affine_theta(self.map, self.xi)
        self.plan = build_plan(self.series, self.inner)

    def _amp_guess(self) -> int:
        return int(math.ceil(self.cfg.shift_max * 0.5)) + 4

    def _orbit_digits(self, W_guess: float) -> int:
        # Coefficients must survive the cancellation in theta(-t) for t up to 2W.
        P = self._inner_cfg(self._amp_guess()).ctx.working
        return P + int(math.ceil(LOG10_E * 2 * W_guess * self.cfg.W_max_factor)) + 10

    def _build_orbit_engine(self, fp):
        m = self.map
        hyper = isinstance(m, HyperStep)
        W_guess = _INITIAL_W_GUESS
        for _ in range(8):
            if hyper:
                # The tower fixes the coefficient digits; scan as far as they reach.
                Pc = m.tower.coeff_digits
                spare = Pc - 3 - self._inner_cfg(self._amp_guess()).ctx.working - 4
                W_guess = max(16.0, spare / (2 * LOG10_E * self.cfg.W_max_factor))
            else:
                Pc = check_digits(self._orbit_digits(W_guess))
            ctx_orbit = PrecisionContext(Pc + 5, self.cfg.ctx.guard_digits)
            if hyper:
                self.fp = fp or m.tower.fixed_point
            else:
                self.fp = find_fixed_point(m, ctx_orbit)
            lam = abs(self.fp.multiplier)
            max_n = int(Pc / max(-math.log10(float(lam)), 1e-3)) + self._shift_budget() + 40
            cached_orbit = getattr(m.tower, "orbit", None) if hyper else None
            if cached_orbit is not None:
                orb = cached_orbit(self.xi, self.fp, max_n, mp.mpf(10) ** (-(Pc - 3)))
            else:
                orb = orbit(m, self.xi, self.fp, max_n, mp.mpf(10) ** (-(Pc - 3)), ctx_orbit)
            self.values = orb.values
            self._slope_logs = []
            self.coeff_digits = Pc - 3
            chosen = self._choose_shift(W_guess)
            if chosen is not None:
                break
            if hyper:
                raise PrecisionExhausted(
                    f"tower precision of {Pc} digits is not enough for any shift up to {self._shift_budget()}"
                )
            ceiling = self.cfg.W_max_ceiling
            W_guess = ceiling if W_guess < ceiling < 2 * W_guess else 2 * W_guess
            if W_guess > ceiling:
                raise NonIntegrable(f"no shift up to {self._shift_budget()} gives a decaying series below W={self.cfg.W_max_ceiling}")
        else:  # pragma: no cover - loop always breaks or raises
            raise NonIntegrable("shift selection failed")
        self.shift, series, scan, self.amp_digits = chosen
        self.inner = self._inner_cfg(self.amp_digits)
        self.series = series
        self.plan = build_plan(series, self.inner, W=scan.W_max, rate=scan.decay_rate)

    def _shift_budget(self) -> int:
        # cfg.shift_max is the budget at lambda = 1/2; weaker contraction needs
        # proportionally more steps for the same reduction lambda**N.
        lam = float(abs(self.fp.multiplier))
        scale = max(1.0, math.log(2) / -math.log(lam))
        return int(math.ceil(self.cfg.shift_max * scale))

    def _amp_digits(self, N: int) -> int:
        # Pull-back magnification bound prod 1/min(|phi'(xi_i)|, lambda).
        lam = float(abs(self.fp.multiplier))
        points = (self.xi,) + tuple(self.values)
        logs = self._slope_logs
        while len(logs) < N:
            d = float(abs(map_derivative(self.map, points[len(logs)], self.cfg.ctx)))
            logs.append(-math.log10(min(d, lam)))
        return int(math.ceil(sum(logs[:N]))) + 1

    def _shifted_series(self, N: int) -> ThetaSeries:
        coeffs = list(self.values[N:])
        while len(coeffs) < 8:
            coeffs.append(self.fp.beta)
        return ThetaSeries(
            coeffs=tuple(coeffs),
            K=len(coeffs),
            limit=self.fp.beta,
            source=ThetaSource("orbit", map=self.map, xi=self.values[N - 1] if N else self.xi, shift=N),
            coeff_digits=self.coeff_digits,
            decay_rate=float(abs(self.fp.multiplier)),
        )

    def _choose_shift(self, W_guess):
        cfg = self.cfg
        if cfg.shift is not None:
            candidates = [cfg.shift]
        else:
            budget = self._shift_budget()
            step = max(_SHIFT_STEP, budget // 20)
            candidates = list(range(0, budget + 1, step))
        best = None
        for N in candidates:
            if N + 1 > len(self.values):
                break
            amp = self._amp_digits(N)
            inner = self._inner_cfg(amp)
            series = self._shifted_series(N)
            target = mp.mpf(inner.tol) / (8 * mp.mpf(inner.gamma_headroom))
            ceiling = min(cfg.W_max_ceiling, W_guess)
            try:
                scan = decay_scan(series, target, inner.ctx, ceiling=ceiling, predicted_rate=series.decay_rate)
            except (NonIntegrable, PrecisionExhausted):
                if best is not None:
                    break
                continue
            if best is not None and scan.W_max > 0.95 * best[2].W_max:
                break
            best = (N, series, scan, amp)
        return best

    # ------------------------------------------------------------- evaluate
    def _natural(self, m: int):
        if m == 0:
            return self.xi
        if m - 1 < len(self.values):
            return self.values[m - 1]
        return self.fp.beta

    def evaluate(self, z, derivative: bool = False) -> IterateResult:
        with self._lock:
            return self._evaluate(z, derivative)

    def _evaluate(self, z, derivative):
        cfg = self.cfg
        z = mp.mpmathify(z)
        re = z.real if isinstance(z, mp.mpc) else z
        if not re > 0:
            raise DomainError(f"complex iterates need Re(z) > 0, got {mp.nstr(z, 10)}")
        m = int(mp.nint(re))
        near = self.fp is not None and m >= 1 and abs(z - m) <= cfg.integer_guard
        if near and z == m and not derivative:
            with mp.workdps(cfg.ctx.working):
                value = +self._natural(m)
            return IterateResult(value, float(mp.mpf(10) ** (-(cfg.ctx.working - 2))), self.shift,
                                 float(self.plan.W), "natural", 1.0)
        want_d = derivative or near
        if want_d:
            res, dval, derr = differintegral_with_derivative(self.series, z - 1, self.inner, self.plan)
        else:
            res, dval, derr = differintegral_at_zero(self.series, z - 1, self.inner, self.plan), None, 0.0
        y, dy, amp = res.value, dval, mp.mpf(1)
        pts = (self.xi,) + tuple(self.values)
        for j in range(self.shift):
            i = self.shift - 1 - j
            seed = y + (pts[i] - pts[i + 1])
            tol = mp.mpf(10) ** (-(self.inner.ctx.working - 2))
            y, slope = map_inverse_with_derivative(self.map, y, self.inner.ctx, seed=seed, tol=tol)
            amp /= abs(slope)
            if dy is not None:
                dy = dy / slope
        with mp.workdps(self.inner.ctx.working):
            rounding = float(mp.mpf(10) ** (-(cfg.ctx.working - 3)) * max(1, abs(y)))
        err = float(res.error_estimate * amp) + rounding
        path = res.path
        if near:
            # Natural iterate plus the first-order correction.
            offset = z - m
            with mp.workdps(cfg.ctx.working + 5):
                y = self._natural(m) + offset * dy
            err = float(abs(offset)) * float(derr * amp) + rounding
            path = "natural" if offset == 0 else "near_integer"
        with mp.workdps(cfg.ctx.working):
            y = +y
            dy = +dy if (derivative and dy is not None) else None
        return IterateResult(y, err, self.shift, float(self.plan.W), path, float(amp), dy)


# ---------------------------------------------------------------------------
# engine cache

_CACHE_SIZE = 64
_engines: "OrderedDict[tuple, IterationEngine]" = OrderedDict()
_engines_lock = threading.Lock()


def _xi_key(xi):
    with mp.workdps(60):
        v = mp.mpmathify(xi)
        return (mp.nstr(v.real, 50), mp.nstr(v.imag, 50)) if isinstance(v, mp.mpc) else (mp.nstr(v, 50), "0")


def get_engine(m: MapSpec, xi, cfg: EvalConfig = EvalConfig(), headroom: int = 2) -> IterationEngine:
    """Cached :class:`IterationEngine` keyed by map, start point, config and headroom."""
    key = (m, _xi_key(xi), cfg, headroom)
    with _engines_lock:
        eng = _engines.get(key)
        if eng is not None:
            _engines.move_to_end(key)
            return eng
    eng = IterationEngine(m, xi, cfg, headroom)
    with _engines_lock:
        _engines[key] = eng
        while len(_engines) > _CACHE_SIZE:
            _engines.popitem(last=False)
    return eng


def clear_cache():
    with _engines_lock:
        _engines.clear()


# ---------------------------------------------------------------------------
# public operations


def iterate_result(m: MapSpec, z, xi, cfg: EvalConfig = EvalConfig(), derivative: bool = False) -> IterateResult:
    """``phi^z(xi)`` with its error estimate."""
    z = xcomplex(z) if not isinstance(z, (mp.mpf, mp.mpc, int)) else mp.mpmathify(z)
    z = z.real if isinstance(z, mp.mpc) and z.imag == 0 else z
    eng = get_engine(m, xi, cfg, _headroom_exponent(z))
    return eng.evaluate(z, derivative)


def complex_iterate(m: MapSpec, z, xi, cfg: EvalConfig = EvalConfig()):
    """``phi^z(xi)`` for ``Re z > 0``.

    Raises :class:`PrecisionExhausted` when the error estimate exceeds
    ``cfg.tol``.
    """
    res = iterate_result(m, z, xi, cfg)
    if not res.error_estimate <= cfg.tol:
        raise PrecisionExhausted(f"error estimate {res.error_estimate:.3g} exceeds tol={cfg.tol:g}")
    return res.value


def verify_semigroup(m: MapSpec, z1, z2, xi, cfg: EvalConfig = EvalConfig()):
    """``|phi^z1(phi^z2(xi)) - phi^(z1+z2)(xi)|``."""
    inner = complex_iterate(m, z2, xi, cfg)
    outer = complex_iterate(m, z1, inner, cfg)
    whole = complex_iterate(m, mp.mpmathify(z1) + mp.mpmathify(z2), xi, cfg)
    with mp.workdps(cfg.ctx.working):
        return abs(outer - whole)


def period(m: MapSpec, cfg: EvalConfig = EvalConfig()):
    """Imaginary period ``2 pi i / ln(lambda)`` of the iterates."""
    fp = find_fixed_point(m, cfg.ctx)
    with mp.workdps(cfg.ctx.working):
        return 2j * mp.pi / mp.log(fp.multiplier)


def verify_periodicity(m: MapSpec, z, xi, cfg: EvalConfig = EvalConfig()):
    """``|phi^z(xi) - phi^(z + 2 pi i/ln lambda)(xi)|``."""
    z = mp.mpmathify(z)
    a = complex_iterate(m, z, xi, cfg)
    b = complex_iterate(m, z + period(m, cfg), xi, cfg)
    with mp.workdps(cfg.ctx.working):
        return abs(a - b)


def orbit_theta(m: MapSpec, xi, cfg: EvalConfig = EvalConfig(), W: float = 32.0) -> ThetaSeries:
    """Unshifted auxiliary series of ``xi``, accurate enough to evaluate up to ``-W``."""
    from .theta import build_theta

    fp = find_fixed_point(m, cfg.ctx)
    digits = check_digits(cfg.ctx.working + int(math.ceil(LOG10_E * W)) + 4)
    ctx = PrecisionContext(digits, cfg.ctx.guard_digits)
    fp = find_fixed_point(m, ctx)
    orb = orbit(m, xi, fp, 100000, mp.mpf(10) ** (-digits), ctx)
    if orb.converged_at is None:
        raise PrecisionExhausted("orbit did not settle at the precision the series needs")
    return build_theta(orb, fp, tail_tol=mp.mpf(10) ** (-digits), ctx=ctx)
