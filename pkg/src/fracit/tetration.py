"""Tetration ``^z alpha`` for bases ``1 < alpha < e^(1/e)``.

Tetration is the complex iterate of ``x -> alpha**x`` started at ``1``, so
that ``^1 alpha = alpha`` and ``^(z+1) alpha = alpha ** (^z alpha)``.
"""

from __future__ import annotations

import mpmath as mp

from .differintegral import EvalConfig
from .dynamics import ExpBase, find_fixed_point, orbit
from .errors import NotConverged
from .iteration import IterateResult, complex_iterate, iterate_result

#: The start point that makes the iterate a tetration.
SEED = 1


def _check_seed(m: ExpBase, cfg: EvalConfig):
    # 1 lies in the immediate basin for these bases; confirm it numerically
    # instead of assuming it.
    fp = find_fixed_point(m, cfg.ctx)
    orb = orbit(m, SEED, fp, 100000, mp.mpf(10) ** (-cfg.ctx.decimal_digits // 2), cfg.ctx)
    if orb.converged_at is None:
        raise NotConverged("orbit of 1 did not approach the fixed point")


def tetrate_result(alpha, z, cfg: EvalConfig = EvalConfig()) -> IterateResult:
    """``^z alpha`` with its error estimate."""
    m = ExpBase(alpha)
    _check_seed(m, cfg)
    return iterate_result(m, z, SEED, cfg)


def tetrate(alpha, z, cfg: EvalConfig = EvalConfig()):
    """``^z alpha`` for ``Re z > 0``; raises DomainError outside ``1 < alpha <= e^(1/e)``."""
    m = ExpBase(alpha)
    _check_seed(m, cfg)
    return complex_iterate(m, z, SEED, cfg)


def verify_tetration(alpha, z, cfg: EvalConfig = EvalConfig()):
    """``|alpha ** (^z alpha) - ^(z+1) alpha|``."""
    m = ExpBase(alpha)
    z = mp.mpmathify(z)
    v = tetrate(m.alpha, z, cfg)
    w = tetrate(m.alpha, z + 1, cfg)
    with mp.workdps(cfg.ctx.working):
        return abs(mp.power(m.alpha, v) - w)
