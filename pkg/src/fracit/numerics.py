"""Extended-precision plumbing and the reciprocal gamma function.

All complex quantities are ``mpmath.mpc`` values.  Precision is expressed in
decimal digits through :class:`PrecisionContext` and applied locally with
``mpmath.workdps``; nothing here mutates global precision permanently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import mpmath as mp

from .errors import DomainError, PrecisionExhausted

LOG10_E = 0.4342944819032518
LOG10_2 = 0.3010299956639812

#: Hard ceiling on working digits; requests above it raise PrecisionExhausted.
MAX_DIGITS = 4000


#: Smallest accuracy target a PrecisionContext accepts.
MIN_DIGITS = 15


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision for a computation.

    ``decimal_digits`` is the accuracy target; ``guard_digits`` are carried on
    top of it through cancellative sums.
    """

    decimal_digits: int = 30
    guard_digits: int = 10

    def __post_init__(self):
        if int(self.decimal_digits) != self.decimal_digits or self.decimal_digits < MIN_DIGITS:
            raise DomainError(f"decimal_digits must be an integer >= {MIN_DIGITS}, got {self.decimal_digits}")
        if int(self.guard_digits) != self.guard_digits or self.guard_digits < 5:
            raise DomainError(f"guard_digits must be an integer >= 5, got {self.guard_digits}")

    @property
    def working(self) -> int:
        return self.decimal_digits + self.guard_digits

    @property
    def eps(self):
        """Absolute accuracy target ``10**-decimal_digits`` as an mpf."""
        return mp.mpf(10) ** (-self.decimal_digits)

    def raised(self, extra: int) -> "PrecisionContext":
        return replace(self, decimal_digits=self.decimal_digits + max(0, int(extra)))


def check_digits(digits: int) -> int:
    if digits > MAX_DIGITS:
        raise PrecisionExhausted(f"required {digits} working digits exceeds ceiling {MAX_DIGITS}")
    return digits


def xcomplex(value) -> mp.mpc:
    """Convert a number, string ``"re,im"``, or ``(re, im)`` pair to an mpc."""
    if isinstance(value, mp.mpc):
        out = value
    elif isinstance(value, tuple):
        re, im = value
        out = mp.mpc(re, im)
    elif isinstance(value, str):
        parts = value.split(",")
        if len(parts) == 1:
            out = mp.mpc(parts[0].strip(), 0)
        elif len(parts) == 2:
            out = mp.mpc(parts[0].strip(), parts[1].strip())
        else:
            raise DomainError(f"cannot parse complex value {value!r}")
    else:
        out = mp.mpc(value)
    if not (mp.isfinite(out.real) and mp.isfinite(out.imag)):
        raise DomainError(f"inputs must be finite, got {value!r}")
    return out


def xreal(value) -> mp.mpf:
    out = mp.mpf(value) if not isinstance(value, mp.mpf) else value
    if not mp.isfinite(out):
        raise DomainError(f"inputs must be finite, got {value!r}")
    return out


def ensure_finite(value):
    if isinstance(value, mp.mpc):
        ok = mp.isfinite(value.real) and mp.isfinite(value.imag)
    else:
        ok = mp.isfinite(value)
    if not ok:
        raise PrecisionExhausted(f"non-finite value {value!r}")
    return value


def is_real(z) -> bool:
    return not isinstance(z, mp.mpc) or z.imag == 0


def as_real_if_exact(z):
    """Return an mpf when ``z`` has an exactly zero imaginary part."""
    if isinstance(z, mp.mpc) and z.imag == 0:
        return z.real
    return z


def nearest_integer_distance(z):
    """Distance from ``z`` to the nearest integer, and that integer."""
    re = z.real if isinstance(z, mp.mpc) else z
    m = int(mp.nint(re))
    return abs(z - m), m


def reciprocal_gamma(z, ctx: PrecisionContext = PrecisionContext()):
    """Entire function ``1/Gamma(z)`` accurate to ``ctx.decimal_digits``.

    Zeros at the non-positive integers are returned exactly.
    """
    z = as_real_if_exact(z)
    if is_real(z) and z <= 0 and z == mp.floor(z):
        return mp.mpf(0)
    with mp.workdps(check_digits(ctx.working)):
        value = mp.rgamma(z)
    return ensure_finite(value)


def reciprocal_gamma_product(z, terms: int = 4096, levels: int = 6, ctx: PrecisionContext = PrecisionContext()):
    """Reference evaluation of ``1/Gamma(z)`` from its Weierstrass product.

    Partial products to ``n = terms / 2**j`` are extrapolated with a Richardson
    table in ``1/n``.  Slow and only meant as an independent oracle.
    """
    with mp.workdps(check_digits(ctx.working)):
        z = mp.mpmathify(z)
        sizes = [terms >> (levels - 1 - j) for j in range(levels)]
        partial = []
        prod = z * mp.exp(mp.euler * z)
        k = 0
        for n in sizes:
            while k < n:
                k += 1
                prod *= (1 + z / k) * mp.exp(-z / k)
            partial.append(prod)
        # Neville extrapolation to h = 1/n -> 0; h halves between levels.
        table = list(partial)
        for order in range(1, levels):
            factor = mp.mpf(2) ** order
            table = [(factor * table[i + 1] - table[i]) / (factor - 1) for i in range(len(table) - 1)]
        return +table[0]


def binomial_alternating_sum(a, n: int, ctx: PrecisionContext = PrecisionContext()):
    """``sum_{k=0..n} C(n,k) (-1)^k a_k`` at ``ctx`` digits plus ``n log10 2`` guard."""
    if n < 0 or n >= len(a):
        raise DomainError(f"need 0 <= n < len(a), got n={n}, len={len(a)}")
    digits = check_digits(ctx.working + int(math.ceil(n * LOG10_2)) + 5)
    with mp.workdps(digits):
        total = mp.mpf(0)
        c = 1
        for k in range(n + 1):
            term = c * mp.mpmathify(a[k])
            total = total - term if k & 1 else total + term
            c = c * (n - k) // (k + 1)
    with mp.workdps(ctx.working):
        return +total


@lru_cache(maxsize=64)
def gauss_legendre(order: int, digits: int):
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [-1, 1].

    Computed by mpmath with ten spare digits and rounded to ``digits``;
    returned as sorted tuples of mpf.
    """
    if order < 2:
        raise DomainError("Gauss-Legendre order must be >= 2")
    with mp.workdps(digits + 10):
        X, W = mp.gauss_quadrature(order, "legendre")
    with mp.workdps(digits):
        pairs = sorted(zip(X, W), key=lambda p: p[0])
        return tuple(+x for x, _ in pairs), tuple(+w for _, w in pairs)
