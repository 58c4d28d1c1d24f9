"""Exact integer arithmetic, divisor sieving and phase evaluation.

Phases ``e(x) = exp(2*pi*i*x)`` are always reduced modulo 1 before the
exponential is taken.  For a term ``e(n*alpha)`` with ``alpha = h/k + eta``
the rational part is reduced in exact integer arithmetic and ``n*eta`` is
formed as a double-double product, so the phase stays accurate for ``n`` far
beyond the point where a naive ``n*alpha`` has lost every significant digit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ValidationError

SIEVE_SEGMENT = 1 << 20
SIEVE_MAX_ENTRIES = 1 << 26
SUM_CHUNK = 1 << 16
_INT64_MAX = (1 << 63) - 1
_EXACT_FLOAT_INT = 1 << 53
_DEKKER = 134217729.0  # 2**27 + 1


@dataclass(frozen=True)
class FareyFraction:
    h: int
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"denominator must be positive, got {self.k}")
        if math.gcd(self.h, self.k) != 1:
            raise ValidationError(f"{self.h}/{self.k} is not reduced")

    def __float__(self) -> float:
        return self.h / self.k

    def as_fraction(self) -> Fraction:
        return Fraction(self.h, self.k)

    def __str__(self) -> str:
        return f"{self.h}/{self.k}"


@dataclass(frozen=True)
class AlphaSplit:
    """``alpha = h/k + eta`` with ``eta`` carried as a double-double.

    ``eta_lo`` holds the low word; it is zero whenever ``eta`` came from a
    plain float.  ``order`` is the Farey order the split was produced for and
    ``reduced`` records that the caller's alpha was first reduced mod 1.
    """

    frac: FareyFraction
    eta: float
    order: int = 1
    h_bar: int = field(default=-1)
    eta_lo: float = 0.0
    reduced: bool = False

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError("Farey order must be a positive integer")
        if not math.isfinite(self.eta) or not math.isfinite(self.eta_lo):
            raise ValidationError("eta must be finite")
        if self.h_bar < 0:
            object.__setattr__(self, "h_bar", mod_inverse(self.frac.h, self.frac.k))

    @classmethod
    def from_parts(cls, h: int, k: int, eta, order: int = 1) -> "AlphaSplit":
        """Build a split from ``h``, ``k`` and an offset that may be a Fraction."""
        hi, lo = dd_from_rational(eta) if isinstance(eta, Fraction) else (float(eta), 0.0)
        return cls(FareyFraction(h, k), hi, order=order, eta_lo=lo)

    @property
    def h(self) -> int:
        return self.frac.h

    @property
    def k(self) -> int:
        return self.frac.k

    @property
    def alpha(self) -> float:
        return self.frac.h / self.frac.k + self.eta + self.eta_lo

    def eta_exact(self) -> Fraction:
        return Fraction(self.eta) + Fraction(self.eta_lo)

    def alpha_exact(self) -> Fraction:
        return self.frac.as_fraction() + self.eta_exact()

    def negated(self) -> "AlphaSplit":
        """Split representing ``-alpha mod 1``."""
        h, k = self.frac.h, self.frac.k
        return AlphaSplit(FareyFraction((-h) % k, k), -self.eta, order=self.order,
                          eta_lo=-self.eta_lo, reduced=self.reduced)


@dataclass(frozen=True)
class DivisorTable:
    start: int
    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def stop(self) -> int:
        """Last integer covered (inclusive)."""
        return self.start + len(self.values) - 1

    def __len__(self) -> int:
        return len(self.values)

    def d(self, n: int) -> int:
        if not self.start <= n <= self.stop:
            raise IndexError(f"{n} outside [{self.start}, {self.stop}]")
        return int(self.values[n - self.start])

    def slice(self, lo: int, hi: int) -> np.ndarray:
        """d(n) for integers ``lo <= n <= hi`` (must lie inside the table)."""
        if lo < self.start or hi > self.stop:
            raise IndexError(f"[{lo}, {hi}] outside [{self.start}, {self.stop}]")
        return self.values[lo - self.start: hi - self.start + 1]


def _small_primes(limit: int) -> np.ndarray:
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p::p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def _sieve_segment(lo: int, hi: int, primes: np.ndarray) -> np.ndarray:
    size = hi - lo + 1
    rest = np.arange(lo, hi + 1, dtype=np.int64)
    count = np.ones(size, dtype=np.int64)
    for p in primes.tolist():
        if p * p > hi:
            break
        first = -lo % p
        if first >= size:
            continue
        exps = np.zeros(len(range(first, size, p)), dtype=np.int64)
        q = p
        while q <= hi:
            off = -lo % q
            if off >= size:
                break
            # multiples of q are every (q // p)-th multiple of p
            exps[(off - first) // p::q // p] += 1
            if q > hi // p:
                break
            q *= p
        rest[first::p] //= p ** exps
        count[first::p] *= exps + 1
    count[rest > 1] *= 2
    return count


def divisor_sieve(M1: int, M2: int) -> DivisorTable:
    """Divisor counts d(n) for every integer in ``[M1, M2]``.

    Works segment by segment with trial division by the primes up to
    ``sqrt(M2)``, so a window far from the origin costs only its own length.
    """
    M1, M2 = int(M1), int(M2)
    if M1 < 1:
        raise ValidationError(f"M1 must be >= 1, got {M1}")
    if M2 < M1:
        raise ValidationError(f"empty range [{M1}, {M2}]")
    if M2 > _INT64_MAX:
        raise ValidationError(f"range overflow: M2={M2} exceeds 2**63-1")
    if M2 - M1 + 1 > SIEVE_MAX_ENTRIES:
        raise ValidationError(
            f"range overflow: {M2 - M1 + 1} entries exceeds the sieve budget of {SIEVE_MAX_ENTRIES}")
    primes = _small_primes(math.isqrt(M2))
    parts = []
    for lo in range(M1, M2 + 1, SIEVE_SEGMENT):
        parts.append(_sieve_segment(lo, min(lo + SIEVE_SEGMENT - 1, M2), primes))
    values = np.concatenate(parts).astype(np.int32 if M2 < (1 << 31) else np.int64)
    return DivisorTable(M1, values)


def mod_inverse(h: int, k: int) -> int:
    if k < 1:
        raise ValidationError("modulus must be positive")
    if k == 1:
        return 0
    if math.gcd(h, k) != 1:
        raise ValidationError(f"{h} is not invertible modulo {k}")
    return pow(h, -1, k)


def e_phase(x: float) -> complex:
    """``exp(2*pi*i*x)`` with ``x`` reduced mod 1 first."""
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"phase must be finite, got {x}")
    t = x - math.floor(x)
    return complex(math.cos(2 * math.pi * t), math.sin(2 * math.pi * t))


def _split(a):
    t = _DEKKER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    """Error-free product: returns ``(p, e)`` with ``p + e == a*b`` exactly."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def dd_from_rational(x: Fraction) -> tuple[float, float]:
    hi = float(x)
    return hi, float(x - Fraction(hi))


def frac_mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def mul_mod1(n, hi: float, lo: float = 0.0):
    """``n * (hi + lo) mod 1`` for integer ``n`` (scalar or array), as float in [-1/2, 1/2]."""
    nf = np.asarray(n, dtype=np.float64)
    p, e = two_prod(nf, hi)
    t = p - np.round(p)
    t = t + (e + nf * lo)
    return t - np.round(t)


def term_phases(n, split: AlphaSplit) -> np.ndarray:
    """Vectorised ``e(n*alpha)`` for an integer array ``n``."""
    n = np.asarray(n, dtype=np.int64)
    if n.size and int(np.abs(n).max()) >= _EXACT_FLOAT_INT:
        raise ValidationError("term_phase supports |n| < 2**53")
    h, k = split.frac.h, split.frac.k
    if k == 1:
        t = mul_mod1(n, split.eta, split.eta_lo)
    else:
        r = ((n % k) * (h % k)) % k
        t = r / k + mul_mod1(n, split.eta, split.eta_lo)
        t = t - np.round(t)
    return np.exp(2j * np.pi * t)


def term_phase(n: int, split: AlphaSplit) -> complex:
    if n < 1:
        raise ValidationError("term index must be >= 1")
    return complex(term_phases(np.array([n]), split)[0])


def compensated_sum(values: np.ndarray, chunk: int = SUM_CHUNK) -> complex:
    """Sum a complex array in fixed-size chunks with exactly rounded partial sums.

    The chunking is fixed, so the result does not depend on how the chunks
    are scheduled.
    """
    values = np.asarray(values)
    re_parts, im_parts = [], []
    for start in range(0, len(values), chunk):
        block = values[start:start + chunk]
        re_parts.append(math.fsum(block.real.tolist()))
        im_parts.append(math.fsum(block.imag.tolist()) if np.iscomplexobj(block) else 0.0)
    return complex(math.fsum(re_parts), math.fsum(im_parts))
