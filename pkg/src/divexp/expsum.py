"""The exponential sums D(M1, M2; alpha), smoothed variants and their main term."""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .arithmetic import AlphaSplit, DivisorTable, compensated_sum, divisor_sieve, term_phases
from .errors import ValidationError
from .oscint import QuadResult, e, integrate
from .weights import WeightFunction, build_eta_J, indicator

EULER_GAMMA = 0.57721566490153286060651209008240243
MEAN_SQUARE_MAX_M = 10**4


class RangeNotice(UserWarning):
    """A summation range contained no integers."""


_cache_lock = threading.Lock()
_table_cache: list[DivisorTable] = []
_CACHE_SIZE = 4


def divisor_counts(lo: int, hi: int) -> np.ndarray:
    """d(n) for ``lo <= n <= hi``, reusing a recently sieved window when possible."""
    with _cache_lock:
        for table in _table_cache:
            if table.start <= lo and hi <= table.stop:
                return table.slice(lo, hi)
    table = divisor_sieve(lo, hi)
    with _cache_lock:
        _table_cache.insert(0, table)
        del _table_cache[_CACHE_SIZE:]
    return table.values


def preload_divisors(lo: int, hi: int) -> None:
    """Sieve ``[lo, hi]`` once so later sums inside the window hit the cache."""
    divisor_counts(lo, hi)


@dataclass(frozen=True)
class SumSpec:
    M1: int
    M2: int
    split: AlphaSplit
    weight: WeightFunction | None = None

    def __post_init__(self):
        if self.M2 < self.M1:
            raise ValidationError(f"M2={self.M2} < M1={self.M1}")


@dataclass(frozen=True)
class SmoothingSpec:
    """Smoothing scales: averaging length ``U``, order ``J`` and the widened window."""

    M: float
    Delta: float
    U: float
    J: int
    V: float
    M_minus1: float
    M_2ext: float
    u_small: bool = True

    @classmethod
    def from_split(cls, M: float, Delta: float, split: AlphaSplit, *, d: float = 0.01,
                   J: int = 4, V: float | None = None, u_const: float = 1.0) -> "SmoothingSpec":
        """``U = sqrt(M) |eta|^(-1/2) (k^2 eta^2 M)^d``, window ``[M - JU, M + Delta + JU]``."""
        eta = abs(split.eta + split.eta_lo)
        if eta == 0:
            raise ValidationError("eta must be non-zero")
        F = split.k**2 * eta**2 * M
        U = math.sqrt(M) / math.sqrt(eta) * F**d
        return cls.build(M, Delta, U, J, V=V, F=F, d=d, u_const=u_const)

    @classmethod
    def build(cls, M: float, Delta: float, U: float, J: int, *, V: float | None = None,
              F: float = 1.0, d: float = 0.0, u_const: float = 1.0) -> "SmoothingSpec":
        if not U > 0:
            raise ValidationError("U must be positive")
        if J < 1:
            raise ValidationError("J must be >= 1")
        lo = M - J * U
        if not lo > 0:
            raise ValidationError(f"M - J*U = {lo} is not positive; reduce J or U")
        small = U <= u_const * M ** (7 / 8) * max(F, 1.0) ** d
        return cls(M, Delta, U, J, U if V is None else V, lo, M + Delta + J * U, small)

    def weight(self) -> WeightFunction:
        """eta_J on ``[M_minus1, M_2ext]`` with ramp length ``V``."""
        plateau_lo = self.M_minus1 + self.J * self.V
        return build_eta_J(plateau_lo, self.M_2ext - self.J * self.V - plateau_lo, self.V, self.J)


def weighted_sum(lo: int, hi: int, split: AlphaSplit, weight: WeightFunction | None = None) -> complex:
    """``sum_{lo <= n <= hi} d(n) e(alpha n) w(n)`` with compensated chunked summation."""
    if hi < lo:
        warnings.warn(f"empty summation range [{lo}, {hi}]", RangeNotice, stacklevel=2)
        return 0j
    if lo < 1:
        raise ValidationError("sums start at n >= 1")
    d = divisor_counts(lo, hi)
    n = np.arange(lo, hi + 1, dtype=np.int64)
    terms = d * term_phases(n, split)
    if weight is not None:
        terms = terms * weight(n.astype(float))
    return compensated_sum(terms)


def raw_sum(spec: SumSpec) -> complex:
    return weighted_sum(spec.M1, spec.M2, spec.split)


def smoothed_sum(spec: SumSpec) -> complex:
    """``sum d(n) e(alpha n) w(n)`` over the integers of the weight's support."""
    if spec.weight is None:
        raise ValidationError("smoothed_sum needs a weight")
    lo, hi = spec.weight.support
    return weighted_sum(max(1, math.ceil(lo)), math.floor(hi), spec.split, spec.weight)


def main_term_integral(M: float, Delta: float, k: int, eta: float, w: WeightFunction, *,
                       rtol: float = 1e-9, max_evals: int = 10**6) -> QuadResult:
    """``k^-1 int (log x + 2 gamma - 2 log k) e(eta x) w(x) dx`` over the support of ``w``."""
    lo, hi = w.support
    if lo <= 0:
        raise ValidationError("weight support must lie in x > 0")
    shift = 2 * EULER_GAMMA - 2 * math.log(k)

    def f(x):
        return (np.log(x) + shift) / k * w(x) * e(eta * x)

    if w.kind == "indicator":
        bps = ()
    else:
        bps = tuple(w.breakpoints())
    return integrate(f, lo, hi, rate=abs(eta), breakpoints=bps, rtol=rtol, max_evals=max_evals)


def mean_square(M: int) -> tuple[float, int]:
    """``(int_0^1 |sum_{n<=M} d(n) e(n a)|^2 da, sum_{n<=M} d(n)^2)``.

    The integral uses the ``N = 2M + 1`` point rule, exact for this
    trigonometric polynomial; the phases ``e(jn/N)`` are exact roots of unity.
    """
    if not 1 <= M <= MEAN_SQUARE_MAX_M:
        raise ValidationError(f"M must lie in [1, {MEAN_SQUARE_MAX_M}]")
    d = divisor_sieve(1, M).values.astype(np.float64)
    N = 2 * M + 1
    roots = np.exp(2j * np.pi * np.arange(N) / N)
    n = np.arange(1, M + 1, dtype=np.int64)
    squares = []
    block = max(1, 2_000_000 // M)
    for start in range(0, N, block):
        j = np.arange(start, min(start + block, N), dtype=np.int64)
        S = roots[(j[:, None] * n[None, :]) % N] @ d
        squares.extend((S.real**2 + S.imag**2).tolist())
    integral = math.fsum(squares) / N
    return integral, int(np.sum(d.astype(np.int64) ** 2))


__all__ = [
    "EULER_GAMMA", "RangeNotice", "SumSpec", "SmoothingSpec", "divisor_counts",
    "preload_divisors", "weighted_sum", "raw_sum", "smoothed_sum", "main_term_integral",
    "mean_square", "indicator", "build_eta_J",
]
