"""Smoothing weights: the J-fold box average eta_J and partition-of-unity bumps.

Every weight is 0 outside its support, 1 on its plateau, and on each edge
follows a profile ``t -> [0, 1]`` that is an exact piecewise polynomial.  The
eta_J profile is the Irwin-Hall distribution function (the law of a sum of J
uniform shifts), so eta_J is J-1 times continuously differentiable.  Bump
edges use the degree ``2P+1`` smoothstep, which satisfies
``S(t) + S(1 - t) = 1`` and so lets neighbouring bumps add up to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Profile:
    """Piecewise polynomial on [0, 1] with equal-width pieces.

    ``coeffs[i]`` holds the polynomial of piece ``i`` in the local variable
    ``s in [0, 1]``, highest degree first (``np.polyval`` order).
    """

    coeffs: tuple[tuple[float, ...], ...]

    @property
    def pieces(self) -> int:
        return len(self.coeffs)

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        n = self.pieces
        idx = np.minimum((t * n).astype(np.int64), n - 1)
        s = t * n - idx
        out = np.empty_like(t)
        for i, c in enumerate(self.coeffs):
            mask = idx == i
            if mask.any():
                poly = np.polyder(np.asarray(c), deriv) if deriv else np.asarray(c)
                out[mask] = np.polyval(poly, s[mask]) * n**deriv
        return out


def _poly_shift_pow(shift: int, power: int) -> list[Fraction]:
    """Coefficients of ``(s + shift)^power``, highest degree first."""
    return [Fraction(math.comb(power, j) * shift ** (power - j))
            for j in range(power, -1, -1)]


@lru_cache(maxsize=None)
def irwin_hall_profile(J: int) -> Profile:
    """CDF of the sum of J uniforms on [0, 1], rescaled to ``t in [0, 1]``."""
    if J < 1:
        raise ValidationError("J must be >= 1")
    pieces = []
    for i in range(J):
        acc = [Fraction(0)] * (J + 1)
        for m in range(i + 1):
            term = _poly_shift_pow(i - m, J)
            sign = (-1) ** m * math.comb(J, m)
            acc = [a + sign * b for a, b in zip(acc, term)]
        pieces.append(tuple(float(a / math.factorial(J)) for a in acc))
    return Profile(tuple(pieces))


@lru_cache(maxsize=None)
def smoothstep_profile(P: int) -> Profile:
    """``S(t) = int_0^t s^P (1-s)^P ds / B(P+1, P+1)``: C^P step from 0 to 1."""
    if P < 0:
        raise ValidationError("P must be >= 0")
    # s^P (1-s)^P expanded, then integrated term by term
    integrand = {P + j: Fraction((-1) ** j * math.comb(P, j)) for j in range(P + 1)}
    antider = {deg + 1: c / (deg + 1) for deg, c in integrand.items()}
    norm = sum(antider.values())
    degree = 2 * P + 1
    coeffs = tuple(float(antider.get(d, Fraction(0)) / norm) for d in range(degree, -1, -1))
    return Profile((coeffs,))


@dataclass(frozen=True)
class WeightFunction:
    kind: str  # "eta_J", "bump_partition" or "indicator"
    support: tuple[float, float]
    plateau: tuple[float, float]
    order: int
    scale: float
    profile: Profile | None = None

    def __post_init__(self):
        lo, hi = self.support
        p_lo, p_hi = self.plateau
        if not lo <= p_lo <= p_hi <= hi:
            raise ValidationError(f"plateau {self.plateau} not inside support {self.support}")

    def __call__(self, x) -> np.ndarray:
        return self.derivative(x, 0)

    def derivative(self, x, j: int = 1) -> np.ndarray:
        """``w^(j)(x)``, exact away from the polynomial break points."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        p_lo, p_hi = self.plateau
        out = np.zeros_like(x)
        if self.profile is None:
            if j == 0:
                out[(x >= lo) & (x <= hi)] = 1.0
            return out
        if j == 0:
            out[(x >= p_lo) & (x <= p_hi)] = 1.0
        rise = (x > lo) & (x < p_lo)
        if rise.any():
            width = p_lo - lo
            out[rise] = self.profile((x[rise] - lo) / width, j) / width**j
        fall = (x > p_hi) & (x < hi)
        if fall.any():
            width = hi - p_hi
            out[fall] = self.profile((hi - x[fall]) / width, j) * (-1) ** j / width**j
        return out

    def breakpoints(self) -> list[float]:
        """Support ends, plateau ends and the interior joints of the edge pieces."""
        lo, hi = self.support
        p_lo, p_hi = self.plateau
        pts = {lo, hi, p_lo, p_hi}
        if self.profile is not None:
            n = self.profile.pieces
            for i in range(1, n):
                pts.add(lo + (p_lo - lo) * i / n)
                pts.add(hi - (hi - p_hi) * i / n)
        return sorted(pts)


def indicator(lo: float, hi: float) -> WeightFunction:
    if not lo <= hi:
        raise ValidationError("indicator needs lo <= hi")
    return WeightFunction("indicator", (lo, hi), (lo, hi), 0, hi - lo)


def build_eta_J(M: float, Delta: float, U: float, J: int) -> WeightFunction:
    """The J-fold box average of the indicator of ``[M - JU, M + Delta + JU]``.

    Equals 1 on ``[M, M + Delta]``, vanishes outside
    ``[M - JU, M + Delta + JU]`` and ramps over ``J`` pieces of width ``U`` on
    each side.  ``J = 0`` gives the plain indicator.
    """
    if J < 0:
        raise ValidationError("J must be >= 0")
    lo, hi = M - J * U, M + Delta + J * U
    if J == 0:
        return indicator(lo, hi)
    if not U > 0 or not U < (hi - lo) / (2 * J):
        raise ValidationError("averaging window too wide")
    return WeightFunction("eta_J", (lo, hi), (M, M + Delta), J, U, irwin_hall_profile(J))


def _bump(lo: float, rise_end: float, fall_start: float, hi: float, P: int,
          scale: float) -> WeightFunction:
    return WeightFunction("bump_partition", (lo, hi), (rise_end, fall_start), P, scale,
                          smoothstep_profile(P))


@dataclass(frozen=True)
class Partition:
    weights: list[WeightFunction]
    covered: tuple[float, float]
    levels: int
    M: float
    Delta: float

    @property
    def tail_length(self) -> float:
        """Length of each end piece of ``[M, M + Delta]`` where the sum is below 1."""
        return self.covered[0] - self.M

    def total(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum([w(x) for w in self.weights], axis=0)

    def __iter__(self):
        return iter(self.weights)

    def __len__(self) -> int:
        return len(self.weights)


def partition_scales(Delta: float, L: int) -> list[float]:
    scales = [2 * Delta / 5, Delta / 4]
    while len(scales) <= L + 1:
        scales.append(scales[-1] / 2)
    return scales


def build_partition(M: float, Delta: float, L: int, *, P: int = 4,
                    epsilon: float = 0.05, check_length: bool = True) -> Partition:
    """Dyadic partition of unity ``w_-L, ..., w_L`` over ``[M, M + Delta]``.

    The central bump has length ``2 Delta / 5``; bump ``l`` has length
    ``Delta_l = Delta / 2^(l+1)`` and starts at
    ``M_l = M_0 + 3 Delta_0 / 4 + (4/5) sum_{i<l} Delta_i``, overlapping its
    neighbour so the two add to one.  Negative indices mirror positive ones in
    ``x = M + Delta/2``.  The sum is 1 on ``covered``; the two uncovered end
    pieces have length ``(4/5) Delta_L``-ish.
    """
    if L < 1:
        raise ValidationError("L must be >= 1")
    if check_length and Delta > M ** (5 / 8) * (1 + 1e-12):
        raise ValidationError(f"Delta={Delta} exceeds M^(5/8)={M ** 0.625}")
    D = partition_scales(Delta, L)
    target = M ** (0.4 + epsilon)
    if D[L] > target:
        need = L
        while partition_scales(Delta, need)[need] > target:
            need += 1
        raise ValidationError(f"L={L} too small: Delta_L={D[L]:.4g} > M^(2/5+eps); need L >= {need}")
    M0 = M + Delta / 2 - Delta / 5
    starts = [M0, M0 + 3 * D[0] / 4]
    for ell in range(2, L + 2):
        starts.append(starts[-1] + 4 * D[ell - 1] / 5)
    centre = M + Delta / 2
    right = [_bump(M0, M0 + D[0] / 4, M0 + 3 * D[0] / 4, M0 + D[0], P, D[0])]
    for ell in range(1, L + 1):
        right.append(_bump(starts[ell], starts[ell - 1] + D[ell - 1], starts[ell + 1],
                           starts[ell] + D[ell], P, D[ell]))
    left = [_mirror(w, centre) for w in right[1:]]
    weights = left[::-1] + right
    cover_hi = starts[L + 1]
    return Partition(weights, (2 * centre - cover_hi, cover_hi), L, M, Delta)


def _mirror(w: WeightFunction, centre: float) -> WeightFunction:
    lo, hi = w.support
    p_lo, p_hi = w.plateau
    return WeightFunction(w.kind, (2 * centre - hi, 2 * centre - lo),
                          (2 * centre - p_hi, 2 * centre - p_lo), w.order, w.scale, w.profile)
