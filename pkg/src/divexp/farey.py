"""Farey sequences, Farey approximation and the beta-ladder conditions."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from .arithmetic import AlphaSplit, FareyFraction, frac_mod1
from .errors import ValidationError

FAREY_SEQUENCE_MAX_ORDER = 10**5
LADDER_MAX_ROWS = 200


@dataclass(frozen=True)
class AFEParams:
    c: float = 1.0
    epsilon: float = 0.05
    epsilon_prime: float = 0.05
    A: float = 1.0
    a_candidates: tuple[float, ...] = (0.05, 0.1, 0.2)
    d: float = 0.01
    J: int = 4
    c3: float = 4.0

    def __post_init__(self):
        for name in ("c", "epsilon", "epsilon_prime", "d", "c3"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.A < 1:
            raise ValidationError("A must be >= 1")
        if self.J < 2:
            raise ValidationError("J must be >= 2")
        if not self.a_candidates or any(a <= 0 for a in self.a_candidates):
            raise ValidationError("a_candidates must be positive")


@dataclass(frozen=True)
class LadderRow:
    j: int
    delta: float
    order: int
    h: int
    k: int
    eta: float
    far_enough: bool        # |beta - h_j/k_j| >= c * Delta_j**(eps - 1)
    large_denominator: bool  # k_j >= c * Delta_j**(5/6) * F**(-1/3)

    @property
    def verdict(self) -> bool:
        return self.far_enough or self.large_denominator


@dataclass
class ConditionReport:
    beta: float
    ladder: list[LadderRow]
    ell: int
    passed: bool
    F: float
    threshold: float
    hypotheses_met: bool
    flags: list[str] = field(default_factory=list)


def farey_sequence(Q: int) -> list[FareyFraction]:
    """All reduced fractions in [0, 1] with denominator at most ``Q``, ascending."""
    if Q < 1:
        raise ValidationError("order must be a positive integer")
    if Q > FAREY_SEQUENCE_MAX_ORDER:
        raise ValidationError(
            f"order {Q} too large to enumerate; use farey_approx for a single point")
    a, b, c, d = 0, 1, 1, Q
    out = [FareyFraction(0, 1)]
    while c <= Q:
        t = (Q + b) // d
        a, b, c, d = c, d, t * c - a, t * d - b
        out.append(FareyFraction(a, b))
    return out


def _bracket(num: int, den: int, Q: int):
    """Farey neighbours ``p0/q0 <= num/den <= p1/q1`` of order ``Q``.

    Walks the Stern-Brocot tree taking whole continued-fraction steps at a
    time. Returns ``(p, q, p, q)`` when ``num/den`` is itself of order ``Q``.
    """
    if num == 0:
        return 0, 1, 0, 1
    if num == den:
        return 1, 1, 1, 1
    p0, q0, p1, q1 = 0, 1, 1, 1
    while q0 + q1 <= Q:
        mp, mq = p0 + p1, q0 + q1
        side = num * mq - mp * den
        if side == 0:
            return mp, mq, mp, mq
        if side > 0:
            t = min((num * q0 - p0 * den) // (p1 * den - num * q1), (Q - q0) // q1)
            p0, q0 = p0 + t * p1, q0 + t * q1
            if p0 * den == num * q0:
                return p0, q0, p0, q0
        else:
            t = min((p1 * den - num * q1) // (num * q0 - p0 * den), (Q - q1) // q0)
            p1, q1 = p1 + t * p0, q1 + t * q0
            if p1 * den == num * q1:
                return p1, q1, p1, q1
    return p0, q0, p1, q1


def _ratio(alpha) -> tuple[int, int]:
    if isinstance(alpha, Rational):
        return alpha.numerator, alpha.denominator
    return float(alpha).as_integer_ratio()


def farey_approx(alpha, Q: int) -> AlphaSplit:
    """Order-``Q`` Farey approximation ``alpha = h/k + eta`` with ``|eta| <= 1/(kQ)``.

    ``alpha`` may be a float or a ``Fraction``; it is treated as the exact
    rational it represents.  Of the two Farey neighbours the nearer admissible
    one is returned, the smaller denominator winning exact ties.
    """
    if Q < 1:
        raise ValidationError("order must be a positive integer")
    num, den = _ratio(alpha)
    reduced = not 0 <= num <= den
    if reduced:
        num %= den
    p0, q0, p1, q1 = _bracket(num, den, Q)
    if q0 == q1 and p0 == p1:
        p, q = p0, q0
    else:
        gap0 = num * q0 - p0 * den  # (alpha - p0/q0) * den * q0
        gap1 = p1 * den - num * q1
        ok0 = gap0 * Q <= den
        ok1 = gap1 * Q <= den
        if ok0 and ok1:
            c0, c1 = gap0 * q1, gap1 * q0
            if c0 < c1 or (c0 == c1 and q0 <= q1):
                p, q = p0, q0
            else:
                p, q = p1, q1
        elif ok0:
            p, q = p0, q0
        else:
            p, q = p1, q1
    # eta = top/bot exactly; split it into a double-double
    top, bot = num * q - p * den, den * q
    hi = top / bot
    a, b = hi.as_integer_ratio()
    lo = (top * b - a * bot) / (bot * b)
    return AlphaSplit(FareyFraction(p, q), hi, order=Q, eta_lo=lo, reduced=reduced)


def beta_of(split: AlphaSplit) -> Fraction:
    """``beta = -hbar/k - 1/(k^2 eta)`` reduced mod 1, exactly."""
    k = split.frac.k
    eta = split.eta_exact()
    if eta == 0:
        raise ValidationError("eta must be non-zero")
    return frac_mod1(Fraction(-split.h_bar, k) - 1 / (k * k * eta))


def beta_ladder(split: AlphaSplit, M: int, params: AFEParams = AFEParams()) -> ConditionReport:
    """Evaluate the Farey-ladder conditions on beta for ``alpha = h/k + eta``.

    ``Delta_j`` halves from ``Delta_1`` until it first drops to the threshold
    ``(k^2 |eta|^3 M)^(2/5) / c``; each rung needs a Farey approximation of
    beta of order ``Delta_j^(1/2 - eps')`` that is either far from beta or has
    a large denominator.
    """
    if split.eta == 0:
        raise ValidationError("eta must be non-zero")
    k = split.frac.k
    eta = abs(split.eta + split.eta_lo)
    F = k * k * eta * eta * M
    beta = beta_of(split)
    c, eps, eps2 = params.c, params.epsilon, params.epsilon_prime
    threshold = (k * k * eta**3 * M) ** 0.4 / c
    slack = 1 + 1e-12
    hyp = (M >= 2 and k <= M**0.25 * slack and eta <= M**-0.25 / k * slack
           and F * slack >= c * math.log(M) ** params.A)
    flags = []
    if not hyp:
        flags.append("theorem hypotheses unmet")
    if F < 1:
        flags.append("k^2 eta^2 M < 1")
        return ConditionReport(float(beta), [], 0, False, F, threshold, False, flags)
    delta0 = k * k * eta**1.5 * math.sqrt(M) * F**eps
    ell = 1
    while delta0 * 2.0**-ell > threshold:
        ell += 1
        if ell > LADDER_MAX_ROWS:
            raise ValidationError("ladder does not terminate")
    if delta0 / 2 < 1:
        flags.append("degenerate ladder")
        return ConditionReport(float(beta), [], ell, True, F, threshold, hyp, flags)
    rows = []
    for j in range(1, ell + 1):
        delta = delta0 * 2.0**-j
        order = max(1, math.floor(delta ** (0.5 - eps2)))
        approx = farey_approx(beta, order)
        dist = abs(approx.eta + approx.eta_lo)
        rows.append(LadderRow(
            j=j, delta=delta, order=order, h=approx.h, k=approx.k, eta=approx.eta,
            far_enough=dist >= c * delta ** (eps - 1),
            large_denominator=approx.k >= c * delta ** (5 / 6) * F ** (-1 / 3),
        ))
    return ConditionReport(float(beta), rows, ell, all(r.verdict for r in rows), F, threshold,
                           hyp, flags)


@dataclass(frozen=True)
class MeasureEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    stderr: float
    failures: int
    samples: int
    order: int
    k_max: float
    eta_max: float


def _count_failures(alphas: np.ndarray, order: int, k_max: float, eta_max: float) -> int:
    bad = 0
    for a in alphas.tolist():
        s = farey_approx(a, order)
        if s.k < k_max and abs(s.eta) < eta_max:
            bad += 1
    return bad


def exceptional_measure(M: int, Delta: float, sample_count: int, seed: int, *,
                        epsilon: float = 0.05, epsilon_prime: float = 0.05, c: float = 1.0,
                        threads: int = 1, z: float = 1.96) -> MeasureEstimate:
    """Monte-Carlo measure of the alpha in [0, 1] failing the short-sum conditions.

    alpha fails when its Farey approximation of order ``Delta^(1/2 - eps')``
    has ``|eta| < c Delta^(eps-1)`` and ``k < c Delta^(5/6) M^(-1/3)``.
    Samples come from a Philox counter-based generator, so the estimate is a
    function of ``seed`` alone; ``threads`` only splits the work.
    """
    if sample_count < 1000:
        raise ValidationError("sample_count must be >= 1000")
    if Delta < 1:
        raise ValidationError("Delta must be >= 1")
    order = max(1, math.floor(Delta ** (0.5 - epsilon_prime)))
    k_max = c * Delta ** (5 / 6) * M ** (-1 / 3)
    eta_max = c * Delta ** (epsilon - 1)
    alphas = np.random.Generator(np.random.Philox(seed)).random(sample_count)
    if k_max <= 1:
        bad = 0
    elif threads > 1:
        chunks = np.array_split(alphas, threads)
        with ThreadPoolExecutor(threads) as pool:
            bad = sum(pool.map(lambda a: _count_failures(a, order, k_max, eta_max), chunks))
    else:
        bad = _count_failures(alphas, order, k_max, eta_max)
    n = sample_count
    p = bad / n
    # Wilson score interval
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return MeasureEstimate(p, max(0.0, centre - half), min(1.0, centre + half),
                           math.sqrt(p * (1 - p) / n), bad, n, order, k_max, eta_max)
