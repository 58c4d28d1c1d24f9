"""Both sides of the approximate functional equation and the empirical bound checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arithmetic import AlphaSplit, FareyFraction, dd_from_rational, mod_inverse
from .errors import ValidationError
from .expsum import RangeNotice, preload_divisors, weighted_sum
from .farey import AFEParams, ConditionReport, beta_ladder, beta_of

ENDPOINT_SNAP = 1e-9
MIN_FIT_REPORTS = 10
MIN_FIT_DECADES = 2.0


@dataclass
class AFEReport:
    M: int
    M1: int
    M2: int
    h: int
    k: int
    eta: float
    lhs: complex
    rhs: complex
    err: float
    norm_classic: float
    norm_improved: dict[float, float]
    conditions: ConditionReport
    F: float
    flags: list[str] = field(default_factory=list)


def _snap_range(lo: Fraction, hi: Fraction) -> tuple[int, int]:
    """Integers in ``[lo, hi]``; an endpoint within ``1e-9`` relative of an integer counts."""
    n_lo, n_hi = math.ceil(lo), math.floor(hi)
    if n_lo - lo > 0 and n_lo - 1 >= lo - ENDPOINT_SNAP * max(1, abs(lo)):
        n_lo -= 1
    if hi - n_hi > 0 and n_hi + 1 <= hi + ENDPOINT_SNAP * max(1, abs(hi)):
        n_hi += 1
    return max(n_lo, 1), n_hi


def dual_range(M1: int, M2: int, split: AlphaSplit) -> tuple[int, int]:
    """First and last integer of ``[k^2 eta^2 M1, k^2 eta^2 M2]`` (closed, snapped)."""
    scale = split.k**2 * split.eta_exact() ** 2
    return _snap_range(scale * M1, scale * M2)


def beta_split(split: AlphaSplit) -> AlphaSplit:
    """``beta = -hbar/k - 1/(k^2 eta) mod 1`` as a split ``0/1 + beta`` in double-double."""
    hi, lo = dd_from_rational(beta_of(split))
    return AlphaSplit(FareyFraction(0, 1), hi, eta_lo=lo)


def afe_rhs(M1: int, M2: int, split: AlphaSplit) -> complex:
    """``(k|eta|)^-1 D(k^2 eta^2 M1, k^2 eta^2 M2; beta)``."""
    if split.eta == 0 and split.eta_lo == 0:
        raise ValidationError("eta must be non-zero")
    n_lo, n_hi = dual_range(M1, M2, split)
    if n_hi < n_lo:
        warnings.warn("dual interval contains no integers", RangeNotice, stacklevel=2)
        return 0j
    scale = 1.0 / (split.k * abs(float(split.eta_exact())))
    return scale * weighted_sum(n_lo, n_hi, beta_split(split))


def _hypothesis_flags(M: int, M1: int, M2: int, k: int, eta: float) -> list[str]:
    flags = []
    if not 1 <= k <= math.sqrt(M):
        flags.append("k outside [1, sqrt(M)]")
    if not 0 < abs(eta) <= k**-2:
        flags.append("|eta| > k^-2")
    if not M <= M1 < M2 <= 2 * M:
        flags.append("interval not inside [M, 2M]")
    return flags


def afe_check(M1: int, M2: int, h: int, k: int, eta, params: AFEParams = AFEParams(), *,
              M: int | None = None) -> AFEReport:
    """Both sides, the error and its normalizations for ``alpha = h/k + eta``.

    ``M`` defaults to ``M1``.  Hypothesis violations are flagged, not fatal.
    """
    if eta == 0:
        raise ValidationError("eta must be non-zero: the dual side is undefined")
    M = M1 if M is None else M
    if M < 2:
        raise ValidationError("M must be >= 2")
    split = AlphaSplit.from_parts(h % k, k, eta)
    lhs = weighted_sum(M1, M2, split)
    rhs = afe_rhs(M1, M2, split)
    err = abs(lhs - rhs)
    eta_f = float(eta)
    F = k * k * eta_f * eta_f * M
    root = math.sqrt(M)
    improved = {a: err / (root * F**-a) for a in params.a_candidates}
    conditions = beta_ladder(split, M, params)
    flags = _hypothesis_flags(M, M1, M2, k, eta_f)
    return AFEReport(M, M1, M2, h % k, k, eta_f, lhs, rhs, err, err / (root * math.log(M)),
                     improved, conditions, F, flags)


def fit_exponent(reports, *, passed_only: bool = True) -> float:
    """Least-squares ``a`` in ``err / sqrt(M) ~ F^-a``.

    Uses the reports whose Farey-ladder conditions passed unless
    ``passed_only`` is false; needs at least 10 of them spanning two decades
    of ``F``.
    """
    use = [r for r in reports if r.conditions.passed or not passed_only]
    if len(use) < MIN_FIT_REPORTS:
        raise ValidationError(f"need >= {MIN_FIT_REPORTS} reports, got {len(use)}")
    logF = np.log10([r.F for r in use])
    if logF.max() - logF.min() < MIN_FIT_DECADES:
        raise ValidationError("insufficient spread: F must span at least two decades")
    y = np.log10([r.err / math.sqrt(r.M) for r in use])
    if not np.all(np.isfinite(y)):
        raise ValidationError("zero error in a report; cannot take logarithms")
    slope = np.polyfit(logF, y, 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class PainotonReport:
    value: complex
    ratio: float            # |D(x1, x; alpha)| / sqrt(M)
    F: float
    b: float
    log_indicator: float    # (M k^2 eta^2)^b / log M
    length_ratio: float     # |x - x1| / (|eta|^-1/2 M^1/2)
    hypotheses_met: bool
    flags: tuple[str, ...] = ()


def painoton_check(x1: float, x: float, split: AlphaSplit, b: float, *,
                   M: float | None = None) -> PainotonReport:
    """``D(x1, x; alpha)`` over ``x1 < n <= x`` against ``sqrt(M)``.

    ``M`` defaults to ``x1``.  The report carries the hypothesis indicators so
    a sweep can aggregate ratios over admissible configurations.
    """
    if not 0 < b < 0.5:
        raise ValidationError("b must lie in (0, 1/2)")
    lo, hi = min(x1, x), max(x1, x)
    M = lo if M is None else M
    if M < 2:
        raise ValidationError("M must be >= 2")
    eta = abs(float(split.eta_exact()))
    k = split.k
    F = k * k * eta * eta * M
    n_lo, n_hi = math.floor(lo) + 1, math.floor(hi)
    value = weighted_sum(n_lo, n_hi, split) if n_hi >= n_lo else 0j
    flags = []
    if k > M**0.25 * (1 + 1e-12):
        flags.append("k > M^(1/4)")
    if eta > M**-0.25 / k * (1 + 1e-12):
        flags.append("|eta| > k^-1 M^(-1/4)")
    indicator = F**b / math.log(M) if F > 0 else 0.0
    if indicator < 1:
        flags.append("(M k^2 eta^2)^b < log M")
    if not (0.5 * M <= lo and hi <= 2 * M):
        flags.append("x, x1 not comparable to M")
    length = (hi - lo) / (eta**-0.5 * math.sqrt(M)) if eta > 0 else math.inf
    sign = 1 if x >= x1 else -1
    return PainotonReport(sign * value, abs(value) / math.sqrt(M), F, b, indicator, length,
                          not flags, tuple(flags))


@dataclass(frozen=True)
class SweepConfig:
    M: int
    M1: int
    M2: int
    h: int
    k: int
    eta: float


def random_coprime(rng: np.random.Generator, k: int) -> int:
    if k == 1:
        return 0
    while True:
        h = int(rng.integers(1, k))
        if math.gcd(h, k) == 1:
            return h


def sweep_configs(M: int, count: int, seed: int, *, F_range=(10.0, 1e4),
                  k_max: int = 10) -> list[SweepConfig]:
    """Deterministic draws satisfying ``1 <= k <= sqrt(M)`` and ``|eta| <= k^-2``.

    ``F = k^2 eta^2 M`` is log-uniform on ``F_range``; ``k`` is uniform on the
    denominators with ``k^2 F <= M`` (capped at ``k_max``); the sign of ``eta``
    and the interval ``M <= M1 < M2 <= 2M`` are random.
    """
    if count < 1:
        raise ValidationError("empty grid")
    lo, hi = F_range
    if not 0 < lo <= hi or hi > M:
        raise ValidationError("F range must satisfy 0 < F_min <= F_max <= M")
    rng = np.random.Generator(np.random.Philox(seed))
    out = []
    for _ in range(count):
        F = 10 ** rng.uniform(math.log10(lo), math.log10(hi))
        top = max(1, min(k_max, math.isqrt(int(M / F))))
        k = int(rng.integers(1, top + 1))
        h = random_coprime(rng, k)
        eta = math.sqrt(F / (k * k * M)) * (1 if rng.random() < 0.5 else -1)
        a, b = sorted(int(v) for v in rng.choice(M + 1, size=2, replace=False) + M)
        out.append(SweepConfig(M, a, b, h, k, eta))
    return out


def run_sweep(configs, params: AFEParams = AFEParams()) -> list[AFEReport]:
    if not configs:
        raise ValidationError("empty grid")
    lo = min(c.M1 for c in configs)
    hi = max(c.M2 for c in configs)
    preload_divisors(lo, hi)
    return [afe_check(c.M1, c.M2, c.h, c.k, c.eta, params, M=c.M) for c in configs]


def sharpness_config(M: int) -> SweepConfig:
    """``M = q^2``, ``k = q``, ``h = 1``, ``eta = 1/M`` on ``[M, M + sqrt(M)/2]``."""
    q = math.isqrt(M)
    if q * q != M or q < 2:
        raise ValidationError("sharpness family needs M a perfect square >= 4")
    return SweepConfig(M, M, M + q // 2, 1, q, 1.0 / M)


__all__ = [
    "AFEReport", "afe_rhs", "afe_check", "fit_exponent", "painoton_check", "PainotonReport",
    "dual_range", "beta_split", "SweepConfig", "sweep_configs", "run_sweep",
    "sharpness_config", "mod_inverse",
]
