"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import math
from fractions import Fraction

import mpmath as mp
import numpy as np


def brute_divisor_count(n: int) -> int:
    count = 0
    r = math.isqrt(n)
    for d in range(1, r + 1):
        if n % d == 0:
            count += 2
    if r * r == n:
        count -= 1
    return count


def mp_phase(n: int, h: int, k: int, eta_hi: float, eta_lo: float = 0.0) -> complex:
    """``e(n (h/k + eta))`` with the float offset taken as an exact rational."""
    eta = Fraction(eta_hi) + Fraction(eta_lo)
    x = (Fraction(n * h, k) + n * eta) % 1
    with mp.workdps(40):
        v = mp.expjpi(2 * mp.mpf(x.numerator) / x.denominator)
        return complex(v)


def farey_oracle(alphas: np.ndarray, Q: int):
    """Nearest admissible order-Q fraction by scanning every denominator.

    For each denominator k the candidates are floor(alpha k)/k and ceil(alpha k)/k;
    a non-reduced candidate is checked against the bound of its reduced form.
    Returns best (h, k) reduced, its distance, and the runner-up distance.
    """
    alphas = np.asarray(alphas, dtype=float)
    base = np.arange(1, Q + 1)
    ks = np.concatenate([base, base])
    scaled = alphas[:, None] * base[None, :]
    h = np.concatenate([np.floor(scaled), np.ceil(scaled)], axis=1)
    h = np.clip(h, 0, ks[None, :])
    dist = np.abs(alphas[:, None] - h / ks[None, :])
    g = np.gcd(h.astype(np.int64), ks[None, :])
    kr = ks[None, :] // g
    hr = h.astype(np.int64) // g
    ok = dist <= (1.0 / (kr * Q)) * (1 + 1e-12)
    # settle candidates within rounding of the admissibility edge exactly
    edge = np.argwhere(np.abs(dist * kr * Q - 1) < 1e-9)
    for i, j in edge.tolist():
        gap = abs(Fraction(float(alphas[i])) - Fraction(int(hr[i, j]), int(kr[i, j])))
        ok[i, j] = gap * int(kr[i, j]) * Q <= 1
    dist = np.where(ok, dist, np.inf)
    # the same reduced fraction appears at every multiple of its denominator;
    # keep only its first occurrence so runner-up distances are genuine
    dup = g > 1
    dup[:, Q:] |= h[:, Q:] == h[:, :Q]
    dist_unique = np.where(dup, np.inf, dist)
    order = np.argsort(dist_unique, axis=1, kind="stable")
    rows = np.arange(len(alphas))
    best = order[:, 0]
    second = np.take_along_axis(dist_unique, order[:, 1:2], axis=1)[:, 0]
    return hr[rows, best], kr[rows, best], dist_unique[rows, best], second


def mp_bessel_y0(z: float) -> float:
    with mp.workdps(30):
        return float(mp.bessely(0, z))


def mp_bessel_k0(z: float) -> float:
    with mp.workdps(30):
        return float(mp.besselk(0, z))
