"""Truncated Voronoi expansion of smoothed divisor sums, with the Bessel kernels.

For ``alpha = h/k + eta`` and a smooth weight ``w``,

    sum d(n) e(n h/k) e(eta n) w(n)
        = k^-1 int (log x + 2 gamma - 2 log k) e(eta x) w(x) dx
        + k^-1 sum_n d(n) int [-2 pi e(-n hbar/k) Y0(4 pi sqrt(nx)/k)
                               + 4 e(n hbar/k) K0(4 pi sqrt(nx)/k)] e(eta x) w(x) dx.

Every Bessel integral is taken on one shared panel grid sized for the
fastest-oscillating retained term, so the weight and ``e(eta x)`` are
evaluated once; terms whose panel error estimate misses the tolerance are
redone with the adaptive engine.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arithmetic import compensated_sum
from .errors import ValidationError
from .expsum import EULER_GAMMA, SmoothingSpec, SumSpec, divisor_counts, main_term_integral
from .oscint import DEFAULT_RTOL, e, integrate, make_panels, panel_nodes, panel_rule

# Crossovers for the Bessel kernels (see the function docstrings).
Y0_SERIES_MAX = 8.0
Y0_MILLER_MAX = 25.0
K0_SERIES_MAX = 2.0
TAIL_PROBE_THRESHOLD = 1.0
_EPS = np.finfo(float).eps


def _as_positive(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    if arr.size and not np.all(arr > 0):
        raise ValidationError("domain error: Bessel argument must be positive")
    return np.atleast_1d(arr), arr.ndim == 0


def _y0_series(z: np.ndarray) -> np.ndarray:
    q = 0.25 * z * z
    term = np.ones_like(z)
    j0 = np.ones_like(z)
    acc = np.zeros_like(z)
    harmonic = 0.0
    for m in range(1, 60):
        term = term * (-q) / (m * m)
        harmonic += 1.0 / m
        j0 += term
        acc -= harmonic * term
        if np.all(np.abs(term) * harmonic < 1e-17 * np.maximum(np.abs(j0), 1e-3)):
            break
    return (2 / np.pi) * ((np.log(0.5 * z) + EULER_GAMMA) * j0 + acc)


def _y0_miller(z: np.ndarray) -> np.ndarray:
    # Backward recurrence for J_n, normalised by J0 + 2 sum J_2k = 1, then
    # Y0 = (2/pi)(log(z/2) + gamma) J0 - (4/pi) sum (-1)^k J_2k / k.
    top = 2 * (int(np.max(z)) // 2) + 60
    j_next = np.zeros_like(z)
    j_cur = np.full_like(z, 1e-200)
    norm = np.zeros_like(z)
    neumann = np.zeros_like(z)
    for n in range(top, 0, -1):
        j_prev = (2 * n / z) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        m = n - 1
        if m > 0 and m % 2 == 0:
            norm += 2 * j_cur
            neumann += (-1) ** (m // 2) * j_cur / (m // 2)
    norm += j_cur
    j0 = j_cur / norm
    return (2 / np.pi) * (np.log(0.5 * z) + EULER_GAMMA) * j0 - (4 / np.pi) * neumann / norm


def _hankel_pq(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hankel asymptotic P, Q series for order 0, summed to double precision."""
    inv = 1.0 / (8.0 * z)
    P = np.ones_like(z)
    Q = np.zeros_like(z)
    coef = np.ones_like(z)
    for m in range(1, 60):
        coef = coef * (-(2 * m - 1) ** 2) * inv / m
        if m % 2:
            Q += (-1) ** ((m - 1) // 2) * coef
        else:
            P += (-1) ** (m // 2) * coef
        if np.all(np.abs(coef) < 1e-17):
            break
    return P, Q


def _y0_hankel(z: np.ndarray) -> np.ndarray:
    P, Q = _hankel_pq(z)
    s, c = np.sin(z), np.cos(z)
    # sin(z - pi/4), cos(z - pi/4) without rounding z - pi/4
    sin_chi = (s - c) / math.sqrt(2.0)
    cos_chi = (s + c) / math.sqrt(2.0)
    return np.sqrt(2 / (np.pi * z)) * (P * sin_chi + Q * cos_chi)


def bessel_Y0(z):
    """Bessel function of the second kind, order 0, for ``z > 0``.

    Power series for ``z <= 8``, Miller backward recurrence with the Neumann
    series for ``8 < z <= 25`` and the Hankel asymptotic expansion above.
    """
    arr, scalar = _as_positive(z)
    out = np.empty_like(arr)
    small = arr <= Y0_SERIES_MAX
    mid = (arr > Y0_SERIES_MAX) & (arr <= Y0_MILLER_MAX)
    large = arr > Y0_MILLER_MAX
    if small.any():
        out[small] = _y0_series(arr[small])
    if mid.any():
        out[mid] = _y0_miller(arr[mid])
    if large.any():
        out[large] = _y0_hankel(arr[large])
    return float(out[0]) if scalar else out


_K0_NODES = 96


def bessel_K0(z):
    """Modified Bessel function of the second kind, order 0, for ``z > 0``.

    Power series for ``z <= 2``.  Above that the trapezoid rule on
    ``int_0^inf exp(-z cosh t) dt`` with the step shrinking like
    ``z^(-1/2)``, which keeps the relative error near machine precision
    with a fixed node count; the result underflows to 0 past ``z ~ 745``.
    """
    arr, scalar = _as_positive(z)
    out = np.empty_like(arr)
    small = arr <= K0_SERIES_MAX
    if small.any():
        x = arr[small]
        q = 0.25 * x * x
        term = np.ones_like(x)
        i0 = np.ones_like(x)
        acc = np.zeros_like(x)
        harmonic = 0.0
        for m in range(1, 40):
            term = term * q / (m * m)
            harmonic += 1.0 / m
            i0 += term
            acc += harmonic * term
        out[small] = -(np.log(0.5 * x) + EULER_GAMMA) * i0 + acc
    big = ~small
    if big.any():
        x = arr[big]
        t_max = np.arccosh(1.0 + 50.0 / x)
        h = t_max / _K0_NODES
        t = h[:, None] * np.arange(_K0_NODES + 1)[None, :]
        # cosh t - 1 = 2 sinh^2(t/2), exact for small t
        vals = np.exp(-2.0 * x[:, None] * np.sinh(0.5 * t) ** 2)
        vals[:, 0] *= 0.5
        out[big] = np.exp(-x) * h * vals.sum(axis=1)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class Y0Expansion:
    """``Y0(z) ~ plus e^{i(z - pi/4)} + minus e^{-i(z - pi/4)}`` with remainder ``O(z^-5/2)``."""

    z: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    remainder_scale: np.ndarray

    @property
    def value(self) -> np.ndarray:
        chi = self.z - np.pi / 4
        return np.real(self.plus * np.exp(1j * chi) + self.minus * np.exp(-1j * chi))


def y0_asymptotic(z, include_second_order: bool = True) -> Y0Expansion:
    """Two leading terms of the oscillatory expansion of ``Y0``.

    The leading pair is ``-+ i (2 pi z)^(-1/2)``; the second-order term is
    ``-(8z)^-1 (2 pi z)^(-1/2)`` on both exponentials, i.e.
    ``-(1/8z) sqrt(2/(pi z)) cos(z - pi/4)``.
    """
    zz = np.asarray(z, dtype=float)
    if np.any(zz < 1):
        raise ValidationError("y0_asymptotic needs z >= 1")
    lead = 1.0 / np.sqrt(2 * np.pi * zz)
    plus = -1j * lead
    minus = 1j * lead
    if include_second_order:
        corr = -lead / (8 * zz)
        plus = plus + corr
        minus = minus + corr
        rem = zz**-2.5
    else:
        rem = zz**-1.5
    return Y0Expansion(zz, plus, minus, rem)


@dataclass
class TermRecord:
    n: np.ndarray
    d: np.ndarray
    y_integral: np.ndarray
    k_integral: np.ndarray


@dataclass
class VoronoiExpansion:
    main_integral: complex
    y_sum: complex
    k_sum: complex
    tail_estimate: float
    N_trunc: int
    terms: TermRecord | None = None
    flagged: list[int] = field(default_factory=list)

    def total(self) -> complex:
        return self.main_integral + self.y_sum + self.k_sum

    def write_terms_csv(self, stream) -> None:
        """Per-term diagnostics: ``n, d, Re/Im of the Y and K integrals``."""
        if self.terms is None:
            raise ValidationError("expansion was computed without term records")
        out = csv.writer(stream, lineterminator="\n")
        out.writerow(["n", "d", "y_re", "y_im", "k_re", "k_im"])
        t = self.terms
        for i in range(len(t.n)):
            y, kk = t.y_integral[i], t.k_integral[i]
            out.writerow([int(t.n[i]), int(t.d[i]), f"{y.real:.17g}", f"{y.imag:.17g}",
                          f"{kk.real:.17g}", f"{kk.imag:.17g}"])


@dataclass(frozen=True)
class _Grid:
    lo: np.ndarray
    hi: np.ndarray
    sqrt_x: np.ndarray  # (panels, 21)
    base: np.ndarray    # w(x) e(eta x) at the nodes
    a: float
    b: float


def _grid(spec: SumSpec, n_max: int, *, cycles_per_panel: float = 1.0) -> _Grid:
    w = spec.weight
    a, b = w.support
    if a <= 0:
        raise ValidationError("weight support must lie in x > 0")
    k, eta = spec.split.k, spec.split.eta + spec.split.eta_lo
    rate = lambda x: abs(eta) + math.sqrt(n_max) / (k * np.sqrt(x))  # noqa: E731
    lo, hi = make_panels(a, b, rate, tuple(w.breakpoints()), cycles_per_panel)
    x = panel_nodes(lo, hi)
    return _Grid(lo, hi, np.sqrt(x), w(x) * e(eta * x), a, b)


def _batched_integrals(kernel, n: np.ndarray, grid: _Grid, rtol: float):
    """Integrals ``int kernel(z) w e(eta x)`` with ``z = 4 pi sqrt(n x)/k`` on the shared grid."""
    z = kernel.scale * np.sqrt(n.astype(float))[:, None, None] * grid.sqrt_x[None]
    fx = kernel(z) * grid.base[None]
    val, err, l1 = panel_rule(fx, grid.lo, grid.hi)
    value = val.sum(axis=-1)
    mass = l1.sum(axis=-1)
    error = err.sum(axis=-1)
    tol = np.maximum(rtol * np.maximum(np.abs(value), 1e-6 * mass), 100 * _EPS * mass)
    return value, error <= tol


class _Kernel:
    def __init__(self, func, scale):
        self.func = func
        self.scale = scale

    def __call__(self, z):
        return self.func(z.ravel()).reshape(z.shape)


def _adaptive_term(spec: SumSpec, func, scale: float, n: int, rtol: float):
    w = spec.weight
    k, eta = spec.split.k, spec.split.eta + spec.split.eta_lo
    a, b = w.support
    f = lambda x: func(scale * math.sqrt(n) * np.sqrt(x)) * w(x) * e(eta * x)  # noqa: E731
    rate = lambda x: abs(eta) + math.sqrt(n) / (k * np.sqrt(x))  # noqa: E731
    return integrate(f, a, b, rate=rate, breakpoints=tuple(w.breakpoints()), rtol=rtol)


def _term_integrals(spec: SumSpec, func, n: np.ndarray, grid: _Grid, *, rtol: float,
                    threads: int, batch: int):
    k = spec.split.k
    kernel = _Kernel(func, 4 * np.pi / k)
    values = np.zeros(len(n), dtype=complex)
    ok = np.ones(len(n), dtype=bool)
    nodes = grid.sqrt_x.size
    batch = max(1, min(batch, 2_000_000 // max(nodes, 1)))
    blocks = [slice(i, min(i + batch, len(n))) for i in range(0, len(n), batch)]

    def run(sl):
        values[sl], ok[sl] = _batched_integrals(kernel, n[sl], grid, rtol)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, blocks))
    else:
        for sl in blocks:
            run(sl)
    flagged = []
    for i in np.flatnonzero(~ok).tolist():
        res = _adaptive_term(spec, func, kernel.scale, int(n[i]), rtol)
        values[i] = res.value
        if not res.converged:
            flagged.append(int(n[i]))
    return values, flagged


def _k0_negligible_from(spec: SumSpec, N: int) -> int:
    """First n whose K-term is below double-precision underflow for every larger n."""
    k = spec.split.k
    a, b = spec.weight.support
    for n in range(1, N + 1):
        z = 4 * np.pi * math.sqrt(n * a) / k
        if z > 745:
            return n
    return N + 1


def tail_from_terms(n: np.ndarray, mags: np.ndarray) -> float:
    """Estimate ``sum_{m > N} |term_m|`` from the last decade of term magnitudes.

    Fits a power law to the block-averaged magnitudes over ``[N/10, N]``; when
    the fitted decay is slower than ``n^-1.05`` (or there are too few terms)
    the whole last-decade mass is returned instead, which is conservative.
    """
    N = int(n[-1]) if len(n) else 0
    if N < 20:
        return float(np.sum(mags[len(mags) // 2:]))
    sel = n >= N / 10
    nn, mm = n[sel].astype(float), mags[sel]
    edges = np.geomspace(nn[0], N + 1, 11)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (nn >= lo) & (nn < hi)
        if m.sum() and mm[m].sum() > 0:
            xs.append(math.log(nn[m].mean()))
            ys.append(math.log(mm[m].mean()))
    decade = float(np.sum(mm))
    if len(xs) < 3:
        return decade
    slope, icpt = np.polyfit(xs, ys, 1)
    if slope >= -1.05:
        return decade
    density = math.exp(icpt + slope * math.log(N))
    return float(min(decade, density * N / (-slope - 1)))


def default_n_trunc(spec: SumSpec, M: float) -> int:
    k, eta = spec.split.k, spec.split.eta + spec.split.eta_lo
    return math.ceil(50 * k * k * eta * eta * M) + 100


def voronoi_rhs(spec: SumSpec, smoothing: SmoothingSpec, N_trunc: int | None = None, *,
                rtol: float = DEFAULT_RTOL, keep_terms: bool = False, threads: int = 1,
                batch: int = 64) -> VoronoiExpansion:
    """Main integral plus the first ``N_trunc`` Y- and K-terms of the Voronoi expansion."""
    if spec.weight is None:
        raise ValidationError("voronoi_rhs needs a weighted SumSpec")
    if N_trunc is None:
        N_trunc = default_n_trunc(spec, smoothing.M)
    if N_trunc < 1:
        raise ValidationError("N_trunc must be >= 1")
    split = spec.split
    k, h_bar = split.k, split.h_bar
    eta = split.eta + split.eta_lo
    main = main_term_integral(smoothing.M, smoothing.Delta, k, eta, spec.weight, rtol=rtol)
    flagged = [] if main.converged else [0]
    n = np.arange(1, N_trunc + 1, dtype=np.int64)
    d = divisor_counts(1, N_trunc).astype(float)
    grid = _grid(spec, N_trunc)
    y_int, bad = _term_integrals(spec, bessel_Y0, n, grid, rtol=rtol, threads=threads,
                                 batch=batch)
    flagged += bad
    r = (n * h_bar) % k
    y_terms = (-2 * np.pi / k) * d * e(-r / k) * y_int
    k_int = np.zeros(N_trunc, dtype=complex)
    stop = min(_k0_negligible_from(spec, N_trunc), N_trunc + 1)
    if stop > 1:
        k_int[:stop - 1], bad = _term_integrals(spec, bessel_K0, n[:stop - 1], grid, rtol=rtol,
                                                threads=threads, batch=batch)
        flagged += bad
    k_terms = (4 / k) * d * e(r / k) * k_int
    if flagged:
        warnings.warn(f"quadrature flagged for terms {flagged[:10]}", RuntimeWarning,
                      stacklevel=2)
    tail = tail_from_terms(n, np.abs(y_terms) + np.abs(k_terms))
    terms = TermRecord(n, d.astype(np.int64), y_int, k_int) if keep_terms else None
    return VoronoiExpansion(main.value, compensated_sum(y_terms), compensated_sum(k_terms),
                            tail, N_trunc, terms, flagged)


def tail_probe(spec: SumSpec, smoothing: SmoothingSpec, c3: float = 4.0, *,
               rtol: float = 1e-6, threshold: float = TAIL_PROBE_THRESHOLD) -> float:
    """``sum |Y-term|`` over ``c3 F <= n <= 4 c3 F`` with ``F = k^2 eta^2 M``.

    Warns when the result exceeds ``threshold``.
    """
    if c3 < 2:
        raise ValidationError("c3 must be >= 2")
    if spec.weight is None:
        raise ValidationError("tail_probe needs a weighted SumSpec")
    k = spec.split.k
    eta = spec.split.eta + spec.split.eta_lo
    F = k * k * eta * eta * smoothing.M
    lo, hi = max(1, math.ceil(c3 * F)), max(1, math.floor(4 * c3 * F))
    if hi < lo:
        return 0.0
    n = np.arange(lo, hi + 1, dtype=np.int64)
    d = divisor_counts(lo, hi).astype(float)
    grid = _grid(spec, hi)
    y_int, _ = _term_integrals(spec, bessel_Y0, n, grid, rtol=rtol, threads=1, batch=64)
    value = float(math.fsum((2 * np.pi / k * d * np.abs(y_int)).tolist()))
    if value > threshold:
        warnings.warn(f"tail probe {value:.3g} exceeds {threshold}", RuntimeWarning,
                      stacklevel=2)
    return value


def expansion_remainder_sum(spec: SumSpec, smoothing: SmoothingSpec, N: int) -> float:
    """``k^-1 sum_{n <= N} 2 pi d(n) |int (Y0 - two-term expansion)(z) w e(eta x) dx|``.

    Measures what replacing ``Y0`` by its two-term oscillatory expansion costs
    across the first ``N`` terms.
    """
    if spec.weight is None:
        raise ValidationError("needs a weighted SumSpec")
    k = spec.split.k
    n = np.arange(1, N + 1, dtype=np.int64)
    d = divisor_counts(1, N).astype(float)
    grid = _grid(spec, N)
    remainder = lambda z: bessel_Y0(z) - y0_asymptotic(z).value  # noqa: E731
    # diagnostic only: the shared-grid values are accurate to round-off, so no fallback
    kernel = _Kernel(remainder, 4 * np.pi / k)
    vals = np.concatenate([_batched_integrals(kernel, n[i:i + 64], grid, 1e-6)[0]
                           for i in range(0, N, 64)])
    return float(math.fsum((2 * np.pi / k * d * np.abs(vals)).tolist()))


__all__ = [
    "Y0_SERIES_MAX", "Y0_MILLER_MAX", "K0_SERIES_MAX", "bessel_Y0", "bessel_K0",
    "Y0Expansion", "y0_asymptotic", "TermRecord", "VoronoiExpansion", "voronoi_rhs",
    "tail_probe", "tail_from_terms", "default_n_trunc", "expansion_remainder_sum",
]
