"""Oscillatory integrals ``int g(x) e(B sqrt(x) + iota x) dx``.

Three tools live here: a period-aware adaptive Gauss-Kronrod engine used as
the reference quadrature everywhere in the package, the first-order
saddle-point evaluation for phases of the form ``B sqrt(x) + iota x``, and a
probe comparing an integral without stationary point with the
partial-integration decay bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .arithmetic import compensated_sum
from .errors import ValidationError

# Gauss-Kronrod 10/21 nodes and weights (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(21)
GAUSS_W[1:10:2] = _WG
GAUSS_W[19:10:-2] = _WG

DEFAULT_RTOL = 1e-9
DEFAULT_BUDGET = 10**6
EDGE_SADDLE_FRACTION = 1e-6


def e(x):
    """Vectorised ``exp(2 pi i x)`` with ``x`` reduced mod 1 first."""
    x = np.asarray(x, dtype=np.float64)
    return np.exp(2j * np.pi * (x - np.round(x)))


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    evals: int
    converged: bool
    l1: float = 0.0

    def __complex__(self) -> complex:
        return self.value


def _gk_panels(func, lo: np.ndarray, hi: np.ndarray):
    x = panel_nodes(lo, hi)
    fx = np.asarray(func(x.ravel()), dtype=np.complex128).reshape(x.shape)
    return panel_rule(fx, lo, hi)


def make_panels(a: float, b: float, rate=0.0, breakpoints=(),
                cycles_per_panel: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Panel ends covering ``[a, b]``, split at breakpoints, one cycle or less each."""
    rate_fn = rate if callable(rate) else (lambda x, r=float(rate): np.full_like(x, abs(r)))
    cuts = np.unique(np.clip(np.asarray([a, *breakpoints, b], dtype=float), a, b))
    los, his = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        probe = np.array([lo, 0.5 * (lo + hi), hi])
        cycles = float(np.max(np.abs(rate_fn(probe)))) * (hi - lo)
        n = max(1, math.ceil(cycles / cycles_per_panel))
        edges = np.linspace(lo, hi, n + 1)
        los.append(edges[:-1])
        his.append(edges[1:])
    return np.concatenate(los), np.concatenate(his)


def panel_nodes(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """GK21 nodes of every panel, shape ``(panels, 21)``."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return mid[:, None] + half[:, None] * NODES[None, :]


def panel_rule(fx: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Kronrod value, QUADPACK error estimate and L1 mass per panel.

    ``fx`` has shape ``(..., panels, 21)``; leading axes are batched.
    """
    half = 0.5 * (hi - lo)
    k = half * (fx @ KRONROD_W)
    g = half * (fx @ GAUSS_W)
    resabs = np.abs(half) * (np.abs(fx) @ KRONROD_W)
    mean = (fx @ KRONROD_W) * 0.5
    resasc = np.abs(half) * (np.abs(fx - mean[..., None]) @ KRONROD_W)
    err = np.abs(k - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    # QUADPACK floor against round-off
    floor = 50 * np.finfo(float).eps * resabs
    err = np.where(floor > err, floor, err)
    return k, err, resabs


def integrate(func: Callable[[np.ndarray], np.ndarray], a: float, b: float, *,
              rate: Callable[[np.ndarray], np.ndarray] | float = 0.0,
              breakpoints=(), rtol: float = DEFAULT_RTOL, l1_floor: float = 1e-6,
              max_evals: int = DEFAULT_BUDGET, cycles_per_panel: float = 1.0) -> QuadResult:
    """Adaptive GK21 quadrature with panels sized to the local oscillation.

    ``rate(x)`` is the local frequency in cycles per unit length; the initial
    panels span at most ``cycles_per_panel`` cycles, i.e. at least 21 nodes
    per period.  Panels never straddle a breakpoint.  Convergence means the
    summed error estimate is below ``rtol * max(|I|, l1_floor * int|f|)``;
    the floor keeps the target meaningful when the integral cancels almost
    completely.
    """
    if not a < b:
        raise ValidationError(f"need a < b, got [{a}, {b}]")
    lo, hi = make_panels(a, b, rate, breakpoints, cycles_per_panel)
    k, err, l1 = _gk_panels(func, lo, hi)
    evals = 21 * len(lo)
    while True:
        total = compensated_sum(k)
        mass = float(np.sum(l1))
        # never ask for less than the round-off floor of the panel rule
        tol = max(rtol * max(abs(total), l1_floor * mass), 100 * np.finfo(float).eps * mass)
        total_err = float(np.sum(err))
        if total_err <= tol or evals >= max_evals:
            break
        # bisect every panel holding more than its length share of the budget
        share = tol * (hi - lo) / (b - a)
        bad = err > share
        if not bad.any():
            bad = err >= err.max()
        if evals + 42 * int(bad.sum()) > max_evals:
            order = np.argsort(-err)
            room = max(1, (max_evals - evals) // 42)
            bad = np.zeros_like(bad)
            bad[order[:room]] = True
        mids = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[bad], mids])
        new_hi = np.concatenate([mids, hi[bad]])
        nk, nerr, nl1 = _gk_panels(func, new_lo, new_hi)
        evals += 21 * len(new_lo)
        keep = ~bad
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        k = np.concatenate([k[keep], nk])
        err = np.concatenate([err[keep], nerr])
        l1 = np.concatenate([l1[keep], nl1])
        order = np.argsort(lo, kind="stable")
        lo, hi, k, err, l1 = lo[order], hi[order], k[order], err[order], l1[order]
    return QuadResult(total, total_err, evals, total_err <= tol, float(np.sum(l1)))


@dataclass(frozen=True)
class PhaseSpec:
    """Total phase ``B sqrt(x) + iota x`` (in cycles); ``F = |B| sqrt(M)``."""

    linear: float
    sqrt_coeff: float
    M: float = 1.0

    @property
    def F_scale(self) -> float:
        return abs(self.sqrt_coeff) * math.sqrt(self.M)

    def value(self, x):
        return self.sqrt_coeff * np.sqrt(x) + self.linear * np.asarray(x)

    def derivative(self, x):
        """``f'(x) + iota``."""
        if self.sqrt_coeff == 0:
            return np.full(np.shape(x), self.linear, dtype=float)
        return self.sqrt_coeff / (2 * np.sqrt(x)) + self.linear

    def second(self, x):
        if self.sqrt_coeff == 0:
            return np.zeros(np.shape(x))
        return -self.sqrt_coeff / (4 * np.asarray(x, dtype=float) ** 1.5)

    def rate(self, x):
        return np.abs(self.derivative(x))

    def conjugate(self) -> "PhaseSpec":
        return PhaseSpec(-self.linear, -self.sqrt_coeff, self.M)


@dataclass(frozen=True)
class AmplitudeSpec:
    """Amplitude ``g`` with the scale bounds used by the error estimates.

    ``G`` bounds ``|g|``; ``A0``, ``A1`` are the derivative scales
    (``g^(nu) << A0 A1^-nu``), ``rho`` the analyticity margin of the phase and
    ``P`` the smoothness order.
    """

    g: Callable[[np.ndarray], np.ndarray]
    G: float
    A0: float = 0.0
    A1: float = 1.0
    rho: float = math.inf
    P: int = 0
    breakpoints: tuple[float, ...] = ()

    def conjugate(self) -> "AmplitudeSpec":
        g = self.g
        return AmplitudeSpec(lambda x: np.conj(g(x)), self.G, self.A0, self.A1, self.rho, self.P,
                             self.breakpoints)


def osc_quadrature(g: AmplitudeSpec, phase: PhaseSpec, a: float, b: float, *,
                   rtol: float = DEFAULT_RTOL, max_evals: int = DEFAULT_BUDGET) -> QuadResult:
    """Reference value of ``int_a^b g(x) e(f(x) + iota x) dx``."""
    if a <= 0 and phase.sqrt_coeff != 0:
        raise ValidationError("sqrt phase needs a > 0")
    return integrate(lambda x: g.g(x) * e(phase.value(x)), a, b, rate=phase.rate,
                     breakpoints=g.breakpoints, rtol=rtol, max_evals=max_evals)


def saddle_locate(phase: PhaseSpec, a: float, b: float) -> float | None:
    """Zero of ``f'(x) + iota`` in ``[a, b]``, or ``None`` without a sign change."""
    ga, gb = float(phase.derivative(a)), float(phase.derivative(b))
    if ga == 0:
        return float(a)
    if gb == 0:
        return float(b)
    if (ga > 0) == (gb > 0):
        return None
    lo, hi = float(a), float(b)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        gx = float(phase.derivative(x))
        if gx == 0:
            return x
        if (gx > 0) == (ga > 0):
            lo = x
        else:
            hi = x
        step = x - gx / float(phase.second(x))
        x_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-13 * abs(x_new) or hi - lo <= 1e-13 * abs(x):
            return x_new
        x = x_new
    return x


def is_edge_saddle(x0: float, a: float, b: float) -> bool:
    tol = EDGE_SADDLE_FRACTION * (b - a)
    return abs(x0 - a) <= tol or abs(b - x0) <= tol


@dataclass
class SaddleResult:
    x0: float | None
    main_term: complex
    error_first: float
    error_edge: float
    quadrature_reference: complex | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def error_total(self) -> float:
        return self.error_first + self.error_edge


def saddle_eval(g: AmplitudeSpec, phase: PhaseSpec, smoothing, *, reference: bool = False,
                edge_widening: float = 2.0) -> SaddleResult:
    """First-order saddle-point value of ``int eta_J g e(f + iota x)`` over the smoothing window.

    ``smoothing`` supplies ``M_minus1``, ``M_2ext``, the averaging length
    ``V`` and order ``J``.  The plateau weight is taken as 1 at interior
    saddles and ramps linearly to 0 across the edge zones.  With
    ``reference=True`` the integral itself is also computed.
    """
    lo, hi = smoothing.M_minus1, smoothing.M_2ext
    V, J = smoothing.V, smoothing.J
    flip = phase.sqrt_coeff > 0 or (phase.sqrt_coeff == 0 and float(phase.second(lo)) < 0)
    ph, amp = (phase.conjugate(), g.conjugate()) if flip else (phase, g)
    F = ph.F_scale
    if F <= 0:
        raise ValidationError("phase has no sqrt part; F = 0")
    flags = []
    if F < 10:
        flags.append("F < 10")
    x0 = saddle_locate(ph, lo, hi)
    G = g.G
    if x0 is not None and is_edge_saddle(x0, lo, hi):
        flags.append("edge saddle")
    main = 0j
    delta = 0.0
    if x0 is not None:
        ramp = J * V
        dist = min(x0 - lo, hi - x0)
        xi = 1.0 if dist >= ramp else max(0.0, dist / ramp)
        delta = 0.0 if dist >= ramp else 1.0
        curv = float(ph.second(x0))
        main = (xi * complex(amp.g(np.array([x0]))[0]) / math.sqrt(curv)
                * complex(e(float(ph.value(x0)) + 0.125)))
    err_first = G * lo * F**-1.5 * (1 + delta * math.sqrt(F))
    pts = np.array([lo + j * V for j in range(J + 1)] + [hi - j * V for j in range(J + 1)])
    e_j = G / (np.abs(ph.derivative(pts)) + math.sqrt(F) / lo) ** (J + 1)
    err_edge = edge_widening * V**-J * float(np.sum(e_j))
    ref = None
    if reference:
        w = smoothing.weight()
        wg = AmplitudeSpec(lambda x: w(x) * amp.g(x), G, breakpoints=tuple(w.breakpoints()))
        ref = osc_quadrature(wg, ph, lo, hi).value
    if flip:
        main = main.conjugate()
        ref = None if ref is None else ref.conjugate()
    return SaddleResult(x0, main, err_first, err_edge, ref, flags)


def jm_decay_probe(g: AmplitudeSpec, phase: PhaseSpec, a: float, b: float, P: int,
                   B1: float | None = None) -> tuple[float, float]:
    """``(|int_a^b g e(phase)|, A0 (A1 B1)^-P (1 + A1/rho)^P (b - a))``."""
    if saddle_locate(phase, a, b) is not None:
        raise ValidationError("B1 not bounded away from zero: saddle inside [a, b]")
    if B1 is None:
        B1 = float(min(phase.rate(a), phase.rate(b)))
    if B1 <= 0:
        raise ValidationError("B1 not bounded away from zero")
    measured = abs(osc_quadrature(g, phase, a, b).value)
    bound = g.A0 * (g.A1 * B1) ** -P * (1 + g.A1 / g.rho) ** P * (b - a)
    return measured, bound
