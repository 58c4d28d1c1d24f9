"""Acceptance criteria, one test each; the terminal summary lists PASS/FAIL per criterion."""
import math
import subprocess
import sys

import mpmath as mp
import numpy as np
import pytest

from divexp.afe import afe_check, fit_exponent, run_sweep, sharpness_config, sweep_configs
from divexp.arithmetic import AlphaSplit
from divexp.expsum import SmoothingSpec, SumSpec, mean_square, smoothed_sum
from divexp.farey import exceptional_measure, farey_approx
from divexp.oscint import AmplitudeSpec, PhaseSpec, saddle_eval
from divexp.voronoi import voronoi_rhs
from divexp.weights import build_eta_J, build_partition

from oracles import farey_oracle

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


@pytest.mark.criterion(1, 10)
def test_sharpness_family(criterion):
    worst, norms = 0.0, []
    for M in (10**4, 9 * 10**4, 10**6):
        c = sharpness_config(M)
        r = afe_check(c.M1, c.M2, c.h, c.k, c.eta, M=c.M)
        q = math.sqrt(M)
        closed = q * complex(mp.expjpi(2 * (-1 / mp.mpf(q) - 1)))
        worst = max(worst, abs(r.rhs - closed) / abs(closed))
        norms.append(abs(r.lhs) / (q * math.log(M)))
    ok = worst <= 1e-10 and all(0.01 <= v <= 10 for v in norms)
    assert criterion.finish(ok, f"rhs rel err {worst:.1e}, |lhs|/(sqrt(M) log M) in "
                                f"[{min(norms):.3f}, {max(norms):.3f}]")


@pytest.mark.criterion(2, 30)
def test_farey_oracle_equivalence(criterion):
    alphas = np.linspace(0, 1, 10**4)
    values = alphas.tolist()
    bad = 0
    for Q in range(1, 101):
        h, k, dist, second = farey_oracle(alphas, Q)
        for i, a in enumerate(values):
            s = farey_approx(a, Q)
            eta = abs(s.eta + s.eta_lo)
            if s.k > Q or eta > (1 + 1e-12) / (s.k * Q):
                bad += 1
            elif second[i] > dist[i] * (1 + 1e-9) + 1e-15:
                bad += (s.h, s.k) != (h[i], k[i])
            else:
                # admissible tie: either neighbour, at the same distance
                bad += abs(eta - dist[i]) > 1e-9 * dist[i] + 1e-15
    assert criterion.finish(bad == 0, f"{bad} mismatches over 10^6 (alpha, Q) pairs")


@pytest.mark.criterion(3, 20)
def test_parseval_identity(criterion):
    worst = 0.0
    for M in (1, 16, 64, 512):
        integral, squares = mean_square(M)
        worst = max(worst, abs(integral - squares) / squares)
    integral, _ = mean_square(512)
    ratio = integral / (512 * math.log(512) ** 3)
    ok = worst <= 1e-10 and 0.01 <= ratio <= 100
    assert criterion.finish(ok, f"max rel diff {worst:.1e}, ratio at 512 = {ratio:.3f}")


VORONOI_SETS = [(1e4, 1, 0, 10), (1e4, 3, 1, 20), (5e4, 5, 2, 50), (1e5, 7, 3, 100),
                (2e4, 2, 1, 200)]


@pytest.mark.slow
@pytest.mark.criterion(4, 300)
def test_voronoi_self_consistency(criterion):
    worst_rel, worst_k = 0.0, 0.0
    for M, k, h, F in VORONOI_SETS:
        split = AlphaSplit.from_parts(h, k, math.sqrt(F / (k * k * M)))
        sm = SmoothingSpec.from_split(M, M**0.625, split)
        spec = SumSpec(1, 1, split, sm.weight())
        v = voronoi_rhs(spec, sm, math.ceil(50 * F) + 100)
        direct = smoothed_sum(spec)
        worst_rel = max(worst_rel, abs(v.total() - direct) / abs(direct))
        worst_k = max(worst_k, abs(v.k_sum) / (10 * M**-0.375))
    ok = worst_rel <= 1e-3 and worst_k < 1
    assert criterion.finish(ok, f"max rel err {worst_rel:.1e}, max |K-sum|/(10 M^-3/8) "
                                f"{worst_k:.1e}")


@pytest.mark.criterion(5, 120)
def test_saddle_accuracy(criterion):
    rng = np.random.default_rng(2024)
    within, top_ratios = 0, []
    for _ in range(20):
        M = 10 ** rng.uniform(4, 6)
        k = int(rng.integers(1, 6))
        F = 10 ** rng.uniform(3, 5)
        eta = math.sqrt(F / (k * k * M))
        split = AlphaSplit.from_parts(1 if k > 1 else 0, k, eta)
        sm = SmoothingSpec.from_split(M, M**0.625, split)
        g = AmplitudeSpec(lambda x: np.asarray(x, dtype=float) ** -0.25 + 0j,
                          sm.M_minus1**-0.25)
        # saddle placed inside the plateau
        n = rng.uniform(M, M + M**0.625) * k * k * eta * eta
        r = saddle_eval(g, PhaseSpec(eta, -2 * math.sqrt(n) / k, M), sm, reference=True)
        within += abs(r.main_term - r.quadrature_reference) <= 3 * (r.error_first + r.error_edge)
        if F >= 1e4:
            top_ratios.append(abs(r.quadrature_reference) / abs(r.main_term))
    ok = within == 20 and top_ratios and all(abs(q - 1) <= 0.1 for q in top_ratios)
    spread = max(abs(q - 1) for q in top_ratios) if top_ratios else float("nan")
    assert criterion.finish(bool(ok), f"{within}/20 within 3x error, top-decade "
                                      f"|ratio - 1| <= {spread:.3f} over {len(top_ratios)}")


@pytest.mark.slow
@pytest.mark.criterion(6, 900)
def test_afe_error_decay(criterion):
    reports = run_sweep(sweep_configs(10**6, 200, seed=2024))
    F = np.array([r.F for r in reports])
    norm = np.array([r.norm_classic for r in reports])
    medians = []
    for lo in (1, 2, 3):
        sel = (np.log10(F) >= lo) & (np.log10(F) < lo + 1)
        medians.append(float(np.median(norm[sel])))
    monotone = all(b <= a for a, b in zip(medians, medians[1:]))
    a = fit_exponent(reports)
    passed = sum(r.conditions.passed for r in reports)
    ok = monotone and a > 0 and all(not r.flags for r in reports)
    assert criterion.finish(ok, "decade medians " + ", ".join(f"{m:.4f}" for m in medians)
                            + f"; a = {a:.3f} on {passed} passed")


@pytest.mark.criterion(7, 10)
def test_weight_machinery(criterion):
    M, Delta, U = 10_000.0, 2_000.0, 150.0
    ok = True
    for J in (1, 2, 4, 8):
        w = build_eta_J(M, Delta, U, J)
        lo, hi = w.support
        x = np.linspace(lo - 500, hi + 500, 5001)
        v = w(x)
        ok &= w.support == (M - J * U, M + Delta + J * U)
        ok &= bool(np.all((v >= 0) & (v <= 1 + 1e-14)))
        ok &= bool(np.all(v[(x < lo) | (x > hi)] == 0))
        ok &= bool(np.all(v[(x >= M) & (x <= M + Delta)] == 1))
        grid = np.linspace(lo, hi, 1000)
        for j in range(1, J):
            ok &= bool(np.max(np.abs(w.derivative(grid, j))) <= 10 * math.factorial(j) * U**-j)
    part = build_partition(10**6, 10**6 ** 0.625, 8)
    a, b = part.covered
    pts = np.random.default_rng(0).uniform(a, b, 1000)
    err = float(np.max(np.abs(part.total(pts) - 1)))
    tail = part.tail_length
    ok &= err < 1e-12 and tail <= 4 * (10**6) ** 0.4
    assert criterion.finish(bool(ok), f"partition max |sum - 1| {err:.1e}, tail {tail:.1f} "
                                      f"<= {4 * (10**6) ** 0.4:.1f}")


@pytest.mark.criterion(8, 120)
def test_exceptional_measure(criterion):
    est = [exceptional_measure(M, M**0.625, 10**5, seed=8) for M in (10**4, 10**6, 10**8)]
    values = [e.estimate for e in est]
    bounds = [100 * M**-0.25 for M in (10**4, 10**6, 10**8)]
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    bounded = all(v <= c for v, c in zip(values, bounds))
    assert criterion.finish(decreasing and bounded,
                            "estimates " + ", ".join(f"{v:.2e}" for v in values))


CLI_RUNS = [
    ["sum", "--m1", "1", "--m2", "100000", "--alpha", "0.3183"],
    ["farey", "--alpha", "0.3", "--order", "5"],
    ["afe", "--sharpness", "--m", "10000"],
    ["voronoi", "--m", "1e4", "--delta", "500", "--k", "1", "--h", "0", "--eta", "0.03"],
    ["saddle", "--m", "9e4", "--delta", "4e4", "--k", "3", "--eta", "0.01", "--n", "91",
     "--reference"],
    ["measure", "--m", "1000000", "--samples", "20000", "--seed", "9"],
    ["sweep", "--m", "100000", "--count", "10", "--seed", "9"],
    ["meansq", "--m", "128"],
]


@pytest.mark.criterion(9, None)
def test_cli_determinism(criterion):
    differing = []
    for argv in CLI_RUNS:
        outs = set()
        for threads in ("1", "1", "4"):
            res = subprocess.run([sys.executable, "-m", "divexp.cli", *argv, "--threads", threads],
                                 capture_output=True, check=False)
            outs.add((res.returncode, res.stdout))
        if len(outs) != 1 or next(iter(outs))[0] != 0:
            differing.append(argv[0])
    assert criterion.finish(not differing, f"{len(CLI_RUNS)} commands x threads 1, 1, 4; "
                                           f"differing: {differing or 'none'}")
