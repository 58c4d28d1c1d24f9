import math
import warnings

import numpy as np
import pytest

from divexp.arithmetic import AlphaSplit, FareyFraction, divisor_sieve
from divexp.errors import ValidationError
from divexp.expsum import (EULER_GAMMA, RangeNotice, SmoothingSpec, SumSpec, main_term_integral,
                           mean_square, raw_sum, smoothed_sum, weighted_sum)
from divexp.farey import farey_approx
from divexp.weights import build_eta_J, build_partition, indicator

from oracles import brute_divisor_count, mp_phase


def _split(h, k, eta):
    return AlphaSplit(FareyFraction(h, k), eta)


class TestRawSum:
    def test_alpha_zero(self):
        assert raw_sum(SumSpec(1, 100, _split(0, 1, 0.0))) == 482

    def test_single_term(self):
        s = _split(2, 7, 1.3e-5)
        n0 = 5040
        assert raw_sum(SumSpec(n0, n0, s)) == pytest.approx(60 * mp_phase(n0, 2, 7, 1.3e-5), abs=1e-12)

    def test_half(self):
        assert raw_sum(SumSpec(1, 4, _split(1, 2, 0.0))) == pytest.approx(-1 + 2 - 2 + 3, abs=1e-14)

    def test_term_by_term_oracle(self):
        s = _split(3, 11, -2.5e-4)
        direct = sum(brute_divisor_count(n) * mp_phase(n, 3, 11, -2.5e-4) for n in range(900, 1300))
        assert raw_sum(SumSpec(900, 1299, s)) == pytest.approx(direct, abs=1e-10)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(4)
        total = int(divisor_sieve(10**5, 10**5 + 5000).values.sum())
        for _ in range(20):
            s = farey_approx(float(rng.random()), 300)
            assert abs(raw_sum(SumSpec(10**5, 10**5 + 5000, s))) <= total

    def test_integer_total_for_many_ranges(self):
        for lo, hi in [(1, 1), (7, 19), (1000, 4321), (10**6, 10**6 + 999)]:
            expected = int(divisor_sieve(lo, hi).values.sum())
            assert raw_sum(SumSpec(lo, hi, _split(0, 1, 0.0))) == expected

    def test_empty_range_notice(self):
        with pytest.warns(RangeNotice):
            assert weighted_sum(5, 4, _split(0, 1, 0.0)) == 0

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            SumSpec(10, 9, _split(0, 1, 0.0))


class TestSmoothedSum:
    def test_indicator_equals_raw(self):
        s = _split(1, 5, 3e-4)
        assert smoothed_sum(SumSpec(2000, 3000, s, indicator(2000, 3000))) == raw_sum(
            SumSpec(2000, 3000, s))

    def test_no_integers_in_support(self):
        with pytest.warns(RangeNotice):
            assert smoothed_sum(SumSpec(10, 11, _split(0, 1, 0.0), indicator(10.2, 10.8))) == 0

    def test_eta_J_direct_evaluation(self):
        w = build_eta_J(5000.0, 400.0, 37.5, 3)
        direct = sum(brute_divisor_count(n) * float(w(np.array([float(n)]))[0])
                     for n in range(math.ceil(w.support[0]), math.floor(w.support[1]) + 1))
        got = smoothed_sum(SumSpec(5000, 5400, _split(0, 1, 0.0), w))
        assert got.real == pytest.approx(direct, rel=1e-13)
        assert got.imag == 0

    def test_needs_weight(self):
        with pytest.raises(ValidationError):
            smoothed_sum(SumSpec(1, 2, _split(0, 1, 0.0)))

    def test_partition_recovers_raw_sum(self):
        M = 10**6
        Delta = M**0.625
        part = build_partition(M, Delta, 8)
        s = farey_approx(0.318309886, 2000)
        pieces = sum(smoothed_sum(SumSpec(M, int(M + Delta), s, w)) for w in part)
        whole = weighted_sum(M, math.floor(M + Delta), s)
        lo, hi = part.covered
        d = divisor_sieve(M, math.floor(M + Delta)).values
        n = np.arange(M, M + len(d))
        tails = int(d[(n < lo) | (n > hi)].sum())
        assert abs(whole - pieces) <= tails
        assert tails <= 2 * M**0.45 * math.log(M)

    def test_short_sum_probe(self):
        rng = np.random.default_rng(1)
        ratios = []
        for M in (10**5, 10**6, 10**7):
            D = M**0.625
            Q = math.floor(D**0.45)
            k_max, eta_max = D ** (5 / 6) * M ** (-1 / 3), D**-0.95
            w = build_eta_J(M + D / 4, D / 2, D / 8, 2)
            kept = 0
            while kept < 30:
                s = farey_approx(float(rng.random()), Q)
                if s.k < k_max and abs(s.eta) < eta_max:
                    continue
                kept += 1
                value = smoothed_sum(SumSpec(M, int(M + D), s, w))
                ratios.append(abs(value) / (D ** (1 / 6) * M ** (1 / 3 + 0.05)))
        assert max(ratios) <= 5


class TestSmoothingSpec:
    def test_scales(self):
        s = _split(1, 3, 1e-3)
        sm = SmoothingSpec.from_split(10**5, 1000.0, s, d=0.01, J=4)
        F = 9 * 1e-6 * 1e5
        assert sm.U == pytest.approx(math.sqrt(1e5) / math.sqrt(1e-3) * F**0.01, rel=1e-14)
        assert sm.M_minus1 == pytest.approx(1e5 - 4 * sm.U)
        assert sm.M_2ext == pytest.approx(1e5 + 1000 + 4 * sm.U)
        assert sm.V == sm.U and sm.u_small

    def test_weight_window(self):
        sm = SmoothingSpec.build(10**4, 500.0, 100.0, 3)
        w = sm.weight()
        assert w.support == pytest.approx((sm.M_minus1, sm.M_2ext))
        assert w.plateau == pytest.approx((10**4, 10**4 + 500))

    def test_negative_lower_edge(self):
        with pytest.raises(ValidationError, match="reduce J or U"):
            SmoothingSpec.build(1000, 10.0, 400.0, 3)

    def test_zero_eta(self):
        with pytest.raises(ValidationError):
            SmoothingSpec.from_split(1000, 10.0, _split(0, 1, 0.0))


class TestMainTerm:
    def test_closed_form(self):
        a, b = 100.0, 200.0
        F = lambda x: x * math.log(x) - x + 2 * EULER_GAMMA * x  # noqa: E731
        r = main_term_integral(100, 100, 1, 0.0, indicator(a, b))
        assert r.converged
        assert r.value == pytest.approx(F(b) - F(a), rel=1e-12)

    def test_log_k_shift(self):
        w = indicator(1000.0, 1500.0)
        one = main_term_integral(1000, 500, 1, 0.0, w).value
        three = main_term_integral(1000, 500, 3, 0.0, w).value
        assert three == pytest.approx((one - 2 * math.log(3) * 500) / 3, rel=1e-12)

    def test_far_eta_bound(self):
        rng = np.random.default_rng(1)
        ratios = []
        for _ in range(40):
            M = 10 ** rng.uniform(4, 7)
            D = M ** rng.uniform(0.3, 0.625)
            k = int(rng.integers(1, 20))
            eta = D**-0.95 * 10 ** rng.uniform(0, 2) * rng.choice([-1, 1])
            v = main_term_integral(M, D, k, eta, build_eta_J(M + D / 4, D / 2, D / 8, 2)).value
            ratios.append(abs(v) / (math.log(M) / k))
        assert max(ratios) <= 100

    def test_short_interval_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            M = 10 ** rng.uniform(4, 7)
            k = int(rng.integers(1, 20))
            D = min(M**0.625, k**1.2 * M**0.4)
            eta = 10 ** rng.uniform(-8, -1)
            v = main_term_integral(M, D, k, eta, indicator(M, M + D)).value
            assert abs(v) <= 50 * D ** (1 / 6) * M ** (1 / 3 + 0.01)

    def test_support_must_be_positive(self):
        with pytest.raises(ValidationError):
            main_term_integral(1, 1, 1, 0.0, indicator(-1.0, 1.0))


class TestMeanSquare:
    def test_one(self):
        assert mean_square(1) == (1.0, 1)

    @pytest.mark.parametrize("M", [16, 64, 512])
    def test_sides_agree(self, M):
        integral, squares = mean_square(M)
        assert squares == sum(brute_divisor_count(n) ** 2 for n in range(1, M + 1))
        assert integral == pytest.approx(squares, rel=1e-10)

    def test_growth(self):
        integral, _ = mean_square(1000)
        assert 0.01 <= integral / (1000 * math.log(1000) ** 3) <= 100

    def test_guard(self):
        with pytest.raises(ValidationError):
            mean_square(10**4 + 1)


class TestShortIntervalScale:
    @pytest.mark.parametrize("M", [10**4, 10**5, 10**6, 10**7, 10**8])
    def test_upper_bound_at_inverse_root_offset(self, M):
        # D(M, M + M^(3/4)/4; M^(-1/2)) stays within a constant of sqrt(M)
        split = AlphaSplit.from_parts(0, 1, M**-0.5)
        v = weighted_sum(M, M + int(M**0.75 / 4), split)
        assert abs(v) <= 10 * math.sqrt(M)
