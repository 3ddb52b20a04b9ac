import math

import numpy as np
import pytest

from charlierbd.special import (adaptive_support_bound, chen_stein_gap,
                                falling_factorial, lower_tail,
                                poisson_central_moment, poisson_pmf,
                                poisson_weight, stirling2, touchard,
                                upper_tail)


def brute_tail(q, c, x_max=400):
    # direct finite summation, independent of the gamma-function route
    return sum(poisson_weight(q, m) for m in range(max(c + 1, 0), x_max + 1))


class TestPoissonWeight:
    def test_seed_values(self):
        assert poisson_weight(1.0, 0) == pytest.approx(math.exp(-1.0))
        assert poisson_weight(2.0, 2) == pytest.approx(2 * math.exp(-2.0))

    def test_normalization(self):
        s = sum(poisson_weight(5.0, x) for x in range(201))
        assert s == pytest.approx(1.0, abs=1e-12)

    def test_large_x_no_overflow(self):
        v = poisson_weight(10.0, 500)
        assert 0.0 <= v < 1e-300 or v == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            poisson_weight(-1.0, 0)

    def test_pmf_vector(self):
        p = poisson_pmf(3.0, 50)
        assert p.shape == (51,)
        assert p[4] == pytest.approx(poisson_weight(3.0, 4))


class TestTails:
    def test_basic_values(self):
        assert upper_tail(1.0, 0) == pytest.approx(1 - math.exp(-1.0))
        assert upper_tail(3.0, -1) == 1.0
        assert upper_tail(0.0, 2) == 0.0
        assert lower_tail(1.0, 0) == pytest.approx(math.exp(-1.0))
        assert lower_tail(2.0, -1) == 0.0

    def test_lower_tail_direct_sum(self):
        want = sum(poisson_weight(4.0, m) for m in range(4))
        assert lower_tail(4.0, 3) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("q", [0.5, 1.0, 5.0, 50.0])
    def test_complement_and_monotone(self, q):
        prev = 2.0
        for c in range(-1, 121):
            u = upper_tail(q, c)
            assert u + lower_tail(q, c) == pytest.approx(1.0, abs=1e-13)
            assert u <= prev + 1e-15
            prev = u

    @pytest.mark.parametrize("q,c", [(1.0, 3), (7.5, 2), (20.0, 25)])
    def test_against_brute_sum(self, q, c):
        assert upper_tail(q, c) == pytest.approx(brute_tail(q, c), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            upper_tail(-0.5, 1)


class TestStirlingTouchard:
    def test_stirling_values(self):
        assert stirling2(3, 2) == 3
        assert stirling2(4, 2) == 7
        assert stirling2(6, 6) == 1
        assert stirling2(2, 5) == 0

    def test_touchard_low_orders(self):
        q = 1.7
        assert touchard(0, q) == 1.0
        assert touchard(1, q) == pytest.approx(q)
        assert touchard(4, 1.0) == pytest.approx(15.0)

    def test_touchard_vs_brute_moment(self):
        # E[X^3] for X ~ Poisson(2) by truncated summation
        want = sum(m**3 * poisson_weight(2.0, m) for m in range(120))
        assert touchard(3, 2.0) == pytest.approx(want, rel=1e-12)
        assert touchard(3, 2.0) == pytest.approx(22.0)

    @pytest.mark.parametrize("k", range(7))
    @pytest.mark.parametrize("q", [0.5, 5.0, 50.0])
    def test_touchard_matches_sums(self, k, q):
        xm = adaptive_support_bound(q, tail_tol=1e-15) + 50
        want = math.fsum(m**k * poisson_weight(q, m) for m in range(xm + 1))
        assert touchard(k, q) == pytest.approx(want, rel=1e-9)


class TestFallingFactorial:
    def test_values(self):
        assert falling_factorial(5, 2) == 20
        assert falling_factorial(3, 4) == 0
        assert falling_factorial(7, 0) == 1


class TestChenStein:
    def test_identity_function(self):
        assert chen_stein_gap(lambda x: x, 3.0) == pytest.approx(0.0, abs=1e-10)

    def test_constant(self):
        assert chen_stein_gap(lambda x: 1.0, 2.5) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("q", [1.0, 5.0, 20.0])
    def test_gap_vanishes(self, q):
        fs = [lambda x: 1.0, lambda x: float(x), lambda x: float(x) ** 2,
              lambda x: float(x) ** 3, lambda x: float(x >= 4)]
        for f in fs:
            assert abs(chen_stein_gap(f, q)) < 1e-10


class TestCentralMoments:
    def test_low_orders(self):
        q = 3.3
        assert poisson_central_moment(1, q) == 0.0
        assert poisson_central_moment(2, q) == pytest.approx(q)
        assert poisson_central_moment(3, 5.0) == pytest.approx(5.0)

    @pytest.mark.parametrize("m", range(7))
    @pytest.mark.parametrize("q", [0.5, 2.0, 11.0])
    def test_vs_truncated_sum(self, m, q):
        xm = adaptive_support_bound(q, tail_tol=1e-16) + 60
        want = math.fsum((x - q) ** m * poisson_weight(q, x)
                         for x in range(xm + 1))
        got = poisson_central_moment(m, q)
        if abs(want) < 1e-9:
            assert got == pytest.approx(want, abs=1e-8)
        else:
            assert got == pytest.approx(want, rel=1e-9)
