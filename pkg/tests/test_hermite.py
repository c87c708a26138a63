import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.polynomial import hermite_e

from relu_lab.hermite import (
    CompositionCapError,
    coefficient_table,
    composition_count,
    compositions,
    correlation_lower_bound,
    correlation_lower_bound_stirling,
    correlation_series,
    correlation_term,
    correlation_term_exact,
    exact_to_float,
    hermite_at_zero,
    hermite_eval,
    hermite_multinomial_rhs,
    hermite_table,
    log_abs_hermite_at_zero,
    normalized_hermite,
    relu_coefficient,
    relu_parity_inner_product,
    sign_coefficient,
)
from relu_lab.numeric_oracle import (correlation_2d_quadrature, correlation_closed_form, gauss_hermite_rule,
                                     half_normal_rule, mc_expectation, quad_expectation)

SQRT_2PI = math.sqrt(2 * math.pi)


class TestHermiteEval:
    @pytest.mark.parametrize("n,x,expected", [(0, 3.7, 1.0), (2, 0.0, -1.0), (3, 1.0, -2.0), (1, -2.5, -2.5)])
    def test_values(self, n, x, expected):
        assert hermite_eval(n, x) == expected

    def test_matches_numpy_hermite_e(self):
        x = np.linspace(-5, 5, 41)
        for n in range(0, 51):
            coef = np.zeros(n + 1)
            coef[n] = 1.0
            ref = hermite_e.hermeval(x, coef)
            np.testing.assert_allclose(hermite_eval(n, x), ref, rtol=1e-9, atol=1e-9 * np.abs(ref).max())

    def test_recurrence_consistency(self):
        x = np.linspace(-5, 5, 101)
        for n in range(1, 50):
            lhs = hermite_eval(n + 1, x)
            rhs = x * hermite_eval(n, x) - n * hermite_eval(n - 1, x)
            scale = np.maximum(np.abs(lhs), 1.0)
            assert np.max(np.abs(lhs - rhs) / scale) <= 1e-12

    def test_table_rows(self):
        x = np.array([-1.0, 0.3, 2.0])
        table = hermite_table(6, x)
        assert table.shape == (7, 3)
        for n in range(7):
            np.testing.assert_allclose(table[n], hermite_eval(n, x))

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            hermite_eval(-1, 0.0)

    def test_normalized(self):
        np.testing.assert_allclose(normalized_hermite(4, 1.5), hermite_eval(4, 1.5) / math.sqrt(24))


class TestHermiteAtZero:
    @pytest.mark.parametrize("n,expected", [(0, 1), (1, 0), (2, -1), (4, 3), (6, -15), (7, 0)])
    def test_small(self, n, expected):
        assert hermite_at_zero(n) == expected
        assert hermite_at_zero(n, exact=True) == expected

    def test_exact_big_integer(self):
        n = 60
        m = n // 2
        assert hermite_at_zero(n, exact=True) == (-1) ** m * math.factorial(n) // (math.factorial(m) * 2**m)

    def test_log_space_agrees(self):
        for n in range(0, 60, 2):
            la, s = log_abs_hermite_at_zero(n)
            exact = hermite_at_zero(n, exact=True)
            assert s == (1 if exact > 0 else -1)
            assert la == pytest.approx(math.log(abs(exact)), rel=1e-13, abs=1e-13)

    def test_overflow_outside_float_range(self):
        with pytest.raises(OverflowError):
            hermite_at_zero(400)

    def test_matches_evaluation(self):
        for n in range(0, 20):
            assert hermite_at_zero(n) == pytest.approx(float(hermite_eval(n, 0.0)))


class TestCoefficients:
    def test_sign_examples(self):
        assert sign_coefficient(0) == 0.0
        assert sign_coefficient(2) == 0.0
        assert sign_coefficient(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)

    def test_relu_examples(self):
        assert relu_coefficient(0) == pytest.approx(1 / SQRT_2PI, rel=1e-15)
        assert relu_coefficient(1) == 0.5
        assert relu_coefficient(2) == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-14)
        assert relu_coefficient(3) == 0.0

    def test_vanishing_pattern(self):
        sign = coefficient_table("sign", 30)
        relu = coefficient_table("relu", 30)
        for i in range(0, 31, 2):
            assert sign.coefficients[i] == 0.0
        for i in range(3, 31, 2):
            assert relu.coefficients[i] == 0.0
        assert sign.as_array().shape == (31,)

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            coefficient_table("tanh", 3)

    @pytest.mark.parametrize("i", range(21))
    def test_relu_against_quadrature(self, i):
        q = quad_expectation(lambda x: np.maximum(x, 0) * normalized_hermite(i, x))
        assert abs(relu_coefficient(i) - q) <= 1e-8

    @pytest.mark.parametrize("i", range(21))
    def test_sign_against_quadrature(self, i):
        q = quad_expectation(lambda x: np.where(x >= 0, 1.0, -1.0) * normalized_hermite(i, x))
        assert abs(sign_coefficient(i) - q) <= 1e-8

    def test_orthonormality(self):
        rule = gauss_hermite_rule()
        table = np.array([normalized_hermite(i, rule.nodes) for i in range(21)])
        gram = (table * rule.weights) @ table.T
        np.testing.assert_allclose(gram, np.eye(21), atol=1e-8)

    def test_bessel_inequality(self):
        energy = math.fsum(relu_coefficient(i) ** 2 for i in range(41))
        assert energy <= 0.5
        more = math.fsum(relu_coefficient(i) ** 2 for i in range(400))
        assert energy < more <= 0.5

    def test_parseval_tail_at_cutoff_40(self):
        # stated bound: the missing ReLU energy beyond degree 40 is at most 1e-4
        energy = math.fsum(relu_coefficient(i) ** 2 for i in range(41))
        assert 0.5 - energy <= 1e-4


class TestCompositions:
    def test_count(self):
        for total in range(6):
            for parts in range(1, 5):
                assert sum(1 for _ in compositions(total, parts)) == composition_count(total, parts)

    def test_parts_sum(self):
        assert all(sum(c) == 5 and len(c) == 3 for c in compositions(5, 3))


class TestCorrelationTerm:
    def test_odd_term_vanishes(self):
        assert correlation_term(2, 3) == 0.0

    def test_leading_term_k2(self):
        assert correlation_term(2, 2) == pytest.approx(1 / (math.pi * SQRT_2PI), rel=1e-14)

    @pytest.mark.parametrize("k", [2, 6, 10])
    def test_leading_term_matches_lower_bound(self, k):
        assert abs(correlation_term(k, k) - correlation_lower_bound(k)) <= 1e-12 * correlation_lower_bound(k)

    @pytest.mark.parametrize("k", [2, 6])
    def test_against_exact_rational(self, k):
        for n in range(k, 31, 2):
            exact = exact_to_float(k, correlation_term_exact(k, n))
            assert correlation_term(k, n) == pytest.approx(exact, rel=1e-12)

    def test_exact_rational_k2_n2(self):
        # T_2 = (1/2) (2/pi) / sqrt(2 pi), so the rational part is 1/2
        assert correlation_term_exact(2, 2) == Fraction(1, 2)

    @pytest.mark.parametrize("k", [2, 6])
    def test_positivity(self, k):
        for n in range(k, k + 13):
            t = correlation_term(k, n)
            assert (t > 0) if n % 2 == 0 else (t == 0)

    @pytest.mark.parametrize("k", [0, 1, 3, 4, 5, 8])
    def test_rejects_bad_k(self, k):
        with pytest.raises(ValueError):
            correlation_term(k, 10)
        with pytest.raises(ValueError):
            correlation_lower_bound(k)

    def test_rejects_n_below_k(self):
        with pytest.raises(ValueError):
            correlation_term(6, 4)

    def test_composition_cap(self):
        with pytest.raises(CompositionCapError):
            correlation_term(6, 40, cap=100)

    def test_default_k6_window_under_cap(self):
        assert correlation_series(6).n_max == 46


class TestLowerBound:
    def test_k2(self):
        assert correlation_lower_bound(2) == pytest.approx(1 / (math.pi * SQRT_2PI), rel=1e-14)

    def test_k6_stirling_within_15_percent(self):
        exact, approx = correlation_lower_bound(6), correlation_lower_bound_stirling(6)
        assert abs(exact - approx) <= 0.15 * exact


class TestSeries:
    def test_single_term(self):
        assert relu_parity_inner_product(2, 2) == pytest.approx(correlation_lower_bound(2) / SQRT_2PI, rel=1e-14)
        assert relu_parity_inner_product(2, 2) == pytest.approx(0.0506605918, rel=1e-9)

    def test_monotone_in_n_max(self):
        values = [relu_parity_inner_product(2, n) for n in range(2, 60)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_partial_sum_above_leading_term(self):
        s = correlation_series(6, 20)
        assert s.partial_sum >= s.leading_term
        assert s.last_term == s.terms[20]

    def test_default_truncation(self):
        s = correlation_series(2)
        assert s.n_max == 42 and min(s.terms) == 2 and max(s.terms) == 42

    def test_converges_to_closed_form(self):
        # terms decay like n^-2.5; far out the tail is small enough for 1e-6 agreement
        truth = correlation_closed_form() / SQRT_2PI
        s = correlation_series(2, 4002)
        assert truth - 1e-6 <= s.inner_product <= truth
        assert abs(correlation_2d_quadrature() / SQRT_2PI - truth) <= 1e-12

    def test_mc_agreement_n20(self):
        est = mc_expectation(lambda z: np.maximum(z.sum(axis=1), 0) / math.sqrt(2) * np.sign(z[:, 0]) * np.sign(z[:, 1]),
                             2, 10_000_000, seed=11)
        assert abs(est.mean - SQRT_2PI * relu_parity_inner_product(2, 20)) <= 3 * est.stderr + (
            correlation_closed_form() - SQRT_2PI * relu_parity_inner_product(2, 20))


class TestMultinomialIdentity:
    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("n", range(7))
    def test_quadrature(self, k, n):
        betas = np.arange(1.0, k + 1.0)
        betas /= np.linalg.norm(betas)
        rule = gauss_hermite_rule(16)
        grids = np.meshgrid(*([rule.nodes] * k), indexing="ij")
        weights = np.prod(np.meshgrid(*([rule.weights] * k), indexing="ij"), axis=0)
        xs = np.stack([g.ravel() for g in grids])
        lhs = hermite_eval(n, betas @ xs)
        rhs = hermite_multinomial_rhs(n, betas, xs)
        probe = hermite_eval(n, xs[0])
        w = weights.ravel()
        assert abs(np.dot(w, lhs * probe) - np.dot(w, rhs * probe)) <= 1e-8
        np.testing.assert_allclose(rhs, lhs, atol=1e-8 * max(1.0, np.abs(lhs).max()))

    def test_half_rule_is_cached(self):
        assert half_normal_rule(128) is half_normal_rule(128)
