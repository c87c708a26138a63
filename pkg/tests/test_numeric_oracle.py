import math

import numpy as np
import pytest

from relu_lab.hermite import correlation_lower_bound, relu_parity_inner_product
from relu_lab.numeric_oracle import (
    McEstimate,
    correlation_2d_quadrature,
    correlation_closed_form,
    exact_normal_moment,
    gauss_hermite_rule,
    half_normal_rule,
    mc_expectation,
    monomial_moment,
    quad_expectation,
)

SQRT_2PI = math.sqrt(2 * math.pi)


def _relative_moment_error(rule, j):
    log_q, sign = monomial_moment(rule, j)
    if rule.support == "full" and j % 2:
        # exact value is 0; measure against the absolute moment sum
        scale = float(np.exp(np.logaddexp.reduce(rule.log_weights + j * np.log(np.abs(rule.nodes) + 1e-300))))
        return 0.0 if sign == 0 else math.exp(log_q) / scale
    return abs(math.expm1(log_q - exact_normal_moment(j, rule.support)))


class TestRules:
    def test_half_rule_shape(self):
        r = half_normal_rule(32)
        assert r.nodes.shape == (32,) and np.all(r.nodes > 0) and r.support == "half"
        assert r.weights.sum() == pytest.approx(0.5, abs=1e-15)

    def test_full_rule_mass(self):
        assert gauss_hermite_rule(40).weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_matches_numpy_hermegauss(self):
        x, w = np.polynomial.hermite_e.hermegauss(40)
        r = gauss_hermite_rule(40)
        np.testing.assert_allclose(r.nodes, x, atol=1e-12)
        np.testing.assert_allclose(r.weights, w / SQRT_2PI, rtol=1e-10)

    @pytest.mark.parametrize("n", [8, 32, 128])
    def test_half_rule_monomial_exactness(self, n):
        assert max(_relative_moment_error(half_normal_rule(n), j) for j in range(2 * n)) <= 1e-12

    @pytest.mark.parametrize("n", [8, 32, 128])
    def test_full_rule_monomial_exactness(self, n):
        assert max(_relative_moment_error(gauss_hermite_rule(n), j) for j in range(2 * n)) <= 1e-12

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            half_normal_rule(0)


class TestQuadExpectation:
    def test_constant(self):
        assert quad_expectation(np.ones_like) == pytest.approx(1.0, abs=1e-15)

    def test_second_moment(self):
        assert quad_expectation(lambda x: x**2) == pytest.approx(1.0, abs=1e-14)

    def test_relu(self):
        assert quad_expectation(lambda x: np.maximum(x, 0), half_normal_rule(64)) == pytest.approx(
            1 / SQRT_2PI, abs=1e-14)

    def test_full_rule_path(self):
        assert quad_expectation(lambda x: x**4, gauss_hermite_rule(10), split=False) == pytest.approx(3.0)

    def test_split_needs_half_rule(self):
        with pytest.raises(ValueError):
            quad_expectation(np.abs, gauss_hermite_rule(10), split=True)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            quad_expectation(lambda x: np.full_like(x, np.nan))

    def test_kink_beats_plain_rule(self):
        split = abs(quad_expectation(np.abs) - 2 / SQRT_2PI)
        plain = abs(quad_expectation(np.abs, gauss_hermite_rule(128), split=False) - 2 / SQRT_2PI)
        assert split < 1e-14 < plain


class TestMonteCarlo:
    def test_deterministic(self):
        f = lambda x: x[:, 0] ** 2
        assert mc_expectation(f, 3, 10_000, 5) == mc_expectation(f, 3, 10_000, 5)
        assert mc_expectation(f, 3, 10_000, 5) != mc_expectation(f, 3, 10_000, 6)

    def test_chunking_only_changes_rounding(self):
        f = lambda x: x[:, 1]
        a = mc_expectation(f, 2, 100_000, 9)
        b = mc_expectation(f, 2, 100_000, 9, chunk=7_777)
        assert a.mean == pytest.approx(b.mean, abs=1e-15) and a.stderr == pytest.approx(b.stderr, rel=1e-10)

    def test_stderr_definition(self):
        est = mc_expectation(lambda x: x[:, 0], 1, 1000, 2)
        assert isinstance(est, McEstimate) and est.n == 1000 and est.seed == 2
        assert est.stderr == pytest.approx(1 / math.sqrt(1000), rel=0.1)

    def test_coverage_over_seeds(self):
        inside = sum(mc_expectation(lambda x: x[:, 0], 1, 100_000, s).contains(0.0) for s in range(100))
        assert inside >= 99

    def test_relu_second_moment(self):
        assert mc_expectation(lambda x: np.maximum(x[:, 0], 0) ** 2, 1, 1_000_000, 1).contains(0.5)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            mc_expectation(lambda x: x[:, 0], 1, 1, 0)


class TestCorrelationQuadrature:
    def test_closed_form(self):
        assert correlation_2d_quadrature() == pytest.approx(correlation_closed_form(), abs=1e-14)
        assert correlation_closed_form() == pytest.approx(0.16524730315, abs=1e-11)

    def test_node_counts_agree(self):
        assert correlation_2d_quadrature(48) == pytest.approx(correlation_2d_quadrature(96), abs=1e-12)

    def test_above_lower_bound(self):
        assert correlation_2d_quadrature() >= correlation_lower_bound(2)

    def test_sign_free_variant(self):
        assert correlation_2d_quadrature(signs=(False, True)) == pytest.approx(
            correlation_2d_quadrature(signs=(True, False)), abs=1e-15)
        # with both signs removed only the ReLU first moment remains
        assert correlation_2d_quadrature(signs=(False, False)) == pytest.approx(1 / SQRT_2PI, abs=1e-13)

    def test_sign_free_variant_monte_carlo(self):
        est = mc_expectation(lambda z: np.maximum(z.sum(axis=1), 0) / math.sqrt(2) * np.sign(z[:, 1]), 2, 1_000_000, 4)
        assert est.contains(correlation_2d_quadrature(signs=(False, True)))

    def test_rejects_few_nodes(self):
        with pytest.raises(ValueError):
            correlation_2d_quadrature(16)

    def test_series_approaches_quadrature(self):
        q = correlation_2d_quadrature() / SQRT_2PI
        gaps = [q - relu_parity_inner_product(2, n) for n in (42, 202, 1002)]
        assert all(g > 0 for g in gaps) and gaps[0] > gaps[1] > gaps[2]
