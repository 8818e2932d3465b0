"""
Unit tests for the Fredholm determinant engine.
Tests Nystrom grids, log F, counting statistics and the small-r expansion.
"""

import math
import unittest

import numpy as np
import pytest

from common.errors import InvalidArgumentError, ConvergenceError
from common.lab_config import LabSettings
from common.quadrature import gauss_legendre
from common.special_functions import PearceyParams
from solvers.fredholm import (IntervalFamily, NystromGrid, build_weighted_matrix, log_det_weighted, log_gen_fun,
                              counting_stats, small_r_log_gen_fun)
from solvers.asymptotics import log_gen_fun_asympt, mu, sigma2, cov_sigma, VARIANCE_CONSTANT
from solvers.hamiltonian import dlogF_cross_check
from solvers.kernel import kernel_diag


class TestNystromGrid(unittest.TestCase):
    """Test cases for grid construction and weighted matrices."""

    def setUp(self):
        self.params = PearceyParams(rho=0.0)

    def test_layout(self):
        grid = NystromGrid.build(self.params, (0.5, 1.0, 2.0), 1.5, 6)
        self.assertEqual(grid.dimension, 5 * 6)
        self.assertTrue(np.all(np.diff(grid.nodes) > 0))
        self.assertAlmostEqual(np.sum(grid.weights), 2.0 * 1.5 * 2.0, places=12)
        # panels left to right carry interval indices 2, 1, 0, 1, 2
        self.assertEqual([int(grid.index[k * 6]) for k in range(5)], [2, 1, 0, 1, 2])

    def test_column_factors(self):
        grid = NystromGrid.build(self.params, (1.0, 2.0), 1.0, 4)
        factors = grid.column_factors((0.5, -0.2))
        inner = (1.0 - math.exp(0.3)) * grid.weights[grid.index == 0]
        outer = (1.0 - math.exp(-0.2)) * grid.weights[grid.index == 1]
        np.testing.assert_allclose(factors[grid.index == 0], inner, rtol=1e-14)
        np.testing.assert_allclose(factors[grid.index == 1], outer, rtol=1e-14)

    def test_weighted_matrix_shape(self):
        fam = IntervalFamily((1.0, 2.0), (0.3, 0.4))
        matrix = build_weighted_matrix(self.params, fam, 1.0, 5)
        self.assertEqual(matrix.shape, (15, 15))
        self.assertTrue(np.iscomplexobj(matrix))

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            NystromGrid.build(self.params, (1.0,), 0.0, 10)
        with self.assertRaises(InvalidArgumentError):
            NystromGrid.build(self.params, (1.0,), 1.0, 3)
        with self.assertRaises(InvalidArgumentError):
            NystromGrid.build(self.params, (2.0, 1.0), 1.0, 10)

    def test_zero_weights_give_zero_log_det(self):
        grid = NystromGrid.build(self.params, (1.0, 3.0), 2.0, 8)
        self.assertEqual(log_det_weighted(grid, (0.0, 0.0)), 0j)


class TestLogGenFun(unittest.TestCase):
    """Test cases for log F(r x, u)."""

    def setUp(self):
        self.params = PearceyParams(rho=0.0)
        self.fam = IntervalFamily((1.0,), (1.0,))

    def test_null_weights(self):
        for rho in (-1.0, 0.0, 2.0):
            for x in ((1.0,), (0.5, 2.0), (1.0, 2.0, 3.0)):
                for r in (0.5, 7.0):
                    fam = IntervalFamily.base(x)
                    result = log_gen_fun(PearceyParams(rho=rho), fam, r, 40)
                    self.assertEqual(result.log_F, 0.0)
                    self.assertTrue(result.is_valid())

    def test_converged_value(self):
        coarse = log_gen_fun(self.params, self.fam, 2.0, 20)
        fine = log_gen_fun(self.params, self.fam, 2.0, 30)
        self.assertLessEqual(coarse.est_error, 1e-6)
        self.assertLess(abs(coarse.log_F - fine.log_F), 1e-9)
        self.assertEqual(coarse.dimension, 40)

    def test_sign_and_convexity(self):
        """log F is a cumulant generating function: zero at 0, convex, increasing through 0."""
        f = {u: log_gen_fun(self.params, self.fam.with_u((u,)), 1.5, 20).log_F for u in (-1.0, 0.5, 1.0)}
        self.assertLess(f[-1.0], 0.0)
        self.assertGreater(f[1.0], 0.0)
        self.assertLessEqual(f[0.5], 0.5 * f[1.0] + 1e-12)

    def test_small_r_expansion(self):
        r = 0.005
        for u in (1.0, -1.0):
            fam = IntervalFamily((1.0, 2.0), (u, 0.5))
            numeric = log_gen_fun(self.params, fam, r, 8).log_F
            expansion = small_r_log_gen_fun(self.params, fam, r)
            self.assertLess(abs(numeric - expansion), 0.02 * abs(expansion))

    def test_zero_weight_merges_intervals(self):
        """u_j = 0 removes the endpoint x_j: the family collapses to m - 1 intervals."""
        full = IntervalFamily((0.5, 1.0, 1.5), (1.0, 0.0, -1.0))
        merged = IntervalFamily((0.5, 1.5), (1.0, -1.0))
        a = log_gen_fun(self.params, full, 1.5, 30).log_F
        b = log_gen_fun(self.params, merged, 1.5, 30).log_F
        self.assertLess(abs(a - b), 1e-10)

    def test_monotone_in_weight(self):
        """F = E[exp(u N)] lies in (0, 1] and increases with u for u <= 0."""
        values = [log_gen_fun(self.params, self.fam.with_u((u,)), 1.5, 20).log_F for u in (-2.0, -1.0, 0.0)]
        self.assertTrue(all(math.isfinite(v) for v in values))
        self.assertTrue(values[0] < values[1] < values[2], f"log F {values}")
        self.assertEqual(values[2], 0.0)

    def test_convergence_failure(self):
        strict = LabSettings(nystrom_tol=1e-300)
        with self.assertRaises(ConvergenceError) as ctx:
            log_gen_fun(self.params, self.fam, 1.0, 6, strict)
        self.assertIsNotNone(ctx.exception.estimate)


class TestCountingStats(unittest.TestCase):
    """Test cases for finite-difference counting statistics."""

    def setUp(self):
        self.params = PearceyParams(rho=0.2)

    def test_mean_is_integrated_density(self):
        stats = counting_stats(self.params, (1.0,), 1.0, 12, order=1)
        t, w = gauss_legendre(30).mapped(-1.0, 1.0)
        expected = sum(wi * kernel_diag(ti, self.params) for ti, wi in zip(t, w))
        self.assertLess(abs(stats.mean[0] - expected), 1e-6 * expected)
        self.assertEqual(stats.var, [])

    def test_second_order(self):
        stats = counting_stats(self.params, IntervalFamily.base((0.5, 1.5)), 1.0, 12)
        self.assertEqual(stats.source, "nystrom")
        self.assertTrue(all(v > 0 for v in stats.var))
        self.assertAlmostEqual(stats.covariance(0, 1), stats.covariance(1, 0), places=14)
        self.assertLess(stats.mean[0], stats.mean[1])

    def test_invalid_order(self):
        with self.assertRaises(InvalidArgumentError):
            counting_stats(self.params, (1.0,), 1.0, 12, order=3)


@pytest.mark.slow
class TestLargeGapAgreement(unittest.TestCase):
    """Numerical determinant against the large-r expansion."""

    def setUp(self):
        self.params = PearceyParams(rho=0.0)

    def test_single_interval_decay(self):
        """The remainder oscillates in sign; its envelope over successive windows shrinks."""
        fam = IntervalFamily((1.0,), (1.0,))

        def gap(r):
            return abs(log_gen_fun(self.params, fam, r, 80).log_F - log_gen_fun_asympt(self.params, fam, r).total)

        envelopes = [max(gap(r) for r in np.arange(lo, lo + 2.01, 0.5)) for lo in (4.0, 6.0, 8.0)]
        self.assertTrue(envelopes[0] > envelopes[1] > envelopes[2], f"envelopes {envelopes}")
        self.assertLessEqual(gap(10.0), 0.03)

    def test_two_interval_decay(self):
        fam = IntervalFamily((1.0, 2.0), (1.0, -1.0))
        gaps = [abs(log_gen_fun(self.params, fam, r, 80).log_F - log_gen_fun_asympt(self.params, fam, r).total)
                for r in (4.0, 6.0, 8.0)]
        self.assertTrue(all(b < a for a, b in zip(gaps, gaps[1:])), f"gaps {gaps}")
        self.assertLessEqual(gaps[-1], 0.05)

    def test_counting_statistics(self):
        stats = counting_stats(self.params, (1.0,), 8.0, 60)
        self.assertLess(abs(stats.mean[0] - mu(8.0, self.params)), 0.1)
        self.assertLess(abs(stats.var[0] - (sigma2(8.0) + VARIANCE_CONSTANT)), 0.08)

    def test_covariance(self):
        stats = counting_stats(self.params, (1.0, 8.0), 8.0, 220)
        self.assertAlmostEqual(cov_sigma(8.0, 1.0), math.log(7.0 / 3.0) / (2.0 * math.pi ** 2), places=14)
        self.assertLess(abs(stats.covariance(0, 1) - cov_sigma(8.0, 1.0)), 0.08)

    def test_derivative_bridge(self):
        fam = IntervalFamily((1.0,), (1.0,))
        diffs = [dlogF_cross_check(self.params, fam, r, 80).difference for r in (4.0, 6.0, 8.0)]
        self.assertTrue(all(b < a for a, b in zip(diffs, diffs[1:])), f"differences {diffs}")
        self.assertLessEqual(diffs[-1], 0.05)


if __name__ == '__main__':
    unittest.main()
