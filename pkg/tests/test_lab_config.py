"""
Unit tests for settings, the error hierarchy, records and the run monitor.
"""

import json
import math
import threading
import unittest

import numpy as np

from common.errors import (LabError, InvalidArgumentError, NearDiagonalError, PreconditionError, DomainError,
                           NumericError, RangeError, StiffnessError, ConvergenceError, exit_code_for,
                           EXIT_INVALID, EXIT_CONVERGENCE, EXIT_NUMERIC)
from common.lab_config import LabSettings, DEFAULT_SETTINGS, JOBS_ENV_VAR
from common.records import IntervalFamily, GenFunResult, AsymptoticBreakdown, CountingStats, GradientReport
from solvers.run_monitor import RunMonitor


class TestLabSettings(unittest.TestCase):
    """Test cases for LabSettings."""

    def test_defaults_valid(self):
        self.assertTrue(DEFAULT_SETTINGS.is_valid())
        self.assertEqual(DEFAULT_SETTINGS.to_dict()['jobs'], 1)
        self.assertAlmostEqual(DEFAULT_SETTINGS.overflow_log, 1400 * math.log(2.0), places=9)

    def test_invalid_settings(self):
        self.assertFalse(LabSettings(nystrom_tol=0.0).is_valid())
        self.assertFalse(LabSettings(jobs=0).is_valid())

    def test_jobs_from_environment(self):
        self.assertEqual(LabSettings.from_env({JOBS_ENV_VAR: '4'}).jobs, 4)
        self.assertEqual(LabSettings.from_env({}).jobs, 1)
        self.assertEqual(LabSettings.from_env({JOBS_ENV_VAR: ''}).jobs, 1)

    def test_bad_environment(self):
        for raw in ('four', '0', '-2'):
            with self.assertRaises(InvalidArgumentError):
                LabSettings.from_env({JOBS_ENV_VAR: raw})


class TestErrors(unittest.TestCase):
    """Test cases for the exception hierarchy and exit codes."""

    def test_exit_codes(self):
        self.assertEqual(exit_code_for(InvalidArgumentError("bad")), EXIT_INVALID)
        self.assertEqual(exit_code_for(NearDiagonalError(1.0, 1.0, 1e-8)), EXIT_INVALID)
        self.assertEqual(exit_code_for(PreconditionError("off manifold")), EXIT_INVALID)
        self.assertEqual(exit_code_for(DomainError("pole")), EXIT_INVALID)
        self.assertEqual(exit_code_for(ConvergenceError("no", estimate=0.1)), EXIT_CONVERGENCE)
        self.assertEqual(exit_code_for(StiffnessError("step")), EXIT_CONVERGENCE)
        self.assertEqual(exit_code_for(RangeError("overflow")), EXIT_NUMERIC)
        self.assertEqual(exit_code_for(NumericError("nan", node=1j)), EXIT_NUMERIC)
        self.assertEqual(exit_code_for(ValueError("plain")), EXIT_INVALID)
        self.assertEqual(exit_code_for(OSError("disk")), EXIT_NUMERIC)

    def test_hierarchy(self):
        self.assertTrue(issubclass(RangeError, OverflowError))
        self.assertTrue(issubclass(DomainError, ValueError))
        for cls in (InvalidArgumentError, DomainError, NumericError, ConvergenceError):
            self.assertTrue(issubclass(cls, LabError))
        error = NumericError("non-finite integrand", node=0.5 + 2j)
        self.assertEqual(error.node, 0.5 + 2j)


class TestRecords(unittest.TestCase):
    """Test cases for domain records."""

    def setUp(self):
        self.fam = IntervalFamily((1.0, 2.0, 4.0), (0.5, -0.2, 0.1))

    def test_family_validation(self):
        with self.assertRaises(InvalidArgumentError):
            IntervalFamily((), ())
        with self.assertRaises(InvalidArgumentError):
            IntervalFamily((1.0, 2.0), (1.0,))
        with self.assertRaises(InvalidArgumentError):
            IntervalFamily((0.0,), (1.0,))
        with self.assertRaises(InvalidArgumentError):
            IntervalFamily((1.0, 1.0), (1.0, 1.0))
        with self.assertRaises(InvalidArgumentError):
            IntervalFamily((1.0,), (float('inf'),))

    def test_tail_sums(self):
        s = self.fam.s
        np.testing.assert_allclose(s, [math.exp(0.4), math.exp(-0.1), math.exp(0.1), 1.0], rtol=1e-14)
        self.assertEqual(self.fam.m, 3)
        self.assertTrue(np.all(s > 0))

    def test_jump_weights(self):
        s = self.fam.s
        frak = self.fam.frak_s
        self.assertEqual(frak.shape, (3,))
        np.testing.assert_allclose(frak * 2j * math.pi, s[1:] - s[:-1], rtol=1e-14)
        beta = self.fam.beta
        self.assertTrue(np.all(beta.real == 0.0))
        np.testing.assert_allclose(np.exp(2j * math.pi * beta), np.exp(self.fam.u), rtol=1e-14)

    def test_null_family(self):
        self.assertTrue(IntervalFamily.base((1.0, 3.0)).is_null())
        self.assertFalse(self.fam.is_null())
        self.assertEqual(self.fam.with_u((0.0, 0.0, 0.0)).x, self.fam.x)

    def test_serialize(self):
        data = json.loads(self.fam.serialize().decode('utf-8'))
        self.assertEqual(data, {'x': [1.0, 2.0, 4.0], 'u': [0.5, -0.2, 0.1]})
        result = GenFunResult(log_F=np.float64(0.25), r=2.0, nodes_per_panel=20, est_error=1e-9, dimension=40)
        self.assertEqual(json.loads(result.serialize())['log_F'], 0.25)
        self.assertTrue(result.is_valid())

    def test_breakdown_total(self):
        parts = AsymptoticBreakdown(mu_sum=1.0, sigma_sum=0.5, cross_sum=-0.25, barnes_sum=0.125)
        self.assertEqual(parts.total, 1.375)
        self.assertTrue(parts.is_valid())
        self.assertFalse(AsymptoticBreakdown(1.0, 0.0, 0.0, 0.0, total=2.0).is_valid())

    def test_reports(self):
        stats = CountingStats(r=1.0, x=[1.0, 2.0], mean=[0.5, 1.0], var=[0.1, 0.2], cov=[[0.1, 0.03], [0.03, 0.2]])
        self.assertEqual(stats.covariance(1, 0), 0.03)
        report = GradientReport(max_deviation=1e-9, scale=100.0, per_block={'p': 1e-9})
        self.assertAlmostEqual(report.relative, 1e-11, places=20)


class TestRunMonitor(unittest.TestCase):
    """Test cases for RunMonitor."""

    def setUp(self):
        self.monitor = RunMonitor(history=4)

    def test_counters_across_threads(self):
        def work():
            for _ in range(1000):
                self.monitor.count('kernel_entries')

        threads = [threading.Thread(target=work) for _ in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        self.assertEqual(self.monitor.get_run_summary()['counters']['kernel_entries'], 4000)

    def test_timings(self):
        for _ in range(6):
            with self.monitor.timed('determinant'):
                pass
        with self.monitor.timed('flow'):
            pass
        summary = self.monitor.get_run_summary()
        self.assertEqual(set(summary['timing_ms']), {'determinant', 'flow'})
        self.assertEqual(len(self.monitor.recent_timings(limit=10)), 4)
        self.assertEqual(self.monitor.recent_timings(limit=1)[0].label, 'flow')

    def test_timing_recorded_on_error(self):
        with self.assertRaises(NumericError):
            with self.monitor.timed('flow'):
                raise NumericError("overflow")
        self.assertIn('flow', self.monitor.get_run_summary()['timing_ms'])

    def test_reset(self):
        self.monitor.count('determinants', 3)
        self.monitor.reset()
        self.assertEqual(self.monitor.get_run_summary(), {'counters': {}, 'timing_ms': {}})


if __name__ == '__main__':
    unittest.main()
