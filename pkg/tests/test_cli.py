"""
Tests for the lab command line.
Covers argument validation, sweeps, output formats and exit codes.
"""

import io
import os
import csv
import json
import math
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from common.errors import NumericError, InvalidArgumentError
from common.lab_config import LabSettings, LAB_VERSION
from cli.main_cli import RunConfig, run, main, build_parser, config_from_args
from cli.output_writer import ResultTable, format_value, write_csv, write_json
from cli.sweep_runner import parse_r_grid, run_sweep


def run_to_text(config: RunConfig, settings: LabSettings = None):
    stream = io.StringIO()
    code = run(config, settings or LabSettings(), stdout=stream)
    return code, stream.getvalue()


def csv_rows(text: str):
    return list(csv.DictReader(io.StringIO(text)))


class TestRGrid(unittest.TestCase):
    """Test cases for r-grid parsing and sweeps."""

    def test_inclusive_stop(self):
        self.assertEqual(parse_r_grid("4:12:2"), [4.0, 6.0, 8.0, 10.0, 12.0])
        self.assertEqual(parse_r_grid("1:1:1"), [1.0])

    def test_stop_off_grid(self):
        self.assertEqual(parse_r_grid("0.1:0.35:0.1"), [0.1, 0.2, 0.3])

    def test_malformed(self):
        for text in ("1:2", "a:2:1", "1:2:0", "3:1:1"):
            with self.assertRaises(InvalidArgumentError):
                parse_r_grid(text)

    def test_sweep_orders_by_r(self):
        results = run_sweep(lambda r: r * r, [3.0, 1.0, 2.0], jobs=3)
        self.assertEqual(results, [1.0, 4.0, 9.0])
        with self.assertRaises(InvalidArgumentError):
            run_sweep(lambda r: r, [1.0], jobs=0)

    def test_sweep_reraises(self):
        def evaluate(r):
            if r > 1.5:
                raise NumericError("overflow")
            return r
        with self.assertRaises(NumericError):
            run_sweep(evaluate, [1.0, 2.0], jobs=2)


class TestOutputWriter(unittest.TestCase):
    """Test cases for CSV and JSON emitters."""

    def setUp(self):
        self.table = ResultTable(['r', 'value', 'flag'])
        self.table.add_row([1.0, np.float64(1.0 / 3.0), True])
        self.table.add_row([2.0, float('nan'), False])

    def test_format_value(self):
        self.assertEqual(format_value(1.0 / 3.0), '0.333333333333333')
        self.assertEqual(format_value(float('inf')), 'nan')
        self.assertEqual(format_value(np.int64(3)), '3')
        self.assertEqual(format_value(True), 'true')
        self.assertEqual(format_value('mean'), 'mean')

    def test_row_width(self):
        with self.assertRaises(ValueError):
            self.table.add_row([1.0])
        with self.assertRaises(ValueError):
            self.table.extend(ResultTable(['r']))

    def test_csv(self):
        stream = io.StringIO()
        write_csv(self.table, stream)
        lines = stream.getvalue().split('\n')
        self.assertEqual(lines[0], 'r,value,flag')
        self.assertEqual(lines[1], '1,0.333333333333333,true')
        self.assertEqual(lines[2], '2,nan,false')

    def test_json(self):
        stream = io.StringIO()
        write_json(self.table, {'command': 'test'}, {'version': LAB_VERSION}, stream)
        document = json.loads(stream.getvalue())
        self.assertEqual(list(document), ['config', 'rows', 'meta'])
        self.assertIsNone(document['rows'][1]['value'])
        self.assertAlmostEqual(document['rows'][0]['value'], 1.0 / 3.0, places=15)

    def test_json_failure(self):
        table = ResultTable(['r'])
        table.add_row([object()])
        with self.assertRaises(ValueError):
            write_json(table, {}, {}, io.StringIO())


class TestRun(unittest.TestCase):
    """Test cases for command execution and exit codes."""

    def setUp(self):
        self.settings = LabSettings()

    def test_null_weights_give_zero(self):
        config = RunConfig(command='genfun', rho=0.3, x=(1.0, 2.0), u=(0.0, 0.0), r=5.0, nodes=20, format='json')
        code, text = run_to_text(config, self.settings)
        self.assertEqual(code, 0)
        document = json.loads(text)
        self.assertEqual(document['rows'][0]['logF'], 0.0)
        self.assertEqual(document['meta']['version'], LAB_VERSION)
        self.assertEqual(document['meta']['nodes'], {'per_panel': 20, 'refined': 40})
        self.assertIn('total', document['meta']['timing_ms'])
        self.assertEqual(document['config']['x'], [1.0, 2.0])

    def test_deterministic_csv(self):
        config = RunConfig(command='genfun', x=(1.0,), u=(1.0,), r_grid="1:2:0.5", nodes=20)
        first = run_to_text(config, self.settings)
        second = run_to_text(config, self.settings)
        self.assertEqual(first, second)
        self.assertEqual([row['r'] for row in csv_rows(first[1])], ['1', '1.5', '2'])

    def test_jobs_do_not_change_output(self):
        serial = RunConfig(command='asympt', rho=0.5, x=(1.0, 2.0), u=(0.4, -0.7), r_grid="2:10:2")
        parallel = RunConfig(command='asympt', rho=0.5, x=(1.0, 2.0), u=(0.4, -0.7), r_grid="2:10:2", jobs=3)
        self.assertEqual(run_to_text(serial, self.settings), run_to_text(parallel, self.settings))

    def test_asympt_columns(self):
        config = RunConfig(command='asympt', x=(1.0,), u=(1.0,), r=8.0)
        code, text = run_to_text(config, self.settings)
        row = csv_rows(text)[0]
        self.assertEqual(code, 0)
        self.assertEqual(list(row), ['r', 'logF_asy', 'mu_sum', 'sigma_sum', 'cross_sum', 'barnes_sum', 'H_asy'])
        parts = sum(float(row[k]) for k in ('mu_sum', 'sigma_sum', 'cross_sum', 'barnes_sum'))
        self.assertAlmostEqual(float(row['logF_asy']), parts, places=10)

    def test_kernel_command(self):
        config = RunConfig(command='kernel', x=(0.5, 1.0))
        code, text = run_to_text(config, self.settings)
        rows = csv_rows(text)
        self.assertEqual(code, 0)
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[0]['x'], rows[0]['y'])
        self.assertGreater(float(rows[1]['K']), 0.0)

    def test_stats_command(self):
        config = RunConfig(command='stats', rho=0.2, x=(0.5, 1.5), r=1.0, nodes=12)
        code, text = run_to_text(config, self.settings)
        rows = csv_rows(text)
        self.assertEqual(code, 0)
        self.assertEqual([row['quantity'] for row in rows], ['mean', 'mean', 'var', 'var', 'cov'])
        self.assertEqual((rows[-1]['j'], rows[-1]['k']), ('1', '2'))

    def test_clt_command(self):
        config = RunConfig(command='clt', x=(1.0,), a=(1.0,), r=math.exp(8.0))
        code, text = run_to_text(config, self.settings)
        row = csv_rows(text)[0]
        self.assertEqual(code, 0)
        self.assertEqual(float(row['limit']), 0.5)
        self.assertLess(abs(float(row['log_mgf_exact_scaling']) - 0.5), 0.1)

    def test_ode_check_command(self):
        config = RunConfig(command='ode-check', x=(1.0,), u=(1.0,), r=30.0)
        code, text = run_to_text(config, self.settings)
        row = csv_rows(text)[0]
        self.assertEqual(code, 0)
        self.assertLess(float(row['abs_diff']), 0.02)

    def test_invalid_input(self):
        bad = [
            RunConfig(command='genfun', x=(2.0, 1.0), u=(1.0, 1.0), r=1.0),
            RunConfig(command='genfun', x=(1.0,), u=(), r=1.0),
            RunConfig(command='genfun', x=(1.0,), u=(1.0,)),
            RunConfig(command='genfun', x=(1.0,), u=(1.0,), r=-1.0),
            RunConfig(command='genfun', x=(1.0,), u=(1.0,), r=1.0, nodes=2),
            RunConfig(command='clt', x=(1.0,), r=100.0),
            RunConfig(command='asympt', x=(1.0,), u=(1.0,), r_grid="1:2"),
        ]
        for config in bad:
            code, text = run_to_text(config, self.settings)
            self.assertEqual(code, 2, config)
            self.assertEqual(text, '')

    def test_convergence_failure(self):
        config = RunConfig(command='genfun', x=(1.0,), u=(1.0,), r=1.0, nodes=6)
        code, _ = run_to_text(config, LabSettings(nystrom_tol=1e-300))
        self.assertEqual(code, 3)

    def test_numeric_failure(self):
        config = RunConfig(command='genfun', x=(1.0,), u=(1.0,), r=1.0, nodes=6)
        with patch('cli.main_cli.log_gen_fun', side_effect=NumericError("non-finite integrand", node=1j)):
            code, _ = run_to_text(config, self.settings)
        self.assertEqual(code, 4)

    def test_file_output(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'out.json')
            config = RunConfig(command='asympt', x=(1.0,), u=(0.5,), r=4.0, out=path, format='json')
            code, text = run_to_text(config, self.settings)
            self.assertEqual(code, 0)
            self.assertEqual(text, '')
            with open(path, encoding='utf-8') as handle:
                self.assertEqual(len(json.load(handle)['rows']), 1)


class TestMain(unittest.TestCase):
    """Test cases for argument parsing and the entry point."""

    def test_parser(self):
        args = build_parser().parse_args(['genfun', '--rho', '0.5', '--x', '1,2', '--u', '0.5,-0.5',
                                          '--r-grid', '4:12:2', '--nodes', '80', '--format', 'json'])
        config = config_from_args(args, LabSettings(jobs=3))
        self.assertEqual(config.x, (1.0, 2.0))
        self.assertEqual(config.u, (0.5, -0.5))
        self.assertEqual(config.jobs, 3)
        self.assertEqual(config.r_values(), [4.0, 6.0, 8.0, 10.0, 12.0])

    def test_parser_rejects_both_r_forms(self):
        with patch('sys.stderr', new_callable=io.StringIO):
            with self.assertRaises(SystemExit):
                build_parser().parse_args(['genfun', '--x', '1', '--u', '1', '--r', '1', '--r-grid', '1:2:1'])

    def test_malformed_list(self):
        args = build_parser().parse_args(['genfun', '--x', '1,a', '--u', '1', '--r', '1'])
        with self.assertRaises(InvalidArgumentError):
            config_from_args(args, LabSettings())

    @patch.dict(os.environ, {'PEARCEY_LAB_JOBS': '2'})
    def test_main_writes_stdout(self):
        with patch('sys.stdout', new_callable=io.StringIO) as out:
            code = main(['asympt', '--x', '1', '--u', '1', '--r-grid', '4:8:2', '--quiet'])
        self.assertEqual(code, 0)
        self.assertEqual(len(csv_rows(out.getvalue())), 3)

    @patch.dict(os.environ, {'PEARCEY_LAB_JOBS': 'many'})
    def test_main_bad_environment(self):
        with patch('sys.stdout', new_callable=io.StringIO):
            code = main(['asympt', '--x', '1', '--u', '1', '--r', '4', '--quiet'])
        self.assertEqual(code, 2)


if __name__ == '__main__':
    unittest.main()
