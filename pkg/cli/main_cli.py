#!/usr/bin/env python3
"""
Command line front end of the Pearcey lab.
Single evaluations, r-sweeps, cross-checks and statistics tables as CSV or JSON.
"""

import sys
import math
import time
import logging
import argparse
from dataclasses import dataclass, asdict
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from common.errors import InvalidArgumentError, LabError, exit_code_for, EXIT_OK
from common.lab_config import LabSettings, LAB_VERSION
from common.records import IntervalFamily
from common.special_functions import PearceyParams
from solvers.kernel import kernel, density_asympt
from solvers.fredholm import log_gen_fun, counting_stats
from solvers.asymptotics import (log_gen_fun_asympt, hamiltonian_asympt, stats_asympt, clt_log_mgf)
from solvers.hamiltonian import (init_large_r, flow, hamiltonian, trace_relation_gap, asymptotic_residual)
from solvers.run_monitor import MONITOR
from cli.output_writer import ResultTable, write_csv, write_json
from cli.sweep_runner import parse_r_grid, run_sweep

logger = logging.getLogger(__name__)

COMMANDS = ('kernel', 'genfun', 'asympt', 'compare', 'ode-check', 'stats', 'clt')
FORMATS = ('csv', 'json')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _parse_reals(text: Optional[str], name: str) -> Tuple[float, ...]:
    if text is None or text.strip() == '':
        return ()
    try:
        return tuple(float(v) for v in text.split(','))
    except ValueError:
        raise InvalidArgumentError(f"--{name} must be comma-separated numbers, got {text!r}")


@dataclass
class RunConfig:
    """One parsed command line."""
    command: str
    rho: float = 0.0
    x: Tuple[float, ...] = ()
    u: Tuple[float, ...] = ()
    r: Optional[float] = None
    r_grid: Optional[str] = None
    nodes: int = 60
    out: str = '-'
    format: str = 'csv'
    jobs: int = 1
    y: Optional[float] = None
    a: Tuple[float, ...] = ()
    ode_span: float = 1.0

    def validate(self) -> 'RunConfig':
        """Raise InvalidArgumentError on the first inconsistent field."""
        if self.command not in COMMANDS:
            raise InvalidArgumentError(f"Unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise InvalidArgumentError(f"Unknown format {self.format!r}")
        if not math.isfinite(self.rho):
            raise InvalidArgumentError(f"rho must be finite, got {self.rho}")
        if not self.x:
            raise InvalidArgumentError("--x needs at least one value")
        if self.x[0] <= 0 or any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise InvalidArgumentError(f"--x must be positive and strictly increasing, got {self.x}")
        if self.command not in ('kernel', 'clt', 'stats') and len(self.u) != len(self.x):
            raise InvalidArgumentError(f"--u needs {len(self.x)} values, got {len(self.u)}")
        if self.command == 'clt' and len(self.a) != len(self.x):
            raise InvalidArgumentError(f"--a needs {len(self.x)} values, got {len(self.a)}")
        if self.nodes < 4:
            raise InvalidArgumentError(f"--nodes must be at least 4, got {self.nodes}")
        if self.jobs < 1:
            raise InvalidArgumentError(f"--jobs must be positive, got {self.jobs}")
        if self.command != 'kernel':
            if (self.r is None) == (self.r_grid is None):
                raise InvalidArgumentError("Give exactly one of --r and --r-grid")
            if any(not r > 0 for r in self.r_values()):
                raise InvalidArgumentError(f"r values must be positive, got {self.r_values()}")
        if self.ode_span <= 0:
            raise InvalidArgumentError(f"--ode-span must be positive, got {self.ode_span}")
        return self

    def r_values(self) -> List[float]:
        if self.r_grid is not None:
            return parse_r_grid(self.r_grid)
        return [] if self.r is None else [float(self.r)]

    @property
    def params(self) -> PearceyParams:
        return PearceyParams(rho=self.rho)

    @property
    def family(self) -> IntervalFamily:
        return IntervalFamily(self.x, self.u)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['x'] = list(self.x)
        data['u'] = list(self.u)
        data['a'] = list(self.a)
        return data


def _kernel_table(config: RunConfig, settings: LabSettings) -> ResultTable:
    table = ResultTable(['x', 'y', 'K', 'density_asy'])
    for xv in config.x:
        y = xv if config.y is None else config.y
        table.add_row([xv, y, kernel(xv, y, config.params, settings), density_asympt(xv, config.params)])
    return table


def _genfun_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        result = log_gen_fun(config.params, config.family, r, config.nodes, settings)
        table = ResultTable(['r', 'logF', 'est_error', 'dimension'])
        table.add_row([r, result.log_F, result.est_error, result.dimension])
        return table
    return evaluate


def _asympt_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        parts = log_gen_fun_asympt(config.params, config.family, r)
        table = ResultTable(['r', 'logF_asy', 'mu_sum', 'sigma_sum', 'cross_sum', 'barnes_sum', 'H_asy'])
        table.add_row([r, parts.total, parts.mu_sum, parts.sigma_sum, parts.cross_sum, parts.barnes_sum,
                       hamiltonian_asympt(config.family, r, config.params)])
        return table
    return evaluate


def _compare_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        numeric = log_gen_fun(config.params, config.family, r, config.nodes, settings).log_F
        asymptotic = log_gen_fun_asympt(config.params, config.family, r).total
        table = ResultTable(['r', 'logF_num', 'logF_asy', 'abs_diff'])
        table.add_row([r, numeric, asymptotic, abs(numeric - asymptotic)])
        return table
    return evaluate


def _ode_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        fam, params = config.family, config.params
        start = init_large_r(r + config.ode_span, fam, params, settings=settings)
        state = flow(start, fam, r, settings=settings)
        H_flow = hamiltonian(state, fam).real
        H_asy = hamiltonian_asympt(fam, r, params)
        table = ResultTable(['r', 'H_flow', 'H_asy', 'abs_diff', 'constraint_drift', 'trace_gap', 'init_residual'])
        table.add_row([r, H_flow, H_asy, abs(H_flow - H_asy), state.constraint_tol,
                       trace_relation_gap(state, params), asymptotic_residual(r, fam, params)])
        return table
    return evaluate


def _stats_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        numeric = counting_stats(config.params, config.x, r, config.nodes, order=2, settings=settings)
        asymptotic = stats_asympt(IntervalFamily.base(config.x), r, config.params)
        table = ResultTable(['r', 'quantity', 'j', 'k', 'numeric', 'asymptotic', 'abs_diff'])
        m = len(config.x)
        for j in range(m):
            table.add_row([r, 'mean', j + 1, j + 1, numeric.mean[j], asymptotic.mean[j],
                           abs(numeric.mean[j] - asymptotic.mean[j])])
        for j in range(m):
            table.add_row([r, 'var', j + 1, j + 1, numeric.var[j], asymptotic.var[j],
                           abs(numeric.var[j] - asymptotic.var[j])])
        for j in range(m):
            for k in range(j + 1, m):
                a, b = numeric.covariance(j, k), asymptotic.covariance(j, k)
                table.add_row([r, 'cov', j + 1, k + 1, a, b, abs(a - b)])
        return table
    return evaluate


def _clt_rows(config: RunConfig, settings: LabSettings) -> Callable[[float], ResultTable]:
    def evaluate(r: float) -> ResultTable:
        limit = 0.5 * sum(a * a for a in config.a)
        by_log = clt_log_mgf(config.a, config.x, r, config.params, normalization='log')
        exact = clt_log_mgf(config.a, config.x, r, config.params, normalization='exact')
        table = ResultTable(['r', 'log_mgf_log_scaling', 'log_mgf_exact_scaling', 'limit'])
        table.add_row([r, by_log, exact, limit])
        return table
    return evaluate


SWEEP_COMMANDS = {
    'genfun': _genfun_rows,
    'asympt': _asympt_rows,
    'compare': _compare_rows,
    'ode-check': _ode_rows,
    'stats': _stats_rows,
    'clt': _clt_rows,
}


def build_table(config: RunConfig, settings: LabSettings) -> ResultTable:
    """Evaluate the configured command into one table, rows ordered by r."""
    if config.command == 'kernel':
        return _kernel_table(config, settings)
    evaluate = SWEEP_COMMANDS[config.command](config, settings)
    parts = run_sweep(evaluate, config.r_values(), config.jobs)
    table = ResultTable(parts[0].columns)
    for part in parts:
        table.extend(part)
    return table


def _meta(config: RunConfig, elapsed_ms: float) -> Dict[str, Any]:
    summary = MONITOR.get_run_summary()
    timing = dict(summary['timing_ms'])
    timing['total'] = elapsed_ms
    return {'version': LAB_VERSION, 'timing_ms': timing,
            'nodes': {'per_panel': config.nodes, 'refined': 2 * config.nodes},
            'counters': summary['counters']}


def _emit(table: ResultTable, config: RunConfig, elapsed_ms: float, stream):
    if config.format == 'csv':
        write_csv(table, stream)
    else:
        write_json(table, config.to_dict(), _meta(config, elapsed_ms), stream)


def run(config: RunConfig, settings: Optional[LabSettings] = None, stdout=None) -> int:
    """
    Execute one command and write its table.

    Args:
        config: Parsed command line
        settings: Numerical defaults, LabSettings.from_env() when omitted
        stdout: Stream used for out='-'

    Returns:
        Exit code: 0 success, 2 invalid input, 3 convergence failure, 4 numeric failure
    """
    stdout = sys.stdout if stdout is None else stdout
    try:
        settings = LabSettings.from_env() if settings is None else settings
        config.validate()
        MONITOR.reset()
        logger.info(f"Running {config.command} (rho={config.rho}, x={list(config.x)}, jobs={config.jobs})")
        start = time.perf_counter()
        table = build_table(config, settings)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        if config.out == '-':
            _emit(table, config, elapsed_ms, stdout)
        else:
            with open(config.out, 'w', newline='', encoding='utf-8') as handle:
                _emit(table, config, elapsed_ms, handle)
        logger.info(f"{config.command} finished: {len(table.rows)} rows in {elapsed_ms:.0f} ms")
        return EXIT_OK
    except (LabError, ValueError, ArithmeticError, OSError) as e:
        code = exit_code_for(e)
        logger.error(f"{config.command} failed ({type(e).__name__}): {e}")
        return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pearcey-lab',
                                     description='Numerical lab for the Pearcey process generating function.')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--rho', type=float, default=0.0, help='cusp parameter')
    parser.add_argument('--x', required=True, help='comma-separated endpoints 0 < x_1 < ... < x_m')
    parser.add_argument('--u', default=None, help='comma-separated weights u_1..u_m')
    parser.add_argument('--a', default=None, help='comma-separated CLT coefficients (clt)')
    parser.add_argument('--y', type=float, default=None, help='second kernel argument (kernel; default y = x)')
    group = parser.add_mutually_exclusive_group()
    group.add_argument('--r', type=float, default=None, help='single scale')
    group.add_argument('--r-grid', default=None, help='start:stop:step, stop included when on the grid')
    parser.add_argument('--nodes', type=int, default=60, help='Gauss-Legendre nodes per panel')
    parser.add_argument('--ode-span', type=float, default=1.0, help='flow length for ode-check')
    parser.add_argument('--out', default='-', help="output path or '-' for stdout")
    parser.add_argument('--format', choices=FORMATS, default='csv')
    parser.add_argument('--jobs', type=int, default=None, help='parallel sweep points (default $PEARCEY_LAB_JOBS or 1)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='warnings and errors only')
    return parser


def config_from_args(args: argparse.Namespace, settings: LabSettings) -> RunConfig:
    return RunConfig(command=args.command, rho=args.rho, x=_parse_reals(args.x, 'x'), u=_parse_reals(args.u, 'u'),
                     r=args.r, r_grid=args.r_grid, nodes=args.nodes, out=args.out, format=args.format,
                     jobs=settings.jobs if args.jobs is None else args.jobs, y=args.y,
                     a=_parse_reals(args.a, 'a'), ode_span=args.ode_span)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        settings = LabSettings.from_env()
        config = config_from_args(args, settings)
    except InvalidArgumentError as e:
        logger.error(f"Invalid arguments: {e}")
        return exit_code_for(e)
    return run(config, settings)


if __name__ == '__main__':
    raise SystemExit(main())
