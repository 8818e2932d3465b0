"""
Nystrom evaluation of the Pearcey generating function F(r x, u) = det(1 - K~).
Also finite-difference counting statistics and the small-r expansion.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from common.errors import InvalidArgumentError, NumericError, ConvergenceError
from common.lab_config import LabSettings, DEFAULT_SETTINGS
from common.quadrature import gauss_legendre
from common.records import IntervalFamily, GenFunResult, CountingStats
from common.special_functions import PearceyParams
from solvers.kernel import kernel_matrix, kernel_diag
from solvers.run_monitor import MONITOR

logger = logging.getLogger(__name__)

__all__ = ['IntervalFamily', 'NystromGrid', 'build_weighted_matrix', 'log_det_weighted',
           'log_gen_fun', 'counting_stats', 'small_r_log_gen_fun']


def _check_grid_args(r: float, n: int):
    if not r > 0:
        raise InvalidArgumentError(f"r must be positive, got {r}")
    if n < 4:
        raise InvalidArgumentError(f"Need at least 4 nodes per panel, got {n}")


@dataclass(frozen=True)
class NystromGrid:
    """
    Gauss-Legendre nodes on the 2m-1 panels of (-r x_m, r x_m) split at +-r x_j,
    the interval index of every node and the balanced kernel matrix.

    The weights u enter only through the (1 - s_j) factors, so one grid serves
    every u for fixed (rho, x, r, n).
    """
    nodes: np.ndarray
    weights: np.ndarray
    index: np.ndarray
    matrix: np.ndarray
    r: float
    x: tuple
    n: int

    @classmethod
    def build(cls, params: PearceyParams, x: Sequence[float], r: float, n: int,
              settings: LabSettings = DEFAULT_SETTINGS) -> 'NystromGrid':
        _check_grid_args(r, n)
        x = tuple(IntervalFamily.base(x).x)
        rule = gauss_legendre(n)
        ends = [r * v for v in x]
        # panels ordered left to right: (-r x_m, -r x_{m-1}), ..., (-r x_1, r x_1), ..., (r x_{m-1}, r x_m)
        panels = [(-ends[j], -ends[j - 1], j) for j in range(len(ends) - 1, 0, -1)]
        panels.append((-ends[0], ends[0], 0))
        panels += [(ends[j - 1], ends[j], j) for j in range(1, len(ends))]

        nodes, weights, index = [], [], []
        for a, b, j in panels:
            t, w = rule.mapped(a, b)
            nodes.append(t)
            weights.append(w)
            index.append(np.full(n, j))
        nodes = np.concatenate(nodes)
        with MONITOR.timed("kernel_matrix"):
            matrix = kernel_matrix(nodes, params, balanced=True, settings=settings)
        logger.debug(f"Nystrom grid r={r:g}, x={x}, n={n}: dimension {nodes.size}")
        return cls(nodes=nodes, weights=np.concatenate(weights), index=np.concatenate(index),
                   matrix=matrix, r=float(r), x=x, n=int(n))

    @property
    def dimension(self) -> int:
        return self.nodes.size

    def column_factors(self, u: Sequence[float]) -> np.ndarray:
        """(1 - s_{j(b)}) w_b for every node b."""
        s = IntervalFamily(self.x, tuple(u)).s
        return (1.0 - s[self.index]) * self.weights


def weighted_matrix(grid: NystromGrid, u: Sequence[float]) -> np.ndarray:
    return (grid.matrix * grid.column_factors(u)[None, :]).astype(complex)


def build_weighted_matrix(params: PearceyParams, fam: IntervalFamily, r: float, n: int,
                          settings: LabSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """
    Nystrom matrix of the weighted operator sum_j (1 - s_j) K restricted to r A_j.

    Args:
        params: Cusp parameter
        fam: Endpoints and weights
        r: Scale, r > 0
        n: Gauss-Legendre nodes per panel, n >= 4

    Returns:
        Complex matrix of dimension (2m - 1) n
    """
    grid = NystromGrid.build(params, fam.x, r, n, settings)
    return weighted_matrix(grid, fam.u)


def _lu_log_det(a: np.ndarray) -> complex:
    lu, piv = linalg.lu_factor(a, check_finite=False)
    diag = np.diag(lu).astype(complex)
    if np.any(diag == 0):
        return complex(-np.inf)
    total = complex(np.sum(np.log(diag)))
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    imag = total.imag + (math.pi if swaps % 2 else 0.0)
    imag = (imag + math.pi) % (2.0 * math.pi) - math.pi
    return complex(total.real, imag)


def log_det_weighted(grid: NystromGrid, u: Sequence[float]) -> complex:
    """log det(I - K diag((1 - s_{j(b)}) w_b)) on a prepared grid."""
    factors = grid.column_factors(u)
    if not np.any(factors):
        return 0j
    a = np.eye(grid.dimension, dtype=complex) - grid.matrix * factors[None, :]
    MONITOR.count("determinants")
    return _lu_log_det(a)


def _real_log_det(value: complex, settings: LabSettings) -> float:
    if not np.isfinite(value.real):
        raise NumericError(f"Fredholm determinant is not finite (log det = {value})")
    if abs(value.imag) > settings.imag_tol_det:
        raise NumericError(f"Fredholm determinant not positive: imaginary part of log det is {value.imag:.3e}")
    return float(value.real)


def log_gen_fun(params: PearceyParams, fam: IntervalFamily, r: float, n: int,
                settings: LabSettings = DEFAULT_SETTINGS) -> GenFunResult:
    """
    log F(r x, u) by Nystrom discretization, refined once to 2n nodes per panel.

    Args:
        params: Cusp parameter
        fam: Endpoints and weights
        r: Scale, r > 0
        n: Nodes per panel on the coarse grid

    Returns:
        GenFunResult holding the fine-grid value and |fine - coarse|
    """
    _check_grid_args(r, n)
    dimension = (2 * fam.m - 1) * 2 * n
    if fam.is_null():
        return GenFunResult(log_F=0.0, r=float(r), nodes_per_panel=n, est_error=0.0, dimension=dimension)

    coarse = _real_log_det(log_det_weighted(NystromGrid.build(params, fam.x, r, n, settings), fam.u), settings)
    fine = _real_log_det(log_det_weighted(NystromGrid.build(params, fam.x, r, 2 * n, settings), fam.u), settings)
    est_error = abs(fine - coarse)
    logger.debug(f"log F(r={r:g}, u={fam.u}) = {fine:.12g} (n={n}: {coarse:.12g}, est {est_error:.2e})")
    if est_error > settings.nystrom_tol:
        raise ConvergenceError(
            f"Nystrom estimate {est_error:.2e} above {settings.nystrom_tol:.0e} at r={r}, n={n}; raise --nodes",
            estimate=est_error)
    return GenFunResult(log_F=fine, r=float(r), nodes_per_panel=n, est_error=est_error, dimension=dimension)


def _richardson(estimate: Callable[[float], float], h: float) -> float:
    return (4.0 * estimate(0.5 * h) - estimate(h)) / 3.0


def _grid_stats(grid: NystromGrid, order: int, h: float, settings: LabSettings):
    m = len(grid.x)

    def f(u) -> float:
        return _real_log_det(log_det_weighted(grid, u), settings)

    def unit(j: int, step: float) -> np.ndarray:
        u = np.zeros(m)
        u[j] = step
        return u

    mean = [_richardson(lambda k, j=j: (f(unit(j, k)) - f(unit(j, -k))) / (2.0 * k), h) for j in range(m)]
    if order == 1:
        return mean, [], []

    cov = np.zeros((m, m))
    for j in range(m):
        cov[j, j] = _richardson(lambda k, j=j: (f(unit(j, k)) + f(unit(j, -k))) / (k * k), h)
        for i in range(j + 1, m):
            def mixed(k, i=i, j=j):
                pp = f(unit(j, k) + unit(i, k))
                pm = f(unit(j, k) - unit(i, k))
                mp = f(-unit(j, k) + unit(i, k))
                mm = f(-unit(j, k) - unit(i, k))
                return (pp - pm - mp + mm) / (4.0 * k * k)
            cov[j, i] = cov[i, j] = _richardson(mixed, h)
    return mean, list(np.diag(cov)), cov.tolist()


def counting_stats(params: PearceyParams, fam_base, r: float, n: int, order: int = 2,
                   settings: LabSettings = DEFAULT_SETTINGS) -> CountingStats:
    """
    Means, variances and covariances of N(r x_j) from u-derivatives of log F at u = 0.

    Central differences with step settings.fd_step and one Richardson level;
    every u reuses the same kernel matrix. The statistics are computed on n
    and 2n nodes per panel and the fine values returned.

    Args:
        params: Cusp parameter
        fam_base: IntervalFamily or plain endpoint sequence (weights are ignored)
        r: Scale
        n: Nodes per panel on the coarse grid
        order: 1 for means only, 2 for means, variances and covariances

    Returns:
        CountingStats with source 'nystrom'
    """
    if order not in (1, 2):
        raise InvalidArgumentError(f"Statistics order must be 1 or 2, got {order}")
    x = fam_base.x if isinstance(fam_base, IntervalFamily) else tuple(fam_base)
    _check_grid_args(r, n)

    h = settings.fd_step
    with MONITOR.timed("counting_stats"):
        coarse = _grid_stats(NystromGrid.build(params, x, r, n, settings), order, h, settings)
        fine = _grid_stats(NystromGrid.build(params, x, r, 2 * n, settings), order, h, settings)

    diffs = [abs(a - b) for a, b in zip(fine[0] + fine[1], coarse[0] + coarse[1])]
    est_error = max(diffs) if diffs else 0.0
    if est_error > 1e3 * settings.nystrom_tol:
        raise ConvergenceError(f"Counting statistics moved by {est_error:.2e} under node doubling at r={r}, n={n}",
                               estimate=est_error)
    logger.info(f"Counting statistics at r={r:g}, x={x}: means {np.round(fine[0], 6).tolist()}")
    return CountingStats(r=float(r), x=list(x), mean=[float(v) for v in fine[0]],
                         var=[float(v) for v in fine[1]], cov=fine[2], source="nystrom",
                         est_error=est_error)


def small_r_log_gen_fun(params: PearceyParams, fam: IntervalFamily, r: float,
                        settings: LabSettings = DEFAULT_SETTINGS) -> float:
    """
    First-order small-r expansion log F ~ 2 r K(0, 0) sum_j (s_j - 1)(x_j - x_{j-1}), x_0 = 0.
    """
    if not r > 0:
        raise InvalidArgumentError(f"r must be positive, got {r}")
    s = fam.s[:-1]
    lengths = np.diff(np.concatenate([[0.0], fam.x]))
    return float(2.0 * r * kernel_diag(0.0, params, settings) * np.sum((s - 1.0) * lengths))
