"""
Pearcey kernel evaluation.
Direct integral form, frame form, diagonal limit and full Nystrom matrices.
"""

import math
import logging
from typing import Tuple

import numpy as np

from common.errors import NearDiagonalError, NumericError, DomainError
from common.lab_config import LabSettings, DEFAULT_SETTINGS
from common.special_functions import (PearceyParams, pearcey_values, psi_tilde, balance_exponent)
from solvers.run_monitor import MONITOR

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)


def _real_part(value: complex, tol: float, what: str) -> float:
    if abs(value.imag) > tol * (1.0 + abs(value.real)):
        raise NumericError(f"{what} has imaginary residue {value.imag:.3e} (real part {value.real:.6g})")
    return float(value.real)


def _pq_columns(x: float, y: float, params: PearceyParams,
                settings: LabSettings) -> Tuple[np.ndarray, np.ndarray]:
    p = pearcey_values([x], params, 'P', 2, balanced=True, settings=settings)[:, 0]
    q = pearcey_values([y], params, 'Q', 2, balanced=True, settings=settings)[:, 0]
    return p, q


def kernel_numerator(p: np.ndarray, q: np.ndarray, rho: float) -> complex:
    """P Q'' - P' Q' + P'' Q - rho P Q from value/derivative columns."""
    return p[0] * q[2] - p[1] * q[1] + p[2] * q[0] - rho * p[0] * q[0]


def kernel_direct(x: float, y: float, params: PearceyParams,
                  settings: LabSettings = DEFAULT_SETTINGS) -> float:
    """
    Pearcey kernel K(x, y) from its double-integral representation.

    Args:
        x: First argument
        y: Second argument, |x - y| >= settings.near_diagonal
        params: Cusp parameter

    Returns:
        Real kernel value
    """
    if abs(x - y) < settings.near_diagonal:
        raise NearDiagonalError(x, y, settings.near_diagonal)
    p, q = _pq_columns(x, y, params, settings)
    balanced = kernel_numerator(p, q, params.rho) / (x - y)
    value = _real_part(complex(balanced), settings.imag_tol_kernel, f"K({x}, {y})")
    return value * math.exp(balance_exponent(y) - balance_exponent(x))


def kernel_rh(x: float, y: float, params: PearceyParams,
              settings: LabSettings = DEFAULT_SETTINGS) -> float:
    """
    Pearcey kernel from the frame: (0 1 1) Psi(y)^-1 Psi(x) (1 0 0)^t / (2 pi i (x - y)).
    """
    if abs(x - y) < settings.near_diagonal:
        raise NearDiagonalError(x, y, settings.near_diagonal)
    frame_y = psi_tilde(y, params, settings).entries
    frame_x = psi_tilde(x, params, settings).entries
    if np.linalg.cond(frame_y) > 1e14:
        raise NumericError(f"Frame at y = {y} is numerically singular", node=complex(y))
    row = np.linalg.solve(frame_y.T, np.array([0.0, 1.0, 1.0], dtype=complex))
    value = row @ frame_x[:, 0] / (2j * math.pi * (x - y))
    return _real_part(complex(value), settings.imag_tol_kernel, f"K_rh({x}, {y})")


def kernel_diag(x: float, params: PearceyParams, settings: LabSettings = DEFAULT_SETTINGS) -> float:
    """
    One-point density K(x, x).

    L'Hopital on the numerator with Q''' = rho Q' - y Q gives x P Q + P' Q'' - P'' Q'.
    """
    p, q = _pq_columns(x, x, params, settings)
    value = x * p[0] * q[0] + p[1] * q[2] - p[2] * q[1]
    return _real_part(complex(value), settings.imag_tol_kernel, f"K({x}, {x})")


def kernel(x: float, y: float, params: PearceyParams, settings: LabSettings = DEFAULT_SETTINGS) -> float:
    """
    Kernel at any pair of points.

    Below the near-diagonal threshold the diagonal value plus the first-order
    Taylor term in (y - x) is returned.
    """
    if abs(x - y) >= settings.near_diagonal:
        return kernel_direct(x, y, params, settings)
    p, q = _pq_columns(x, x, params, settings)
    rho = params.rho
    q3 = rho * q[1] - x * q[0]
    q4 = rho * q[2] - q[0] - x * q[1]
    diag = x * p[0] * q[0] + p[1] * q[2] - p[2] * q[1]
    second = p[0] * q4 - p[1] * q3 + p[2] * q[2] - rho * p[0] * q[2]
    value = diag - 0.5 * second * (y - x)
    return _real_part(complex(value), settings.imag_tol_kernel, f"K({x}, {y})")


def kernel_matrix(xs, params: PearceyParams, balanced: bool = True,
                  settings: LabSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """
    Real matrix K(x_a, x_b) over a set of nodes.

    With balanced=True entry (a, b) carries the factor exp(phi(x_a) - phi(x_b)),
    a diagonal similarity that leaves every Fredholm determinant unchanged.

    Args:
        xs: Distinct real nodes
        params: Cusp parameter
        balanced: Keep the similarity factor instead of removing it

    Returns:
        Square real array
    """
    xs = np.asarray(xs, dtype=float)
    p = pearcey_values(xs, params, 'P', 2, balanced=True, settings=settings)
    q = pearcey_values(xs, params, 'Q', 2, balanced=True, settings=settings)
    rho = params.rho

    numer = (np.outer(p[0], q[2]) - np.outer(p[1], q[1]) + np.outer(p[2], q[0])
             - rho * np.outer(p[0], q[0]))
    gap = xs[:, None] - xs[None, :]
    near = np.abs(gap) < settings.near_diagonal
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(near, 0.0, numer / np.where(near, 1.0, gap))
    diag = xs * p[0] * q[0] + p[1] * q[2] - p[2] * q[1]
    rows, cols = np.nonzero(near)
    values[rows, cols] = diag[rows]

    residue = np.max(np.abs(values.imag) / (1.0 + np.abs(values.real))) if values.size else 0.0
    if residue > settings.imag_tol_det:
        logger.warning(f"Kernel matrix imaginary residue {residue:.2e} above {settings.imag_tol_det:.0e}")
    values = values.real
    if not np.all(np.isfinite(values)):
        raise NumericError("Kernel matrix has non-finite entries")
    if not balanced:
        phi = np.array([balance_exponent(x) for x in xs])
        values = values * np.exp(phi[None, :] - phi[:, None])
    MONITOR.count("kernel_entries", xs.size * xs.size)
    logger.debug(f"Assembled {xs.size}x{xs.size} kernel matrix, rho={rho:g}")
    return values


def density_asympt(x: float, params: PearceyParams) -> float:
    """Smooth one-point density mu_rho'(|x|)/2 approached by K(x, x) for large |x|."""
    if x == 0:
        raise DomainError("Asymptotic density is singular at x = 0")
    a = abs(x)
    return SQRT3 / (2.0 * math.pi) * a ** (1.0 / 3.0) - SQRT3 * params.rho / (6.0 * math.pi) * a ** (-1.0 / 3.0)
