"""
Closed-form large-r asymptotics of the Pearcey generating function.
Counting-function mean and variance profiles, amplitudes, phases and the Hamiltonian expansion.
"""

import math
import logging
from typing import List, Sequence

import numpy as np

from common.errors import DomainError
from common.records import IntervalFamily, AsymptoticBreakdown, CountingStats
from common.special_functions import (PearceyParams, OMEGA, EULER_GAMMA, gamma_complex, arg_gamma,
                                      log_barnes_pair)
from solvers.kernel import kernel_diag

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
PI2 = math.pi * math.pi
MU_LEAD = 3.0 * SQRT3 / (4.0 * math.pi)
VARIANCE_CONSTANT = (1.0 + EULER_GAMMA) / PI2


def _positive(value: float, name: str):
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")


def _cbrt2(x: float) -> float:
    return x ** (2.0 / 3.0)


def mu(x: float, params: PearceyParams) -> float:
    """Mean profile (3 sqrt3 / 4 pi) x^(4/3) - (sqrt3 rho / 2 pi) x^(2/3)."""
    _positive(x, "x")
    return MU_LEAD * x ** (4.0 / 3.0) - SQRT3 * params.rho / (2.0 * math.pi) * _cbrt2(x)


def sigma2(x: float) -> float:
    """Variance profile (4 / 3 pi^2) log x + (1 / pi^2) log(9/2)."""
    _positive(x, "x")
    return 4.0 / (3.0 * PI2) * math.log(x) + math.log(4.5) / PI2


def variance_constant() -> float:
    return VARIANCE_CONSTANT


def _modulus_ratio(x_k: float, x_j: float) -> float:
    a, b = _cbrt2(x_j), _cbrt2(x_k)
    return abs(a - OMEGA * b) / abs(a - b)


def cov_sigma(x_k: float, x_j: float) -> float:
    """Limiting covariance (1/pi^2) log |x_j^(2/3) - w x_k^(2/3)| / |x_j^(2/3) - x_k^(2/3)|."""
    _positive(x_k, "x_k")
    _positive(x_j, "x_j")
    if x_k == x_j:
        raise DomainError(f"Covariance profile diverges at coincident endpoints x = {x_k}")
    return math.log(_modulus_ratio(x_k, x_j)) / PI2


def log_gen_fun_asympt(params: PearceyParams, fam: IntervalFamily, r: float) -> AsymptoticBreakdown:
    """
    Large-r expansion of log F(r x, u) split into its four sums.

    Args:
        params: Cusp parameter
        fam: Endpoints and weights
        r: Scale

    Returns:
        AsymptoticBreakdown with mean, variance, cross and Barnes parts
    """
    _positive(r, "r")
    fam.require_distinct()
    x, u = fam.x, fam.u
    mu_sum = sum(uj * mu(r * xj, params) for xj, uj in zip(x, u))
    sigma_sum = sum(0.5 * uj * uj * sigma2(r * xj) for xj, uj in zip(x, u))
    cross_sum = 0.0
    for j in range(fam.m):
        for k in range(j + 1, fam.m):
            cross_sum += u[j] * u[k] * cov_sigma(x[k], x[j])
    barnes_sum = sum(log_barnes_pair(uj) for uj in u)
    return AsymptoticBreakdown(mu_sum=mu_sum, sigma_sum=sigma_sum, cross_sum=cross_sum, barnes_sum=barnes_sum)


def theta3(s: float, params: PearceyParams) -> float:
    """(3/4) s^(4/3) + (rho/2) s^(2/3)."""
    _positive(s, "s")
    return 0.75 * s ** (4.0 / 3.0) + 0.5 * params.rho * _cbrt2(s)


def amp_A(j: int, fam: IntervalFamily) -> float:
    """
    Amplitude A_j of the large-r solution, j counted from 0.

    |Gamma(1 - u_j/(2 pi i))| exp(-u_j/3 - sum_{k>j} u_k/2
    - sum_{k != j} (u_k / 2 pi) arctan(sqrt3 x_k^(2/3) / (x_k^(2/3) + 2 x_j^(2/3))))
    """
    x, u = fam.x, fam.u
    exponent = -u[j] / 3.0 - 0.5 * sum(u[j + 1:])
    for k in range(fam.m):
        if k != j:
            a, b = _cbrt2(x[k]), _cbrt2(x[j])
            exponent -= u[k] / (2.0 * math.pi) * math.atan(SQRT3 * a / (a + 2.0 * b))
    return abs(gamma_complex(1.0 - u[j] / (2j * math.pi))) * math.exp(exponent)


def cross_phase(j: int, fam: IntervalFamily) -> float:
    """sum_{k != j} (u_k / 2 pi) log |x_j^(2/3) - w x_k^(2/3)| / |x_j^(2/3) - x_k^(2/3)|."""
    fam.require_distinct()
    total = 0.0
    for k in range(fam.m):
        if k != j:
            total += fam.u[k] / (2.0 * math.pi) * math.log(_modulus_ratio(fam.x[k], fam.x[j]))
    return total


def phase_theta(j: int, fam: IntervalFamily, r: float, params: PearceyParams) -> float:
    """Oscillation phase of the j-th component of the large-r solution, j counted from 0."""
    _positive(r, "r")
    fam.require_distinct()
    s = r * fam.x[j]
    uj = fam.u[j]
    value = -3.0 * SQRT3 / 8.0 * s ** (4.0 / 3.0) + SQRT3 * params.rho / 4.0 * _cbrt2(s)
    value += arg_gamma(1.0 - uj / (2j * math.pi))
    value -= uj / (2.0 * math.pi) * (4.0 / 3.0 * math.log(s) + math.log(4.5))
    return value - cross_phase(j, fam)


def phase_rate(j: int, fam: IntervalFamily, r: float, params: PearceyParams) -> float:
    """d/dr of phase_theta."""
    xj = fam.x[j]
    return (-SQRT3 / 2.0 * xj ** (4.0 / 3.0) * r ** (1.0 / 3.0)
            + SQRT3 * params.rho / 6.0 * _cbrt2(xj) * r ** (-1.0 / 3.0)
            - 2.0 * fam.u[j] / (3.0 * math.pi * r))


def hamiltonian_asympt(fam: IntervalFamily, r: float, params: PearceyParams) -> float:
    """
    Large-r expansion of H(r) without its O(r^(-5/3)) remainder.

    Args:
        fam: Endpoints and weights
        r: Scale
        params: Cusp parameter

    Returns:
        Real value of the expansion
    """
    _positive(r, "r")
    if fam.is_null():
        return 0.0
    total = 0.0
    for j, (xj, uj) in enumerate(zip(fam.x, fam.u)):
        total += SQRT3 / (2.0 * math.pi) * uj * xj ** (4.0 / 3.0) * r ** (1.0 / 3.0)
        total -= params.rho / (2.0 * SQRT3 * math.pi) * uj * _cbrt2(xj) * r ** (-1.0 / 3.0)
        total += uj * uj / (3.0 * PI2 * r)
        total -= uj / (3.0 * SQRT3 * math.pi * r) * math.cos(2.0 * phase_theta(j, fam, r, params))
    return total


def hamiltonian_small_r(fam: IntervalFamily, params: PearceyParams) -> float:
    """Limit H(0+) = K(0, 0) sum_j (s_j - 1)(x_j - x_{j-1}), x_0 = 0."""
    s = fam.s[:-1]
    lengths = np.diff(np.concatenate([[0.0], fam.x]))
    return float(kernel_diag(0.0, params) * np.sum((s - 1.0) * lengths))


def stats_asympt(fam: IntervalFamily, r: float, params: PearceyParams) -> CountingStats:
    """Limiting means mu(r x_j), variances sigma2(r x_j) + (1 + gamma_E)/pi^2 and covariances."""
    _positive(r, "r")
    fam.require_distinct()
    m = fam.m
    mean = [mu(r * xj, params) for xj in fam.x]
    var = [sigma2(r * xj) + VARIANCE_CONSTANT for xj in fam.x]
    cov = np.diag(var)
    for j in range(m):
        for k in range(j + 1, m):
            cov[j, k] = cov[k, j] = cov_sigma(fam.x[k], fam.x[j])
    return CountingStats(r=float(r), x=list(fam.x), mean=mean, var=var, cov=cov.tolist(), source="asymptotic")


def clt_scaling(a: Sequence[float], r: float) -> List[float]:
    """Weights u_j = (sqrt3 pi / 2) a_j / sqrt(log r) of the central limit scaling."""
    if not r > math.e:
        raise DomainError(f"Central limit scaling needs r > e, got r = {r}")
    factor = SQRT3 * math.pi / 2.0 / math.sqrt(math.log(r))
    return [factor * aj for aj in a]


def clt_log_mgf(a: Sequence[float], x: Sequence[float], r: float, params: PearceyParams,
                normalization: str = "log") -> float:
    """
    Asymptotic log E[prod exp(a_j (N(r x_j) - mu(r x_j)) / scale_j)].

    normalization='log' uses clt_scaling; 'exact' uses u_j = a_j / sigma(r x_j).
    The limit for r -> infinity is sum_j a_j^2 / 2 in both cases for m = 1.
    """
    if normalization == "log":
        u = clt_scaling(a, r)
    elif normalization == "exact":
        _positive(r, "r")
        u = [aj / math.sqrt(sigma2(r * xj)) for aj, xj in zip(a, x)]
    else:
        raise DomainError(f"Unknown normalization {normalization!r}")
    fam = IntervalFamily(tuple(x), tuple(u))
    breakdown = log_gen_fun_asympt(params, fam, r)
    # the centering removes mu_sum term by term
    value = breakdown.sigma_sum + breakdown.cross_sum + breakdown.barnes_sum
    logger.debug(f"CLT log-mgf at r={r:.4g} ({normalization}): u={u}, value={value:.6g}")
    return value
