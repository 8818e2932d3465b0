"""
Special functions for the Pearcey lab.
Complex Gamma, the Barnes G pair term and the Pearcey contour integrals with their frame.
"""

import cmath
import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Any, List, Tuple

import numpy as np
from scipy import special as sp

from common.errors import InvalidArgumentError, DomainError, NumericError, RangeError
from common.lab_config import LabSettings, DEFAULT_SETTINGS
from common.quadrature import gauss_legendre, panel_nodes, panel_breaks, scan_ray_length

logger = logging.getLogger(__name__)

OMEGA = cmath.exp(2j * math.pi / 3)
EULER_GAMMA = 0.57721566490153286061
LOG_2PI = math.log(2.0 * math.pi)

CONTOUR_INDICES = (0, 1, 4)
_SERIES_RADIUS = 0.9
_SERIES_TERMS = 400
_ZETA_K = np.arange(2, _SERIES_TERMS + 1)
_ZETA_COEFFS = (-1.0) ** _ZETA_K * sp.zeta(_ZETA_K.astype(float)) / (_ZETA_K + 1)


@dataclass(frozen=True)
class PearceyParams:
    """Cusp parameter of the Pearcey kernel family."""
    rho: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.rho):
            raise InvalidArgumentError(f"rho must be finite, got {self.rho}")

    def to_dict(self) -> Dict[str, Any]:
        return {'rho': self.rho}


@dataclass(frozen=True)
class PearceyFrame:
    """Values of the three Pearcey solutions and two derivative rows at z."""
    z: complex
    entries: np.ndarray

    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, CONTOUR_INDICES.index(j)]


def gamma_complex(z: complex) -> complex:
    """
    Euler Gamma function at a complex point.

    Args:
        z: Argument, not a non-positive integer

    Returns:
        Gamma(z)
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise DomainError(f"Gamma has a pole at z = {z.real:g}")
    value = complex(sp.gamma(z))
    if not cmath.isfinite(value):
        raise RangeError(f"Gamma({z}) overflows")
    return value


def arg_gamma(z: complex) -> float:
    """Principal argument of Gamma(z)."""
    return float(np.angle(gamma_complex(z)))


def log_barnes_g1(z: complex) -> complex:
    """
    log G(1+z) for |z| <= 4 with Re z > -1/2.

    Taylor series with zeta coefficients inside |z| < 0.9, otherwise the
    integral identity log G(1+z) = z/2 log 2pi - z(z+1)/2 + z log Gamma(1+z)
    - int_0^z log Gamma(1+t) dt taken along the straight segment.
    """
    z = complex(z)
    if abs(z) > 4.0 or z.real <= -0.5:
        raise DomainError(f"log G(1+z) only supported for |z| <= 4 and Re z > -1/2, got z = {z}")
    if abs(z) < _SERIES_RADIUS:
        with np.errstate(under='ignore'):
            series = complex(np.sum(_ZETA_COEFFS * z ** (_ZETA_K + 1)))
        return 0.5 * z * LOG_2PI - 0.5 * (z + (1.0 + EULER_GAMMA) * z * z) + series

    length = abs(z)
    panels = max(1, int(math.ceil(length / 0.5)))
    t, w = panel_nodes(0.0, z / length, np.linspace(0.0, length, panels + 1), gauss_legendre(30))
    integral = complex(np.sum(w * sp.loggamma(1.0 + t)))
    return 0.5 * z * LOG_2PI - 0.5 * z * (z + 1.0) + z * complex(sp.loggamma(1.0 + z)) - integral


def log_barnes_pair(u: float) -> float:
    """
    Barnes term 2 log(G(1 - u/(2 pi i)) G(1 + u/(2 pi i))) of the large-gap expansion.

    The two arguments are conjugate, so the value is 4 Re log G(1 + iu/(2 pi)).
    """
    if abs(u) > 20.0:
        raise DomainError(f"Barnes pair term supported for |u| <= 20, got {u}")
    if u == 0.0:
        return 0.0
    return 4.0 * log_barnes_g1(1j * u / (2.0 * math.pi)).real


def balance_exponent(x: float) -> float:
    """Growth rate (3/8)|x|^(4/3) of the Q-type solutions on the real line."""
    return 0.375 * abs(x) ** (4.0 / 3.0)


def _contour_rays(kind: str, z: complex) -> List[Tuple[float, complex, complex]]:
    # (orientation, origin, direction) of every ray making up the contour
    if kind == 'P0':
        a = z.real
        shift = 0.5 * math.copysign(abs(a) ** (1.0 / 3.0), a)
        return [(1.0, 1j * shift, 1.0 + 0j), (-1.0, 1j * shift, -1.0 + 0j)]
    if kind == 'P1':
        return [(-1.0, 0j, 1j), (1.0, 0j, 1.0 + 0j)]
    if kind == 'P4':
        return [(-1.0, 0j, -1j), (1.0, 0j, 1.0 + 0j)]
    if kind == 'Q':
        return [(-1.0, 0j, cmath.exp(0.25j * math.pi)), (1.0, 0j, cmath.exp(0.75j * math.pi)),
                (-1.0, 0j, cmath.exp(-0.75j * math.pi)), (1.0, 0j, cmath.exp(-0.25j * math.pi))]
    raise InvalidArgumentError(f"Unknown contour kind {kind!r}")


def _exponent(kind: str, z: complex, rho: float):
    sign = 1.0 if kind == 'Q' else -1.0

    def exponent(t):
        t2 = t * t
        return sign * (0.25 * t2 * t2 + 0.5 * rho * t2) + 1j * t * z
    return exponent


@lru_cache(maxsize=1024)
def _contour_rule(kind: str, z: complex, rho: float, settings: LabSettings) -> Tuple[np.ndarray, np.ndarray]:
    exponent = _exponent(kind, z, rho)
    rule = gauss_legendre(settings.panel_order)
    points, weights = [], []
    for orientation, origin, direction in _contour_rays(kind, z):
        length = scan_ray_length(lambda s: exponent(origin + direction * s).real, settings.tail_eps)
        s = np.linspace(0.0, length, 1001)
        breaks = panel_breaks(exponent(origin + direction * s), s, settings.panel_variation,
                              settings.panel_length)
        t, w = panel_nodes(origin, direction, breaks, rule)
        points.append(t)
        weights.append(orientation * w)
    t = np.concatenate(points)
    w = np.concatenate(weights)
    logger.debug(f"{kind} contour at z={z:.4g}, rho={rho:g}: {t.size} nodes")
    return t, w


def contour_derivatives(kind: str, z: complex, rho: float, max_order: int,
                        settings: LabSettings = DEFAULT_SETTINGS, log_scale: float = 0.0) -> np.ndarray:
    """
    Contour integral of exp(exponent + log_scale) * (it)^k for k = 0..max_order.

    Args:
        kind: 'P0', 'P1', 'P4' for the solutions of p''' = rho p' + z p, 'Q' for the Sigma integral
        z: Evaluation point
        rho: Cusp parameter
        max_order: Highest derivative order
        settings: Quadrature tolerances
        log_scale: Real constant added to the exponent

    Returns:
        Complex array of length max_order + 1
    """
    z = complex(z)
    t, w = _contour_rule(kind, z, float(rho), settings)
    base = w * np.exp(_exponent(kind, z, rho)(t) + log_scale)
    it = 1j * t
    out = np.empty(max_order + 1, dtype=complex)
    for k in range(max_order + 1):
        out[k] = np.sum(base)
        base = base * it
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{kind} contour quadrature not finite at z = {z}", node=z)
    return out


def _check_order(order: int, top: int = 3):
    if not 0 <= order <= top:
        raise InvalidArgumentError(f"Derivative order must lie in [0, {top}], got {order}")


def pearcey_P(j: int, z: complex, params: PearceyParams, order: int = 0,
              settings: LabSettings = DEFAULT_SETTINGS, direct: bool = False) -> complex:
    """
    Derivative of order `order` of the contour integral over Gamma_j, j in {0, 1, 4}.

    The third derivative comes from p''' = rho p' + z p unless direct is set.
    """
    if j not in CONTOUR_INDICES:
        raise InvalidArgumentError(f"Contour index must be one of {CONTOUR_INDICES}, got {j}")
    _check_order(order)
    kind = f"P{j}"
    if order == 3 and not direct:
        d = contour_derivatives(kind, z, params.rho, 1, settings)
        return complex(params.rho * d[1] + complex(z) * d[0])
    return complex(contour_derivatives(kind, z, params.rho, order, settings)[order])


def pearcey_PQ_scalar(x: float, params: PearceyParams, which: str, order: int = 0,
                      settings: LabSettings = DEFAULT_SETTINGS, direct: bool = False) -> complex:
    """
    The functions P(x) and Q(y) of the Pearcey kernel and their derivatives.

    Args:
        x: Real evaluation point
        params: Cusp parameter
        which: 'P' or 'Q'
        order: Derivative order 0..3

    Returns:
        Complex value; P is real up to quadrature noise for real x
    """
    if which not in ('P', 'Q'):
        raise InvalidArgumentError(f"which must be 'P' or 'Q', got {which!r}")
    _check_order(order)
    kind = 'P0' if which == 'P' else 'Q'
    if order == 3 and not direct:
        d = contour_derivatives(kind, x, params.rho, 1, settings) / (2.0 * math.pi)
        sign = 1.0 if which == 'P' else -1.0
        return complex(params.rho * d[1] + sign * x * d[0])
    return complex(contour_derivatives(kind, x, params.rho, order, settings)[order] / (2.0 * math.pi))


def pearcey_values(xs, params: PearceyParams, which: str, max_order: int = 2,
                   balanced: bool = False, settings: LabSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """
    P or Q and derivatives up to max_order at many real points.

    With balanced=True, P-values carry the factor exp(phi(x)) and Q-values
    exp(-phi(y)), phi = balance_exponent, which keeps kernel entries O(1).

    Returns:
        Complex array of shape (max_order + 1, len(xs))
    """
    if which not in ('P', 'Q'):
        raise InvalidArgumentError(f"which must be 'P' or 'Q', got {which!r}")
    _check_order(max_order, top=2)
    kind = 'P0' if which == 'P' else 'Q'
    sign = 1.0 if which == 'P' else -1.0
    xs = np.asarray(xs, dtype=float)
    out = np.empty((max_order + 1, xs.size), dtype=complex)
    for i, x in enumerate(xs):
        scale = sign * balance_exponent(x) if balanced else 0.0
        out[:, i] = contour_derivatives(kind, x, params.rho, max_order, settings, log_scale=scale)
    return out / (2.0 * math.pi)


def psi_tilde(z: complex, params: PearceyParams, settings: LabSettings = DEFAULT_SETTINGS) -> PearceyFrame:
    """Frame with columns P_0, P_1, P_4 and rows of derivative order 0, 1, 2."""
    entries = np.empty((3, 3), dtype=complex)
    for col, j in enumerate(CONTOUR_INDICES):
        entries[:, col] = contour_derivatives(f"P{j}", z, params.rho, 2, settings)
    return PearceyFrame(z=complex(z), entries=entries)
