"""
Quadrature primitives for the Pearcey lab.
Gauss-Legendre rules, truncated complex rays and composite panel layouts.
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from common.errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

MAX_RULE_ORDER = 512
_NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on [-1, 1]."""
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def is_valid(self) -> bool:
        """Check ordering, symmetry and weight sum."""
        if len(self.nodes) != self.order or len(self.weights) != self.order:
            return False
        return bool(
            np.all(np.diff(self.nodes) > 0)
            and np.allclose(self.nodes, -self.nodes[::-1], atol=1e-15)
            and np.all(self.weights > 0)
            and abs(self.weights.sum() - 2.0) <= 1e-14
        )

    def mapped(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and weights mapped onto the real interval [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (1.0 + self.nodes), half * self.weights


@dataclass(frozen=True)
class RaySegment:
    """Straight segment origin + direction * s for s in [0, length]."""
    origin: complex
    direction: complex
    length: float

    def __post_init__(self):
        if abs(abs(self.direction) - 1.0) > 1e-12:
            raise InvalidArgumentError(f"Ray direction must be unit modulus, got |d| = {abs(self.direction)}")
        if not self.length > 0:
            raise InvalidArgumentError(f"Ray length must be positive, got {self.length}")

    @classmethod
    def from_angle(cls, origin: complex, angle: float, length: float) -> 'RaySegment':
        return cls(complex(origin), complex(np.exp(1j * angle)), float(length))

    def point(self, s):
        return self.origin + self.direction * s


@lru_cache(maxsize=64)
def _legendre_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    # Chebyshev-type initial guess, refined by Newton on P_n via the three-term recursion
    k = np.arange(1, n + 1)
    y = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(_NEWTON_MAX_ITER):
        p_prev, p_cur = np.ones_like(y), y.copy()
        for j in range(2, n + 1):
            p_prev, p_cur = p_cur, ((2 * j - 1) * y * p_cur - (j - 1) * p_prev) / j
        dp = n * (y * p_cur - p_prev) / (y * y - 1.0)
        step = p_cur / dp
        y = y - step
        if np.max(np.abs(step)) <= 1e-15:
            break
    else:
        logger.warning(f"Gauss-Legendre Newton iteration for n={n} hit the iteration cap")

    p_prev, p_cur = np.ones_like(y), y.copy()
    for j in range(2, n + 1):
        p_prev, p_cur = p_cur, ((2 * j - 1) * y * p_cur - (j - 1) * p_prev) / j
    dp = n * (y * p_cur - p_prev) / (y * y - 1.0)
    weights = 2.0 / ((1.0 - y * y) * dp * dp)

    order = np.argsort(y)
    y, weights = y[order], weights[order]
    # exact symmetry
    y = 0.5 * (y - y[::-1])
    weights = 0.5 * (weights + weights[::-1])
    y.setflags(write=False)
    weights.setflags(write=False)
    return y, weights


def gauss_legendre(n: int) -> QuadRule:
    """
    Build the n-point Gauss-Legendre rule on [-1, 1].

    Args:
        n: Number of nodes, 1 <= n <= 512

    Returns:
        QuadRule integrating polynomials of degree 2n-1 exactly
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_RULE_ORDER:
        raise InvalidArgumentError(f"Gauss-Legendre order must be an integer in [1, {MAX_RULE_ORDER}], got {n!r}")
    nodes, weights = _legendre_rule(int(n))
    return QuadRule(nodes=nodes, weights=weights, order=int(n))


def _evaluate(f: Callable, t: np.ndarray) -> np.ndarray:
    values = np.broadcast_to(np.asarray(f(t), dtype=complex), t.shape)
    bad = ~np.isfinite(values)
    if np.any(bad):
        node = complex(t[np.argmax(bad)])
        raise NumericError(f"Integrand not finite at node {node}", node=node)
    return values


def integrate_segment(f: Callable, seg: RaySegment, rule: QuadRule) -> complex:
    """
    Integrate f along a straight segment with a single Gauss-Legendre panel.

    Args:
        f: Vectorized complex function of a complex argument
        seg: Segment to integrate over
        rule: Quadrature rule on [-1, 1]

    Returns:
        Approximation of the line integral of f along seg
    """
    scale = seg.direction * seg.length / 2.0
    t = seg.origin + scale * (1.0 + rule.nodes)
    values = _evaluate(f, t)
    return complex(np.sum(rule.weights * values) * scale)


def integrate_panels(f: Callable, origin: complex, direction: complex,
                     breaks: np.ndarray, rule: QuadRule) -> complex:
    """Composite integral of f along origin + direction*s over consecutive panels given by breaks."""
    t, w = panel_nodes(origin, direction, breaks, rule)
    return complex(np.sum(w * _evaluate(f, t)))


def panel_nodes(origin: complex, direction: complex, breaks: np.ndarray,
                rule: QuadRule) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flattened complex nodes and direction-weighted weights for composite panels.

    Args:
        origin: Start of the ray
        direction: Unit complex direction
        breaks: Increasing arc-length breakpoints, breaks[0] is usually 0
        rule: Rule applied on every panel

    Returns:
        (points, weights) so that sum(weights * f(points)) approximates the integral
    """
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (hi - lo)
    s = lo + half * (1.0 + rule.nodes[None, :])
    w = half * rule.weights[None, :]
    return (origin + direction * s).ravel(), (direction * w).ravel()


def truncation_radius(c: float, eps: float) -> float:
    """Smallest T with exp(-c T^4) <= eps."""
    if not c > 0:
        raise InvalidArgumentError(f"Quartic decay coefficient must be positive, got {c}")
    if not 0 < eps <= 1:
        raise InvalidArgumentError(f"Tail bound must lie in (0, 1], got {eps}")
    return (math.log(1.0 / eps) / c) ** 0.25


def scan_ray_length(log_magnitude: Callable, eps: float, c: float = 0.25,
                    samples: int = 2001) -> float:
    """
    Truncation length for a ray whose integrand has log-magnitude log_magnitude(s).

    The integrand is cut where it has fallen below eps times its peak for good;
    the quartic coefficient c seeds the initial scan range.

    Args:
        log_magnitude: Vectorized real function of arc length s >= 0
        eps: Relative tail bound
        c: Leading quartic decay coefficient of log_magnitude

    Returns:
        Arc length beyond which the integrand is negligible
    """
    drop = math.log(1.0 / eps)
    reach = max(2.0 * truncation_radius(c, eps), 1.0)
    for _ in range(40):
        s = np.linspace(0.0, reach, samples)
        g = np.asarray(log_magnitude(s), dtype=float)
        peak = np.max(g)
        above = np.nonzero(g >= peak - drop)[0]
        last = above[-1]
        if last < samples - 20:
            return float(s[last + 1])
        reach *= 1.5
    raise NumericError(f"Ray integrand does not decay within arc length {reach:.3g}")


def panel_breaks(values: np.ndarray, s: np.ndarray, budget: float, max_width: float,
                 grading: int = 3) -> np.ndarray:
    """
    Breakpoints along a ray that keep the variation of the exponent per panel below budget.

    Args:
        values: Complex exponent sampled at arc lengths s
        s: Increasing sample positions starting at 0
        budget: Allowed |change of exponent| per panel
        max_width: Upper bound on any panel width
        grading: Number of geometric refinements of the first panel

    Returns:
        Increasing breakpoints from 0 to s[-1]
    """
    variation = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(values)))])
    count = max(1, int(math.ceil(variation[-1] / budget)))
    breaks = np.interp(np.linspace(0.0, variation[-1], count + 1), variation, s) if variation[-1] > 0 \
        else np.array([0.0, s[-1]])
    breaks[0], breaks[-1] = 0.0, s[-1]

    widths = np.diff(breaks)
    pieces = np.maximum(1, np.ceil(widths / max_width).astype(int))
    refined = [np.linspace(a, b, k + 1)[:-1] for a, b, k in zip(breaks[:-1], breaks[1:], pieces)]
    breaks = np.concatenate(refined + [[breaks[-1]]])

    first = breaks[1]
    graded = first * 0.5 ** np.arange(grading, 0, -1)
    return np.concatenate([[0.0], graded, breaks[1:]])
