"""
Domain and result records for the Pearcey lab.
Interval families, generating-function results, statistics and check reports.
"""

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import InvalidArgumentError, DomainError


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Cannot serialize {type(value).__name__}")


class SerializableRecord:
    """Mixin giving dataclass records dict and JSON forms."""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def serialize(self) -> bytes:
        """Serialize the record to UTF-8 JSON."""
        try:
            return json.dumps(self.to_dict(), separators=(',', ':'), default=_json_default).encode('utf-8')
        except Exception as e:
            raise ValueError(f"Failed to serialize {type(self).__name__}: {e}")


@dataclass(frozen=True)
class IntervalFamily(SerializableRecord):
    """
    Endpoints 0 < x_1 < ... < x_m with weights u_1..u_m.

    N(x) counts points in (-x, x); the generating function is
    E[prod_j exp(u_j N(r x_j))].
    """
    x: Tuple[float, ...]
    u: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'x', tuple(float(v) for v in self.x))
        object.__setattr__(self, 'u', tuple(float(v) for v in self.u))
        if len(self.x) == 0:
            raise InvalidArgumentError("Interval family needs at least one endpoint")
        if len(self.x) != len(self.u):
            raise InvalidArgumentError(f"Got {len(self.x)} endpoints but {len(self.u)} weights")
        if not all(math.isfinite(v) for v in self.x + self.u):
            raise InvalidArgumentError(f"Endpoints and weights must be finite: x={self.x}, u={self.u}")
        if self.x[0] <= 0 or any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise InvalidArgumentError(f"Endpoints must satisfy 0 < x_1 < ... < x_m, got {self.x}")

    @classmethod
    def base(cls, x: Sequence[float]) -> 'IntervalFamily':
        """Family with all weights zero."""
        return cls(tuple(x), tuple(0.0 for _ in x))

    def with_u(self, u: Sequence[float]) -> 'IntervalFamily':
        return IntervalFamily(self.x, tuple(u))

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def s(self) -> np.ndarray:
        """s_j = exp(u_j + ... + u_m) for j = 1..m followed by s_{m+1} = 1."""
        tails = np.cumsum(np.asarray(self.u)[::-1])[::-1]
        return np.append(np.exp(tails), 1.0)

    @property
    def frak_s(self) -> np.ndarray:
        """(s_{j+1} - s_j) / (2 pi i), the jump weights of the frame form."""
        s = self.s
        return (s[1:] - s[:-1]) / (2j * math.pi)

    @property
    def beta(self) -> np.ndarray:
        """u_j / (2 pi i); purely imaginary."""
        return np.asarray(self.u) / (2j * math.pi)

    def is_null(self) -> bool:
        return all(v == 0.0 for v in self.u)

    def require_distinct(self):
        """Raise DomainError if two endpoints coincide."""
        if len(set(self.x)) != len(self.x):
            raise DomainError(f"Endpoints must be distinct, got {self.x}")


@dataclass
class GenFunResult(SerializableRecord):
    """log F(r x, u) from the Nystrom determinant."""
    log_F: float
    r: float
    nodes_per_panel: int
    est_error: float
    dimension: int = 0

    def is_valid(self) -> bool:
        return math.isfinite(self.log_F) and self.est_error >= 0


@dataclass
class AsymptoticBreakdown(SerializableRecord):
    """Term-by-term large-r expansion of log F."""
    mu_sum: float
    sigma_sum: float
    cross_sum: float
    barnes_sum: float
    total: float = field(default=None)

    def __post_init__(self):
        if self.total is None:
            self.total = self.mu_sum + self.sigma_sum + self.cross_sum + self.barnes_sum

    def is_valid(self) -> bool:
        parts = self.mu_sum + self.sigma_sum + self.cross_sum + self.barnes_sum
        return abs(self.total - parts) <= 1e-13 * max(1.0, abs(parts))


@dataclass
class CountingStats(SerializableRecord):
    """Means, variances and covariances of the counting functions N(r x_j)."""
    r: float
    x: List[float]
    mean: List[float]
    var: List[float] = field(default_factory=list)
    cov: List[List[float]] = field(default_factory=list)
    source: str = "nystrom"
    est_error: Optional[float] = None

    def covariance(self, j: int, k: int) -> float:
        return self.cov[j][k]


@dataclass
class GradientReport(SerializableRecord):
    """Deviation between the ODE right-hand side and the Hamiltonian vector field."""
    max_deviation: float
    scale: float
    per_block: Dict[str, float]

    @property
    def relative(self) -> float:
        return self.max_deviation / self.scale


@dataclass
class CrossCheckReport(SerializableRecord):
    """d/dr log F from the determinant against 2 H from the asymptotic formula."""
    r: float
    dlogF_num: float
    two_H_asympt: float
    difference: float
    est_error: float = 0.0
