"""
Numerical defaults and environment overrides for the Pearcey lab.
One settings object is shared by the solvers and the command line.
"""

import os
import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, Any

from common.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

JOBS_ENV_VAR = "PEARCEY_LAB_JOBS"
LAB_VERSION = "1.0.0"


@dataclass(frozen=True)
class LabSettings:
    """Tolerances and discretization defaults."""
    # contour quadrature
    tail_eps: float = 1e-18
    panel_length: float = 0.25
    panel_order: int = 20
    panel_variation: float = 4.0
    # kernel
    near_diagonal: float = 1e-8
    imag_tol_kernel: float = 1e-10
    # Fredholm determinant
    nystrom_tol: float = 1e-6
    imag_tol_det: float = 1e-8
    fd_step: float = 1e-2
    # Hamiltonian flow
    rk_rtol: float = 1e-10
    rk_atol: float = 1e-12
    rk_first_step: float = 1e-3
    overflow_log: float = 1400 * 0.6931471805599453
    # command line
    jobs: int = 1

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to a plain dictionary."""
        return asdict(self)

    def is_valid(self) -> bool:
        """Check that every tolerance is usable."""
        return (0 < self.tail_eps < 1 and self.panel_length > 0 and self.panel_order >= 2
                and self.near_diagonal > 0 and self.nystrom_tol > 0 and self.fd_step > 0
                and self.rk_rtol > 0 and self.rk_atol > 0 and self.jobs >= 1)

    @classmethod
    def from_env(cls, environ=None) -> 'LabSettings':
        """
        Build settings with overrides taken from the environment.

        Args:
            environ: Mapping to read instead of os.environ

        Returns:
            LabSettings with the jobs default taken from PEARCEY_LAB_JOBS
        """
        environ = os.environ if environ is None else environ
        settings = cls()
        raw = environ.get(JOBS_ENV_VAR)
        if raw:
            try:
                jobs = int(raw)
            except ValueError:
                raise InvalidArgumentError(f"{JOBS_ENV_VAR} must be an integer, got {raw!r}")
            if jobs < 1:
                raise InvalidArgumentError(f"{JOBS_ENV_VAR} must be positive, got {jobs}")
            settings = replace(settings, jobs=jobs)
            logger.debug(f"jobs default taken from {JOBS_ENV_VAR}={jobs}")
        return settings


DEFAULT_SETTINGS = LabSettings()
