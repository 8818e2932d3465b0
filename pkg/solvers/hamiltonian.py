"""
Hamiltonian system of the Pearcey generating function.
The 6m+2 coupled ODEs, their Hamiltonian, large-r initial data, flow and identity checks.
"""

import math
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from common.errors import (InvalidArgumentError, DomainError, PreconditionError, RangeError,
                           StiffnessError)
from common.lab_config import LabSettings, DEFAULT_SETTINGS
from common.records import IntervalFamily, GradientReport, CrossCheckReport
from common.special_functions import PearceyParams
from solvers.asymptotics import (theta3, amp_A, phase_theta, phase_rate, hamiltonian_asympt)
from solvers.fredholm import log_gen_fun
from solvers.run_monitor import MONITOR

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
THIRD_PI = math.pi / 3.0


@dataclass(frozen=True)
class HamiltonianState:
    """
    Phase-space point (r; p0, q0, p_{j,k}, q_{j,k}) with j = 1..m, k = 1..3.

    constraint_tol bounds the per-j traces sum_k p_{j,k} q_{j,k} the state is known to satisfy.
    """
    r: float
    p0: complex
    q0: complex
    p: np.ndarray
    q: np.ndarray
    constraint_tol: float = 0.0

    def __post_init__(self):
        p = np.array(self.p, dtype=complex).reshape(-1, 3)
        q = np.array(self.q, dtype=complex).reshape(-1, 3)
        if p.shape != q.shape:
            raise InvalidArgumentError(f"p and q blocks differ in shape: {p.shape} vs {q.shape}")
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'p0', complex(self.p0))
        object.__setattr__(self, 'q0', complex(self.q0))

    @property
    def m(self) -> int:
        return self.p.shape[0]

    def traces(self) -> np.ndarray:
        """Per-j constraint values sum_k p_{j,k} q_{j,k}."""
        return np.sum(self.p * self.q, axis=1)

    def trace_scale(self) -> np.ndarray:
        return np.sum(np.abs(self.p * self.q), axis=1)

    def pack(self) -> np.ndarray:
        return np.concatenate([[self.p0, self.q0], self.p.ravel(), self.q.ravel()])

    @classmethod
    def unpack(cls, r: float, y: np.ndarray, constraint_tol: float = 0.0) -> 'HamiltonianState':
        m = (len(y) - 2) // 6
        return cls(r=float(r), p0=y[0], q0=y[1], p=y[2:2 + 3 * m].reshape(m, 3),
                   q=y[2 + 3 * m:].reshape(m, 3), constraint_tol=constraint_tol)

    @classmethod
    def zero(cls, r: float, m: int, p0: complex = 0.0, q0: complex = 0.0) -> 'HamiltonianState':
        return cls(r=r, p0=p0, q0=q0, p=np.zeros((m, 3)), q=np.zeros((m, 3)))

    def to_dict(self) -> Dict:
        return {'r': self.r, 'p0': [self.p0.real, self.p0.imag], 'q0': [self.q0.real, self.q0.imag],
                'p': [[[v.real, v.imag] for v in row] for row in self.p],
                'q': [[[v.real, v.imag] for v in row] for row in self.q],
                'constraint_tol': self.constraint_tol}


@dataclass(frozen=True)
class StateDerivative:
    """d/dr of every coordinate of a HamiltonianState."""
    p0: complex
    q0: complex
    p: np.ndarray
    q: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate([[self.p0, self.q0], self.p.ravel(), self.q.ravel()])


@dataclass(frozen=True)
class DerivedCouplings:
    """S_{kl} = sum_j p_{j,k} q_{j,l}, rank-one blocks A_j = q_j p_j^t and coupling matrices M_j."""
    S: np.ndarray
    A: np.ndarray
    M: np.ndarray

    @classmethod
    def from_state(cls, state: HamiltonianState, x: Sequence[float]) -> 'DerivedCouplings':
        _require_r(state.r)
        return cls(S=state.p.T @ state.q, A=np.einsum('jk,jl->jkl', state.q, state.p),
                   M=_coupling_matrices(state, np.asarray(x, dtype=float)))


def _require_r(r: float):
    if not r > 0:
        raise DomainError(f"The Hamiltonian system is singular at r = {r}")


def _check_width(state: HamiltonianState, x: Sequence[float]):
    if state.m != len(x):
        raise InvalidArgumentError(f"State has {state.m} blocks but the family has {len(x)} endpoints")


def _coupling_matrices(state: HamiltonianState, x: np.ndarray) -> np.ndarray:
    r = state.r
    S = state.p.T @ state.q
    M = np.zeros((len(x), 3, 3), dtype=complex)
    M[:, 0, 0] = 2.0 * S[0, 0] / r
    M[:, 0, 1] = x
    M[:, 0, 2] = 2.0 * S[2, 0] / r
    M[:, 1, 0] = SQRT2 * state.p0 * x
    M[:, 1, 1] = 2.0 * S[1, 1] / r
    M[:, 1, 2] = x
    M[:, 2, 0] = r * x * x + 2.0 * S[0, 2] / r
    M[:, 2, 1] = SQRT2 * state.q0 * x
    M[:, 2, 2] = 2.0 * S[2, 2] / r
    return M


def hamiltonian(state: HamiltonianState, fam: IntervalFamily) -> complex:
    """
    H(r) of the system.

    The double sum over (p_{k,1} p_{l,3} - p_{k,3} p_{l,1})(q_{k,1} q_{l,3} - q_{k,3} q_{l,1})
    equals 2 (S_11 S_33 - S_13 S_31).
    """
    _require_r(state.r)
    _check_width(state, fam.x)
    x = np.asarray(fam.x)
    p, q, r = state.p, state.q, state.r
    S = p.T @ q
    value = SQRT2 * state.p0 * np.sum(x * p[:, 1] * q[:, 0])
    value += SQRT2 * state.q0 * np.sum(x * p[:, 2] * q[:, 1])
    value += np.sum(x * p[:, 0] * q[:, 1]) + np.sum(x * p[:, 1] * q[:, 2])
    value += r * np.sum(x * x * p[:, 2] * q[:, 0])
    tail = (S[0, 0] - S[1, 1] + S[2, 2]) ** 2 - 4.0 * (S[0, 0] * S[2, 2] - S[0, 2] * S[2, 0])
    return complex(value + tail / (2.0 * r))


def _rhs(state: HamiltonianState, x: np.ndarray) -> StateDerivative:
    p, q = state.p, state.q
    M = _coupling_matrices(state, x)
    dp0 = -SQRT2 * np.sum(x * p[:, 2] * q[:, 1])
    dq0 = SQRT2 * np.sum(x * p[:, 1] * q[:, 0])
    dq = np.einsum('jkl,jl->jk', M, q)
    dp = -np.einsum('jk,jkl->jl', p, M)
    return StateDerivative(p0=complex(dp0), q0=complex(dq0), p=dp, q=dq)


def ode_rhs(state: HamiltonianState, fam: IntervalFamily) -> StateDerivative:
    """
    Right-hand side: q_j' = M_j q_j, p_j' = -p_j M_j plus the p0, q0 equations.

    Args:
        state: Current point, r > 0
        fam: Supplies the endpoints x_j

    Returns:
        StateDerivative of all 6m + 2 coordinates
    """
    _require_r(state.r)
    _check_width(state, fam.x)
    return _rhs(state, np.asarray(fam.x, dtype=float))


def project_to_manifold(state: HamiltonianState) -> HamiltonianState:
    """Replace p_j by p_j - (p_j.q_j / q_j.q_j) q_j so every per-j trace vanishes."""
    p = state.p.copy()
    for j in range(state.m):
        qq = np.dot(state.q[j], state.q[j])
        if qq != 0:
            p[j] = p[j] - np.dot(p[j], state.q[j]) / qq * state.q[j]
    return replace(state, p=p, constraint_tol=0.0)


def _on_manifold(state: HamiltonianState, tol: float) -> bool:
    return bool(np.all(np.abs(state.traces()) <= tol * np.maximum(1.0, state.trace_scale())))


def gradient_check(state: HamiltonianState, fam: IntervalFamily, h: float = 1e-5,
                   manifold_tol: float = 1e-10) -> GradientReport:
    """
    Compare ode_rhs with the Hamiltonian vector field q' = dH/dp, p' = -dH/dq.

    The partial derivatives are central differences with real step h; H is a
    polynomial in the coordinates, so the holomorphic derivative is exact up to O(h^2).

    Args:
        state: Point on the constraint manifold
        fam: Supplies the endpoints x_j
        h: Finite-difference step

    Returns:
        GradientReport with the worst deviation and its scale
    """
    if not _on_manifold(state, manifold_tol):
        raise PreconditionError(f"State is off the constraint manifold: traces {state.traces()}")
    rhs = ode_rhs(state, fam).pack()
    y = state.pack()
    m = state.m
    gradient = np.empty_like(y)
    for i in range(y.size):
        step = np.zeros_like(y)
        step[i] = h
        plus = hamiltonian(HamiltonianState.unpack(state.r, y + step), fam)
        minus = hamiltonian(HamiltonianState.unpack(state.r, y - step), fam)
        gradient[i] = (plus - minus) / (2.0 * h)

    # position i is a "p" coordinate (p0 or p_{j,k}) when its conjugate q sits at i + offset
    field_ = np.empty_like(y)
    field_[0] = -gradient[1]
    field_[1] = gradient[0]
    field_[2:2 + 3 * m] = -gradient[2 + 3 * m:]
    field_[2 + 3 * m:] = gradient[2:2 + 3 * m]

    deviation = np.abs(rhs - field_)
    blocks = {'p0': float(deviation[0]), 'q0': float(deviation[1]),
              'p': float(np.max(deviation[2:2 + 3 * m])), 'q': float(np.max(deviation[2 + 3 * m:]))}
    scale = float(max(1.0, np.max(np.abs(rhs))))
    return GradientReport(max_deviation=float(np.max(deviation)), scale=scale, per_block=blocks)


def init_large_r(r: float, fam: IntervalFamily, params: PearceyParams, project: bool = False,
                 settings: LabSettings = DEFAULT_SETTINGS) -> HamiltonianState:
    """
    Leading-order large-r solution assembled from amplitudes A_j, phases and theta_3.

    Args:
        r: Scale
        fam: Endpoints and weights
        params: Cusp parameter
        project: Remove any residual per-j trace by projection

    Returns:
        HamiltonianState at r
    """
    _require_r(r)
    fam.require_distinct()
    if theta3(r * fam.x[-1], params) > settings.overflow_log:
        raise RangeError(f"theta_3(r x_m) = {theta3(r * fam.x[-1], params):.4g} exceeds the representable range")
    x, u = np.asarray(fam.x), np.asarray(fam.u)
    rho = params.rho
    m = fam.m
    lead = SQRT3 / (2.0 * math.pi)
    weighted = float(np.sum(u * x ** (2.0 / 3.0)))
    p0 = lead / SQRT2 * weighted * r ** (2.0 / 3.0) + (rho ** 3 / 54.0 + rho / 2.0) / SQRT2
    q0 = -lead / SQRT2 * weighted * r ** (2.0 / 3.0) + (-rho ** 3 / 54.0 + rho / 2.0) / SQRT2

    p = np.zeros((m, 3), dtype=complex)
    q = np.zeros((m, 3), dtype=complex)
    for j in range(m):
        grow = math.exp(0.5 * theta3(r * x[j], params))
        s = (r * x[j]) ** (1.0 / 3.0)
        vt = phase_theta(j, fam, r, params)
        amp = amp_A(j, fam)
        coupled = lead * float(np.sum(u * (x / x[j]) ** (2.0 / 3.0)))
        pre_p = u[j] / amp * grow / (3j * math.pi)
        pre_q = 2j * amp / grow
        p[j, 0] = -pre_p * s * (math.cos(vt - THIRD_PI) + coupled * math.cos(vt + THIRD_PI))
        p[j, 1] = pre_p * math.cos(vt)
        p[j, 2] = -pre_p / s * math.cos(vt + THIRD_PI)
        q[j, 0] = pre_q / s * math.sin(vt - THIRD_PI)
        q[j, 1] = -pre_q * math.sin(vt)
        q[j, 2] = pre_q * s * (math.sin(vt + THIRD_PI) - coupled * math.sin(vt - THIRD_PI))

    state = HamiltonianState(r=float(r), p0=p0, q0=q0, p=p, q=q)
    if project:
        return project_to_manifold(state)
    rel = np.abs(state.traces()) / np.maximum(1e-300, state.trace_scale())
    return replace(state, constraint_tol=float(np.max(rel)) if rel.size else 0.0)


def trace_relation_gap(state: HamiltonianState, params: PearceyParams) -> float:
    """|2 S_31 - (rho - sqrt2 (p0 + q0))|."""
    s31 = np.sum(state.p[:, 2] * state.q[:, 0])
    return float(abs(2.0 * s31 - (params.rho - SQRT2 * (state.p0 + state.q0))))


def small_r_anchor_gap(state: HamiltonianState, params: PearceyParams) -> Dict[str, float]:
    """Distance of p0, q0 from their r -> 0 limits (rho^3/54 + rho/2)/sqrt2 and (-rho^3/54 + rho/2)/sqrt2."""
    rho = params.rho
    return {'p0': float(abs(state.p0 - (rho ** 3 / 54.0 + rho / 2.0) / SQRT2)),
            'q0': float(abs(state.q0 - (-rho ** 3 / 54.0 + rho / 2.0) / SQRT2))}


def _block_atol(state: HamiltonianState, atol: float) -> np.ndarray:
    tiny = 1e-300
    m = state.m
    scale = np.empty(2 + 6 * m)
    scale[0] = max(abs(state.p0), tiny)
    scale[1] = max(abs(state.q0), tiny)
    for j in range(m):
        scale[2 + 3 * j:5 + 3 * j] = max(np.max(np.abs(state.p[j])), tiny)
        scale[2 + 3 * m + 3 * j:5 + 3 * m + 3 * j] = max(np.max(np.abs(state.q[j])), tiny)
    return atol * scale


def _integrate(initial: HamiltonianState, fam: IntervalFamily, r_target: float, tol: float,
               settings: LabSettings, dense: bool = False):
    _require_r(initial.r)
    _check_width(initial, fam.x)
    if not r_target > 0:
        raise DomainError(f"Target r must be positive, got {r_target}")
    if r_target == initial.r:
        raise InvalidArgumentError("Flow needs r_target different from the initial r")
    x = np.asarray(fam.x, dtype=float)
    m = initial.m

    def rhs(r, y):
        return _rhs(HamiltonianState.unpack(r, y), x).pack()

    span = abs(r_target - initial.r)
    atol = _block_atol(initial, tol * settings.rk_atol / settings.rk_rtol)
    first_step = min(settings.rk_first_step * initial.r, 0.5 * span)
    with MONITOR.timed("flow"):
        sol = solve_ivp(rhs, (initial.r, r_target), initial.pack(), method='RK45', rtol=tol, atol=atol,
                        first_step=first_step, dense_output=dense)
    MONITOR.count("rhs_evaluations", int(sol.nfev))
    if sol.status != 0:
        if not np.all(np.isfinite(sol.y)):
            raise RangeError(f"Flow overflowed near r = {sol.t[-1]:.6g}: {sol.message}")
        raise StiffnessError(f"Flow step size collapsed near r = {sol.t[-1]:.6g}: {sol.message}")
    final = sol.y[:, -1]
    if not np.all(np.isfinite(final)) or np.max(np.abs(final)) > 1e300:
        raise RangeError(f"Flow left the representable range before r = {r_target}")
    logger.debug(f"Flow {initial.r:g} -> {r_target:g}, m={m}: {sol.t.size} steps, {sol.nfev} evaluations")
    return sol


def flow(initial: HamiltonianState, fam: IntervalFamily, r_target: float, tol: Optional[float] = None,
         settings: LabSettings = DEFAULT_SETTINGS) -> HamiltonianState:
    """
    Integrate the system from initial.r to r_target (either direction).

    Dormand-Prince 5(4) with relative tolerance tol and absolute tolerances
    scaled per block by the block magnitude at the start.

    Args:
        initial: Starting state
        fam: Supplies the endpoints x_j
        r_target: End point, r_target > 0
        tol: Relative tolerance, defaults to settings.rk_rtol

    Returns:
        HamiltonianState at r_target; constraint_tol grows by the observed trace drift
    """
    tol = settings.rk_rtol if tol is None else tol
    sol = _integrate(initial, fam, r_target, tol, settings)
    state = HamiltonianState.unpack(r_target, sol.y[:, -1])
    drift = float(np.max(np.abs(state.traces() - initial.traces()) /
                         np.maximum(1.0, initial.trace_scale()))) if initial.m else 0.0
    span = abs(r_target - initial.r)
    if drift > 10.0 * tol * max(1.0, span):
        logger.warning(f"Constraint drift {drift:.2e} above 10 tol x path length over [{initial.r}, {r_target}]")
    return replace(state, constraint_tol=initial.constraint_tol + drift)


def sample_trajectory(initial: HamiltonianState, fam: IntervalFamily, r_end: float, n_samples: int,
                      tol: Optional[float] = None,
                      settings: LabSettings = DEFAULT_SETTINGS) -> List[HamiltonianState]:
    """States on a uniform r-grid from initial.r to r_end, read from the dense output of one flow."""
    if n_samples < 2:
        raise InvalidArgumentError(f"Need at least 2 samples, got {n_samples}")
    tol = settings.rk_rtol if tol is None else tol
    sol = _integrate(initial, fam, r_end, tol, settings, dense=True)
    grid = np.linspace(initial.r, r_end, n_samples)
    values = sol.sol(grid)
    return [HamiltonianState.unpack(r, values[:, i]) for i, r in enumerate(grid)]


def _grid_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences at interior points; NaN where the stencil does not fit."""
    n = values.size
    out = np.full(n, np.nan, dtype=complex)
    if n >= 5:
        out[2:-2] = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (12.0 * h)
    else:
        out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    return out


def _uniform_step(trajectory: Sequence[HamiltonianState]) -> float:
    rs = np.array([s.r for s in trajectory])
    steps = np.diff(rs)
    if not np.allclose(steps, steps[0], rtol=1e-8, atol=0.0):
        raise InvalidArgumentError("Trajectory samples must be equally spaced in r")
    return float(steps[0])


def energy_identity_check(trajectory: Sequence[HamiltonianState], fam: IntervalFamily) -> float:
    """
    Relative residual of
    p0 q0' + sum p q' - H = H + (1/4) d/dr (2 p0 q0 + sum_j [p_{j,2} q_{j,2} + 2 p_{j,3} q_{j,3}] - 3 r H)
    at the interior samples of a uniformly spaced trajectory.
    """
    if len(trajectory) < 3:
        raise InvalidArgumentError(f"Energy identity needs at least 3 samples, got {len(trajectory)}")
    h = _uniform_step(trajectory)
    lhs, bracket, size = [], [], []
    for state in trajectory:
        d = ode_rhs(state, fam)
        H = hamiltonian(state, fam)
        pairs = state.p * d.q
        lhs.append(state.p0 * d.q0 + np.sum(pairs) - H)
        bracket.append(2.0 * state.p0 * state.q0 + np.sum(state.p[:, 1] * state.q[:, 1]
                                                           + 2.0 * state.p[:, 2] * state.q[:, 2])
                       - 3.0 * state.r * H)
        size.append(abs(state.p0 * d.q0) + np.sum(np.abs(pairs)) + 2.0 * abs(H))
    lhs = np.array(lhs)
    H_values = np.array([hamiltonian(s, fam) for s in trajectory])
    dbracket = _grid_derivative(np.array(bracket), h)
    interior = ~np.isnan(dbracket)
    residual = np.abs(lhs - H_values - 0.25 * dbracket)[interior]
    scale = max(1e-300, float(np.max(np.array(size)[interior] + 0.25 * np.abs(dbracket[interior]))))
    return float(np.max(residual) / scale)


def parameter_identity_check(minus: Sequence[HamiltonianState], center: Sequence[HamiltonianState],
                             plus: Sequence[HamiltonianState], fam: IntervalFamily, delta: float) -> float:
    """
    Relative residual of d/dgamma (p0 q0' + sum p q' - H) = d/dr (sum p dq/dgamma + p0 dq0/dgamma)
    for three trajectories at parameter values gamma - delta, gamma, gamma + delta on one r-grid.
    """
    if not (len(minus) == len(center) == len(plus)):
        raise InvalidArgumentError("Trajectories must share one r-grid")
    if len(center) < 3:
        raise InvalidArgumentError(f"Parameter identity needs at least 3 samples, got {len(center)}")
    h = _uniform_step(center)

    def action(state: HamiltonianState) -> complex:
        d = ode_rhs(state, fam)
        return state.p0 * d.q0 + np.sum(state.p * d.q) - hamiltonian(state, fam)

    d_action = np.array([(action(b) - action(a)) / (2.0 * delta) for a, b in zip(minus, plus)])
    flux = np.array([c.p0 * (b.q0 - a.q0) / (2.0 * delta) + np.sum(c.p * (b.q - a.q)) / (2.0 * delta)
                     for a, c, b in zip(minus, center, plus)])
    d_flux = _grid_derivative(flux, h)
    interior = ~np.isnan(d_flux)
    residual = np.abs(d_action[interior] - d_flux[interior])
    scale = max(1e-300, float(np.max(np.abs(d_action[interior]) + np.abs(d_flux[interior]))))
    return float(np.max(residual) / scale)


def asymptotic_residual(r: float, fam: IntervalFamily, params: PearceyParams, samples: int = 16,
                        step: float = 1e-3) -> float:
    """
    Relative residual of the large-r solution in the ODE, over the p_{j,k}, q_{j,k} blocks.

    The residual is averaged over one oscillation period of the slowest phase
    starting at r; d/dr is a fourth-order central difference with the given step.
    """
    _require_r(r)
    period = 2.0 * math.pi / abs(phase_rate(0, fam, r, params))
    residuals = []
    for rr in r + period * np.arange(samples) / samples:
        states = [init_large_r(rr + k * step, fam, params) for k in (-2, -1, 1, 2)]
        centre = init_large_r(rr, fam, params)
        d = ode_rhs(centre, fam)
        dp = (states[0].p - 8.0 * states[1].p + 8.0 * states[2].p - states[3].p) / (12.0 * step)
        dq = (states[0].q - 8.0 * states[1].q + 8.0 * states[2].q - states[3].q) / (12.0 * step)
        worst = 0.0
        for j in range(fam.m):
            if np.any(dp[j]):
                worst = max(worst, np.linalg.norm(d.p[j] - dp[j]) / np.linalg.norm(dp[j]))
            worst = max(worst, np.linalg.norm(d.q[j] - dq[j]) / np.linalg.norm(dq[j]))
        residuals.append(worst)
    return float(np.mean(residuals))


def dlogF_cross_check(params: PearceyParams, fam: IntervalFamily, r: float, n: int, h: float = 0.05,
                      settings: LabSettings = DEFAULT_SETTINGS) -> CrossCheckReport:
    """
    Central-difference d/dr log F from the determinant against 2 H from the large-r expansion.

    Args:
        params: Cusp parameter
        fam: Endpoints and weights
        r: Scale, r > h
        n: Nodes per panel
        h: Step in r

    Returns:
        CrossCheckReport with both values and their difference
    """
    if not r > h:
        raise InvalidArgumentError(f"Need r > h for a central difference, got r={r}, h={h}")
    upper = log_gen_fun(params, fam, r + h, n, settings)
    lower = log_gen_fun(params, fam, r - h, n, settings)
    derivative = (upper.log_F - lower.log_F) / (2.0 * h)
    two_h = 2.0 * hamiltonian_asympt(fam, r, params)
    report = CrossCheckReport(r=float(r), dlogF_num=derivative, two_H_asympt=two_h,
                              difference=abs(derivative - two_h),
                              est_error=(upper.est_error + lower.est_error) / (2.0 * h))
    logger.info(f"d/dr log F at r={r:g}: {derivative:.8g} vs 2H {two_h:.8g} (diff {report.difference:.3e})")
    return report
