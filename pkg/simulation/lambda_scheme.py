"""
Implicit lambda-scheme: per-step tridiagonal system assembly, Thomas solve
with pivot and residual guards, and full simulation runs.

For interior nodes the step solves

    u[j, m+1] - rho * (u[j+1, m+1] - lam * u[j, m+1] + u[j-1, m+1]) = u[j, m]

with rho = C * dt / h**2. Boundary rows are identity rows with zero rhs.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from numba import njit

from .field_core import (
    GridSpec, SimulationConfig, StateVector, apply_boundary, build_initial_field,
)

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-14
RESIDUAL_TOLERANCE = 1e-10
DENOMINATOR_TOLERANCE = 1e-14


class SchemeError(Exception):
    """Base error for the implicit scheme"""
    pass


class SingularOrIllConditioned(SchemeError):
    """Pivot below tolerance or residual check failed"""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index

    def at_step(self, step_index):
        return SingularOrIllConditioned(f"step {step_index}: {self}", step_index=step_index)


class DivisionNearZero(SchemeError):
    """Amplification factor denominator vanishes"""
    pass


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        for name in ('sub', 'diag', 'sup', 'rhs'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.complex128))
        n = len(self.diag)
        if n < 1:
            raise ValueError("tridiagonal system needs at least one row")
        if len(self.rhs) != n or len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ValueError(
                f"inconsistent lengths: sub={len(self.sub)} diag={n} "
                f"sup={len(self.sup)} rhs={len(self.rhs)}"
            )

    def __len__(self):
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        out[1:] += self.sub * x[:-1]
        out[:-1] += self.sup * x[1:]
        return out


@njit(cache=True, nogil=True)
def _thomas_factor(sub, diag, sup, pivot_tol):
    """Forward elimination coefficients; returns (c', pivots, failing row or -1)"""
    n = diag.shape[0]
    cprime = np.zeros(max(n - 1, 0), dtype=np.complex128)
    pivots = np.zeros(n, dtype=np.complex128)
    pivot = diag[0]
    if abs(pivot) < pivot_tol:
        return cprime, pivots, 0
    pivots[0] = pivot
    for i in range(1, n):
        cprime[i - 1] = sup[i - 1] / pivots[i - 1]
        pivot = diag[i] - sub[i - 1] * cprime[i - 1]
        if abs(pivot) < pivot_tol:
            return cprime, pivots, i
        pivots[i] = pivot
    return cprime, pivots, -1


@njit(cache=True, nogil=True)
def _thomas_substitute(sub, cprime, pivots, rhs):
    n = rhs.shape[0]
    d = np.empty(n, dtype=np.complex128)
    d[0] = rhs[0] / pivots[0]
    for i in range(1, n):
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivots[i]
    x = d
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - cprime[i] * x[i + 1]
    return x


class ThomasFactorization:
    """Thomas elimination of a fixed tridiagonal matrix, reusable across right-hand sides"""

    def __init__(self, system: TridiagonalSystem):
        self.system = system
        self.cprime, self.pivots, failed = _thomas_factor(
            system.sub, system.diag, system.sup, PIVOT_TOLERANCE
        )
        if failed >= 0:
            raise SingularOrIllConditioned(
                f"pivot magnitude below {PIVOT_TOLERANCE:g} at row {failed}"
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.complex128)
        x = _thomas_substitute(self.system.sub, self.cprime, self.pivots, rhs)
        check_residual(self.system, x, rhs)
        return x


def check_residual(system: TridiagonalSystem, x: np.ndarray, rhs: np.ndarray):
    residual = np.linalg.norm(system.matvec(x) - rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if not residual / scale <= RESIDUAL_TOLERANCE:
        raise SingularOrIllConditioned(
            f"relative residual {residual / scale:.3e} exceeds {RESIDUAL_TOLERANCE:g}"
        )


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    return ThomasFactorization(system).solve(system.rhs)


def dirichlet_system(n_points: int, diag_value: complex, off_value: complex, rhs) -> TridiagonalSystem:
    """Constant-coefficient interior rows, identity boundary rows with zero rhs"""
    diag = np.full(n_points, diag_value, dtype=np.complex128)
    diag[0] = diag[-1] = 1.0
    sub = np.full(n_points - 1, off_value, dtype=np.complex128)
    sup = np.full(n_points - 1, off_value, dtype=np.complex128)
    sub[-1] = 0.0
    sup[0] = 0.0
    rhs = np.array(rhs, dtype=np.complex128)
    rhs[0] = rhs[-1] = 0.0
    return TridiagonalSystem(sub, diag, sup, rhs)


def assemble_step_system(prev: StateVector, cfg: SimulationConfig) -> TridiagonalSystem:
    rho = cfg.rho
    return dirichlet_system(cfg.grid.n_points, 1 + cfg.lam * rho, -rho, prev.values)


def step(prev: StateVector, cfg: SimulationConfig) -> StateVector:
    """One implicit step, assembling and factorizing from scratch"""
    x = solve_tridiagonal(assemble_step_system(prev, cfg))
    return apply_boundary(StateVector(x, prev.time_index + 1))


class StepOperator:
    """The constant step matrix of a config with its cached factorization"""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        n = cfg.grid.n_points
        self.factorization = ThomasFactorization(
            assemble_step_system(StateVector(np.zeros(n), 0), cfg)
        )

    def __call__(self, prev: StateVector) -> StateVector:
        rhs = np.array(prev.values)
        rhs[0] = rhs[-1] = 0.0
        x = self.factorization.solve(rhs)
        return apply_boundary(StateVector(x, prev.time_index + 1))


def amplification_factor(k: int, cfg: SimulationConfig) -> complex:
    """Per-step multiplier of the k-th discrete sine mode"""
    n = cfg.grid.n_points
    if not 1 <= k <= n - 2:
        raise ValueError(f"mode index must lie in [1, {n - 2}], got {k}")
    # cos(k*pi*h) for the unit domain; the eigenvector is sin(k*pi*j/(n-1)) for any length
    theta = k * np.pi / (n - 1)
    denominator = 1 - cfg.rho * (2 * np.cos(theta) - cfg.lam)
    if abs(denominator) < DENOMINATOR_TOLERANCE:
        raise DivisionNearZero(f"|1 - rho*(2cos - lambda)| < {DENOMINATOR_TOLERANCE:g} for k={k}")
    return 1 / denominator


def packet_speed(cfg: SimulationConfig) -> float:
    """Group speed of the undamped mode cos(theta) = lam/2, in domain units per unit time

    Zero when the mode does not exist (|lam| >= 2) or rho has no imaginary part.
    """
    if not abs(cfg.lam) < 2:
        return 0.0
    sin_theta = np.sqrt(1 - cfg.lam ** 2 / 4)
    return float(2 * abs(cfg.rho.imag) * sin_theta * cfg.grid.h / cfg.dt)


def discrete_l2_norm(state: StateVector, grid: GridSpec) -> float:
    return float(np.sqrt(grid.h * np.sum(np.abs(state.values) ** 2)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: SimulationConfig
    snapshots: tuple

    def __len__(self):
        return len(self.snapshots)

    @property
    def time_indices(self) -> List[int]:
        return [s.time_index for s in self.snapshots]

    @property
    def times(self) -> np.ndarray:
        return np.array(self.time_indices, dtype=float) * self.config.dt

    @property
    def values(self) -> np.ndarray:
        return np.vstack([s.values for s in self.snapshots])

    def norms(self) -> np.ndarray:
        return np.array([discrete_l2_norm(s, self.config.grid) for s in self.snapshots])


def run_stepper(cfg: SimulationConfig, advance, initial: Optional[StateVector] = None,
                observer: Optional[Callable[[StateVector], None]] = None) -> Trajectory:
    """Drive `advance` from the initial field, keeping the configured snapshots

    `observer` sees every state, the initial one included, whatever the snapshot stride.
    """
    state = initial if initial is not None else build_initial_field(cfg.ic, cfg.grid)
    if observer is not None:
        observer(state)
    wanted = set(cfg.snapshot_indices())
    snapshots = [state]
    for m in range(1, cfg.n_steps + 1):
        try:
            state = advance(state)
        except SingularOrIllConditioned as e:
            logger.error(f"Solver failure at step {m} (config {cfg.digest()[:12]}): {e}")
            raise e.at_step(m) from e
        if observer is not None:
            observer(state)
        if m in wanted:
            snapshots.append(state)
        if m % 5000 == 0:
            logger.debug(f"step {m}/{cfg.n_steps}")
    return Trajectory(cfg, tuple(snapshots))


def simulate(cfg: SimulationConfig, cache_factorization: bool = True,
             observer: Optional[Callable[[StateVector], None]] = None) -> Trajectory:
    if cache_factorization:
        try:
            advance = StepOperator(cfg)
        except SingularOrIllConditioned as e:
            logger.error(f"Step matrix rejected for lambda={cfg.lam}, C={cfg.c_coef}: {e}")
            raise e.at_step(1) from e
    else:
        def advance(state):
            return step(state, cfg)

    trajectory = run_stepper(cfg, advance, observer=observer)
    logger.info(
        f"Simulated lambda={cfg.lam:g}, C={cfg.c_coef}, {cfg.n_steps} steps, "
        f"{len(trajectory)} snapshots"
    )
    return trajectory
