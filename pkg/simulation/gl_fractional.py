"""
Grunwald-Letnikov fractional-time stepper and comparison against the lambda-scheme.

Each step solves

    u^{m+1} - K dt^gamma [w_0 L u^{m+1} + sum_{k=1}^{min(m+1, M)} w_k L u^{m+1-k}] = u^m

with L the standard 3-point Laplacian over h^2, alpha = 1 - gamma and
w_k the GL weights of order alpha.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .field_core import SimulationConfig, StateVector, apply_boundary, build_initial_field
from .lambda_scheme import Trajectory, dirichlet_system, run_stepper, simulate, solve_tridiagonal

logger = logging.getLogger(__name__)

UNBOUNDED = None


class FractionalError(Exception):
    pass


class GLConfigError(FractionalError):
    pass


class GridMismatch(FractionalError):
    """Trajectories to compare do not share grid or sampling"""
    pass


@dataclass(frozen=True)
class GLConfig:
    gamma: float
    k_gamma: complex
    memory_length: Optional[int] = UNBOUNDED

    def __post_init__(self):
        object.__setattr__(self, 'k_gamma', complex(self.k_gamma))
        if not 0 < self.gamma <= 1:
            raise GLConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.memory_length is not UNBOUNDED and self.memory_length < 1:
            raise GLConfigError(f"memory_length must be >= 1, got {self.memory_length}")

    @property
    def alpha(self) -> float:
        return 1.0 - self.gamma

    def as_dict(self) -> dict:
        return {
            'gamma': self.gamma,
            'k_re': self.k_gamma.real,
            'k_im': self.k_gamma.imag,
            'memory_length': self.memory_length,
        }


def gl_weights(alpha: float, count: int) -> np.ndarray:
    """w_0 = 1, w_k = w_{k-1} * (1 - (alpha + 1) / k)"""
    if not 0 <= alpha < 1:
        raise GLConfigError(f"alpha must lie in [0, 1), got {alpha}")
    if count < 1:
        raise GLConfigError(f"count must be >= 1, got {count}")
    k = np.arange(1, count, dtype=float)
    return np.concatenate(([1.0], np.cumprod(1 - (alpha + 1) / k)))


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Standard 3-point Laplacian, zero on the boundary nodes"""
    out = np.zeros_like(values, dtype=np.complex128)
    out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / h ** 2
    return out


class GLHistory:
    """Past L u^m fields; iteration is newest first and keeps at most `capacity` entries"""

    def __init__(self, capacity: Optional[int] = UNBOUNDED):
        self.capacity = capacity
        self._buffer = None  # chronological rows
        self._count = 0
        self._time_indices = deque(maxlen=capacity)

    @classmethod
    def seeded(cls, initial: StateVector, h: float, capacity: Optional[int] = UNBOUNDED) -> 'GLHistory':
        history = cls(capacity)
        history.push(laplacian(initial.values, h), initial.time_index)
        return history

    def __len__(self):
        return len(self._time_indices)

    def __iter__(self):
        return iter(self.entries())

    def window(self) -> np.ndarray:
        """Stored fields as rows, oldest first; a contiguous view of the buffer"""
        if self._buffer is None:
            return np.zeros((0, 0), dtype=np.complex128)
        return self._buffer[self._count - len(self):self._count]

    def entries(self) -> np.ndarray:
        """Stored fields as rows, newest first"""
        return self.window()[::-1]

    def push(self, applied: np.ndarray, time_index: int):
        if self._time_indices and time_index <= self._time_indices[0]:
            raise FractionalError(
                f"history entries must be pushed in time order ({time_index} after {self._time_indices[0]})"
            )
        applied = np.asarray(applied, dtype=np.complex128)
        if self._buffer is None:
            self._buffer = np.empty((64, applied.shape[0]), dtype=np.complex128)
        elif self._count == self._buffer.shape[0]:
            keep = len(self) if self.capacity is not UNBOUNDED else self._count
            rows = self._buffer[self._count - keep:self._count]
            grown = np.empty((max(2 * keep, 64), applied.shape[0]), dtype=np.complex128)
            grown[:keep] = rows
            self._buffer = grown
            self._count = keep
        self._buffer[self._count] = applied
        self._count += 1
        self._time_indices.appendleft(time_index)

    @property
    def newest_time_index(self) -> Optional[int]:
        return self._time_indices[0] if self._time_indices else None

    def convolve(self, weights: np.ndarray) -> Optional[np.ndarray]:
        """sum_{k>=1} weights[k] * (k-th newest entry); None when empty"""
        if not len(self):
            return None
        k = len(self)
        return np.ascontiguousarray(weights[k:0:-1]) @ self.window()


def gl_step(history: GLHistory, prev: StateVector, cfg: SimulationConfig, gl: GLConfig,
            weights: Optional[np.ndarray] = None) -> StateVector:
    """Advance one level and record L u^{m+1} in the history"""
    newest = history.newest_time_index
    if newest is not None and newest != prev.time_index:
        raise FractionalError(
            f"history ends at level {newest} but the field is at level {prev.time_index}"
        )
    if weights is None or len(weights) < len(history) + 1:
        weights = gl_weights(gl.alpha, len(history) + 1)

    h = cfg.grid.h
    coefficient = gl.k_gamma * cfg.dt ** gl.gamma
    kappa = coefficient / h ** 2
    rhs = np.array(prev.values)
    memory = history.convolve(weights)
    if memory is not None:
        rhs = rhs + coefficient * memory

    # w_0 = 1 couples the implicit level exactly like the lambda = 2 operator
    system = dirichlet_system(cfg.grid.n_points, 1 + 2.0 * kappa, -kappa, rhs)
    nxt = apply_boundary(StateVector(solve_tridiagonal(system), prev.time_index + 1))
    history.push(laplacian(nxt.values, h), nxt.time_index)
    return nxt


def gl_simulate(cfg: SimulationConfig, gl: GLConfig) -> Trajectory:
    initial = build_initial_field(cfg.ic, cfg.grid)
    history = GLHistory.seeded(initial, cfg.grid.h, gl.memory_length)
    count = cfg.n_steps + 1 if gl.memory_length is UNBOUNDED else min(cfg.n_steps, gl.memory_length) + 1
    weights = gl_weights(gl.alpha, count)

    def advance(state):
        return gl_step(history, state, cfg, gl, weights)

    trajectory = run_stepper(cfg, advance, initial)
    logger.info(
        f"GL run gamma={gl.gamma:g}, K={gl.k_gamma}, memory={gl.memory_length or 'unbounded'}, "
        f"{cfg.n_steps} steps"
    )
    return trajectory


@dataclass(frozen=True)
class DivergenceRow:
    time_index: int
    l2: float
    max_abs: float


@dataclass(frozen=True)
class DivergenceTable:
    rows: tuple

    @property
    def max_l2(self) -> float:
        return max(r.l2 for r in self.rows)

    @property
    def mean_l2(self) -> float:
        return float(np.mean([r.l2 for r in self.rows]))

    @property
    def max_abs(self) -> float:
        return max(r.max_abs for r in self.rows)

    @property
    def mean_abs(self) -> float:
        return float(np.mean([r.max_abs for r in self.rows]))

    def summary(self) -> dict:
        return {
            'max_l2': self.max_l2,
            'mean_l2': self.mean_l2,
            'max_abs': self.max_abs,
            'mean_abs': self.mean_abs,
        }


def compare_trajectories(a: Trajectory, b: Trajectory) -> DivergenceTable:
    """Per-snapshot discrete L2 and max-norm distances"""
    if a.config.grid != b.config.grid:
        raise GridMismatch(f"grids differ: {a.config.grid} vs {b.config.grid}")
    if a.time_indices != b.time_indices:
        raise GridMismatch("trajectories are sampled at different steps")
    h = a.config.grid.h
    rows = []
    for sa, sb in zip(a.snapshots, b.snapshots):
        diff = sa.values - sb.values
        rows.append(DivergenceRow(
            time_index=sa.time_index,
            l2=float(np.sqrt(h * np.sum(np.abs(diff) ** 2))),
            max_abs=float(np.max(np.abs(diff))),
        ))
    return DivergenceTable(tuple(rows))


def compare_lambda_gl(cfg: SimulationConfig, gl: GLConfig,
                      gl_cfg: Optional[SimulationConfig] = None) -> DivergenceTable:
    """Distances between the lambda-scheme run of `cfg` and the GL run sharing its grid, dt and IC"""
    gl_cfg = cfg if gl_cfg is None else gl_cfg
    if gl_cfg.grid != cfg.grid or gl_cfg.dt != cfg.dt or gl_cfg.n_steps != cfg.n_steps \
            or gl_cfg.snapshot_stride != cfg.snapshot_stride:
        raise GridMismatch("lambda and GL runs must share grid, dt, steps and snapshot stride")
    return compare_trajectories(simulate(cfg), gl_simulate(gl_cfg, gl))


@dataclass(frozen=True)
class GammaSweep:
    tables: tuple  # (gamma, DivergenceTable) pairs in input order

    @property
    def best_gamma(self) -> Optional[float]:
        if not self.tables:
            return None
        return min(self.tables, key=lambda item: (item[1].mean_l2, item[0]))[0]


def sweep_gamma(cfg: SimulationConfig, gammas: Iterable[float], k_gamma: complex,
                memory_length: Optional[int] = UNBOUNDED) -> GammaSweep:
    """Exploratory comparison of one lambda-scheme run against several fractional orders"""
    reference = simulate(cfg)
    tables: List = []
    for gamma in gammas:
        gl = GLConfig(gamma=gamma, k_gamma=k_gamma, memory_length=memory_length)
        table = compare_trajectories(reference, gl_simulate(cfg, gl))
        logger.info(f"gamma={gamma:g}: mean L2 distance {table.mean_l2:.4e}")
        tables.append((gamma, table))
    return GammaSweep(tuple(tables))
