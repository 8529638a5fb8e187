"""
Grid geometry, complex field state and initial/boundary conditions
shared by the lambda-scheme and the fractional stepper.
"""

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DOMAIN_LENGTH = 1.0
DEFAULT_N_POINTS = 201
DEFAULT_DT = 1e-4
DEFAULT_N_STEPS = 20000
DEFAULT_SNAPSHOT_STRIDE = 50
DEFAULT_LAMBDA = 1.0
DEFAULT_C_COEF = 1.0j


class FieldError(Exception):
    """Base error for grid, field and configuration problems"""
    pass


class ConfigurationError(FieldError):
    """A GridSpec or SimulationConfig violates its invariants"""
    pass


class SamplesLengthMismatch(FieldError):
    """Explicit samples do not match the number of grid nodes"""
    pass


class InvalidRamp(FieldError):
    """Edge ramp width outside (0, 0.5]"""
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform 1-D grid including both boundary nodes"""
    domain_length: float = DEFAULT_DOMAIN_LENGTH
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 5:
            raise ConfigurationError(f"n_points must be an integer >= 5, got {self.n_points}")
        if not self.domain_length > 0:
            raise ConfigurationError(f"domain_length must be positive, got {self.domain_length}")

    @property
    def h(self) -> float:
        return self.domain_length / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        """Node coordinates x_j = j*h"""
        return np.arange(self.n_points) * self.h


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex field u_j at one time level; boundary nodes are zero"""
    values: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 1:
            raise ConfigurationError("StateVector values must be one-dimensional")
        if self.time_index < 0:
            raise ConfigurationError(f"time_index must be >= 0, got {self.time_index}")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.time_index == other.time_index and np.array_equal(self.values, other.values)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def with_values(self, values, time_index=None) -> 'StateVector':
        return StateVector(values, self.time_index if time_index is None else time_index)


@dataclass(frozen=True)
class Uniform:
    level: float = 1.0


@dataclass(frozen=True)
class UniformWithEdgeRamp:
    """Plateau at `level`, descending with slope `gradient` over `ramp_width` toward each boundary"""
    level: float = 1.0
    gradient: float = 0.001
    ramp_width: float = 0.1


@dataclass(frozen=True)
class Samples:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(complex(v) for v in self.values))


InitialCondition = Union[Uniform, UniformWithEdgeRamp, Samples]


@dataclass(frozen=True)
class SimulationConfig:
    """Full specification of one run"""
    grid: GridSpec = dataclasses.field(default_factory=GridSpec)
    lam: float = DEFAULT_LAMBDA
    c_coef: complex = DEFAULT_C_COEF
    dt: float = DEFAULT_DT
    n_steps: int = DEFAULT_N_STEPS
    snapshot_stride: int = DEFAULT_SNAPSHOT_STRIDE
    ic: InitialCondition = dataclasses.field(default_factory=Uniform)

    def __post_init__(self):
        object.__setattr__(self, 'c_coef', complex(self.c_coef))
        object.__setattr__(self, 'lam', float(self.lam))
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError(f"snapshot_stride must be an integer >= 1, got {self.snapshot_stride}")

    @property
    def rho(self) -> complex:
        """C*dt/h^2, constant for the whole run"""
        return self.c_coef * self.dt / self.grid.h ** 2

    def replace(self, **changes) -> 'SimulationConfig':
        return dataclasses.replace(self, **changes)

    def snapshot_indices(self) -> list:
        """0, s, 2s, ... plus the final step"""
        indices = list(range(0, self.n_steps + 1, self.snapshot_stride))
        if indices[-1] != self.n_steps:
            indices.append(self.n_steps)
        return indices

    def as_dict(self) -> dict:
        ic = self.ic
        ic_payload = {'kind': type(ic).__name__}
        if isinstance(ic, Samples):
            ic_payload['values'] = [[v.real, v.imag] for v in ic.values]
        else:
            ic_payload.update(dataclasses.asdict(ic))
        return {
            'domain_length': self.grid.domain_length,
            'n_points': self.grid.n_points,
            'lambda': self.lam,
            'c_re': self.c_coef.real,
            'c_im': self.c_coef.imag,
            'dt': self.dt,
            'n_steps': self.n_steps,
            'snapshot_stride': self.snapshot_stride,
            'ic': ic_payload,
        }

    def digest(self) -> str:
        return config_digest(self.as_dict())


def config_digest(payload) -> str:
    """SHA-256 of a canonical JSON rendering"""
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=repr)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def apply_boundary(state: StateVector) -> StateVector:
    """Zero Dirichlet: force both boundary nodes to 0, interior untouched"""
    values = np.array(state.values)
    values[0] = 0
    values[-1] = 0
    return StateVector(values, state.time_index)


def _ramp_profile(ic: UniformWithEdgeRamp, grid: GridSpec) -> np.ndarray:
    if not 0 < ic.ramp_width <= 0.5:
        raise InvalidRamp(f"ramp_width must lie in (0, 0.5], got {ic.ramp_width}")
    x = grid.x
    width = ic.ramp_width * grid.domain_length
    distance = np.minimum(x, grid.domain_length - x)
    values = np.full(grid.n_points, float(ic.level))
    on_ramp = distance < width
    values[on_ramp] = ic.level - ic.gradient * (width - distance[on_ramp])
    return values


def build_initial_field(ic: InitialCondition, grid: GridSpec) -> StateVector:
    if isinstance(ic, Uniform):
        values = np.full(grid.n_points, float(ic.level), dtype=np.complex128)
    elif isinstance(ic, UniformWithEdgeRamp):
        values = _ramp_profile(ic, grid).astype(np.complex128)
    elif isinstance(ic, Samples):
        if len(ic.values) != grid.n_points:
            raise SamplesLengthMismatch(
                f"got {len(ic.values)} samples for a grid of {grid.n_points} nodes"
            )
        values = np.array(ic.values, dtype=np.complex128)
    else:
        raise ConfigurationError(f"unknown initial condition {ic!r}")
    return apply_boundary(StateVector(values, 0))


def sine_mode(k: int, grid: GridSpec) -> StateVector:
    """Discrete Dirichlet eigenvector sin(k*pi*j/(n-1))"""
    j = np.arange(grid.n_points)
    values = np.sin(k * np.pi * j / (grid.n_points - 1))
    return apply_boundary(StateVector(values, 0))


def samples_from(values: Sequence) -> Samples:
    return Samples(tuple(values))
