"""
Experiment services: soliton formation and its threshold, velocity-vs-lambda
sweeps and height-vs-time traces.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from django.utils import timezone

from .field_core import (
    SimulationConfig, Uniform, UniformWithEdgeRamp, config_digest,
)
from .lambda_scheme import Trajectory, simulate
from .soliton_metrics import (
    RELATIVE_PROMINENCE, VELOCITY_WINDOW, PacketTracker, PeakTrack, TooFewSamples,
    TrackingParams, detect_collisions, detect_reflections, estimate_velocity,
    height_series, track_packets,
)

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 20))
DEFAULT_SWEEP_C_LIST = (0.5j, 1.0j, 1.5j)
DEFAULT_HEIGHT_C_LIST = (2.8j, 1.5j, 0.5j)
DEFAULT_BRACKET = (1e-5, 1e-1)
DEFAULT_TOLERANCE = 1e-4
DEFAULT_RAMP_WIDTH = 0.1
REFERENCE_LAMBDA = 1.0
SPIKE_FACTOR = 1.5

RAMP_MODE = 'ramp'
JUMP_MODE = 'jump'


class ExperimentError(Exception):
    pass


class BracketInvalid(ExperimentError):
    pass


class TooFewRows(ExperimentError):
    pass


@dataclass(frozen=True)
class FormationCriteria:
    """Operational definition of a formed soliton"""
    min_lifetime: int = 20
    relative_prominence: float = RELATIVE_PROMINENCE
    absolute_prominence: float = 1e-7
    velocity_window: Tuple[float, float] = VELOCITY_WINDOW

    def as_dict(self) -> dict:
        return {
            'min_lifetime': self.min_lifetime,
            'relative_prominence': self.relative_prominence,
            'absolute_prominence': self.absolute_prominence,
            'velocity_window': list(self.velocity_window),
        }


@dataclass(frozen=True)
class FormationReport:
    formed: bool
    tracks: tuple
    dominant: Optional[PeakTrack]
    params: TrackingParams
    stride: int = 1

    @property
    def formation_step(self) -> Optional[int]:
        return self.dominant.first_time_index if self.dominant is not None else None


def dominant_track(tracks: Sequence[PeakTrack]) -> Optional[PeakTrack]:
    """Longest-lived track; ties go to greater mean height, then smaller id"""
    if not tracks:
        return None
    return min(tracks, key=lambda t: (-len(t), -t.mean_height, t.track_id))


def track_run(cfg: SimulationConfig, criteria: FormationCriteria) -> Tuple[List[PeakTrack], TrackingParams]:
    """Packet tracks of a fresh run, sampled at every step"""
    params = TrackingParams.for_config(cfg)
    tracker = PacketTracker(cfg.grid, params, criteria.absolute_prominence, criteria.relative_prominence)
    simulate(cfg, observer=tracker.observe)
    logger.debug(f"tracked {len(tracker.tracks)} packet tracks over {tracker.observed} steps")
    return tracker.tracks, params


def formation_report(cfg: SimulationConfig, criteria: Optional[FormationCriteria] = None,
                     trajectory: Optional[Trajectory] = None) -> FormationReport:
    """Track a run (or its stored snapshots) and apply the lifetime criterion to the dominant track"""
    criteria = criteria or FormationCriteria()
    if trajectory is None:
        stride = 1
        tracks, params = track_run(cfg, criteria)
    else:
        stride = trajectory.config.snapshot_stride
        params = TrackingParams.for_config(trajectory.config, stride)
        tracks = track_packets(trajectory, params, criteria.absolute_prominence, criteria.relative_prominence)
    dominant = dominant_track(tracks)
    formed_ = dominant is not None and len(dominant) >= criteria.min_lifetime
    return FormationReport(formed_, tuple(tracks), dominant, params, stride)


def formed(cfg: SimulationConfig, criteria: Optional[FormationCriteria] = None) -> bool:
    return formation_report(cfg, criteria).formed


def threshold_initial_condition(eps: float, mode: str = RAMP_MODE, ramp_width: float = DEFAULT_RAMP_WIDTH):
    """Initial field whose formation depends on a single gradient knob"""
    if mode == RAMP_MODE:
        # climbs from the zero boundary with slope eps up to the plateau
        return UniformWithEdgeRamp(level=eps * ramp_width, gradient=eps, ramp_width=ramp_width)
    if mode == JUMP_MODE:
        return Uniform(level=eps)
    raise ExperimentError(f"unknown threshold mode {mode!r}")


@dataclass(frozen=True)
class ThresholdResult:
    lam: float
    c_coef: complex
    epsilon_lo: float
    epsilon_hi: float
    epsilon_star: float
    n_bisections: int


def threshold_gradient(lam: float, c: complex, bracket: Tuple[float, float] = DEFAULT_BRACKET,
                       tol: float = DEFAULT_TOLERANCE, *, cfg_base: Optional[SimulationConfig] = None,
                       criteria: Optional[FormationCriteria] = None, mode: str = RAMP_MODE,
                       ramp_width: float = DEFAULT_RAMP_WIDTH,
                       predicate: Optional[Callable[[float], bool]] = None) -> ThresholdResult:
    """Bisection on the initial gradient between a non-forming and a forming value"""
    if not tol > 0:
        raise ExperimentError(f"tol must be positive, got {tol}")
    lo, hi = bracket
    if not lo < hi:
        raise BracketInvalid(f"degenerate bracket ({lo}, {hi})")

    if predicate is None:
        base = (cfg_base or SimulationConfig()).replace(lam=lam, c_coef=c)

        def predicate(eps):
            cfg = base.replace(ic=threshold_initial_condition(eps, mode, ramp_width))
            return formed(cfg, criteria)

    formed_lo, formed_hi = predicate(lo), predicate(hi)
    if formed_lo or not formed_hi:
        raise BracketInvalid(
            f"formation must be false at {lo:g} and true at {hi:g} "
            f"(got {formed_lo} and {formed_hi})"
        )

    n = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
        n += 1
        logger.debug(f"bisection {n}: bracket ({lo:.6g}, {hi:.6g})")

    result = ThresholdResult(lam, complex(c), lo, hi, 0.5 * (lo + hi), n)
    logger.info(f"Formation threshold lambda={lam:g}, C={c}: eps* = {result.epsilon_star:.4g}")
    return result


@dataclass(frozen=True)
class SweepRow:
    lam: float
    c_coef: complex
    velocity_abs: Optional[float]
    velocity_relative: Optional[float]
    n_tracks: int
    formation_step: Optional[int]

    def sort_key(self):
        return abs(self.c_coef), self.c_coef.real, self.c_coef.imag, self.lam


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    metadata: dict

    def rows_for(self, c: complex) -> List[SweepRow]:
        return [r for r in self.rows if r.c_coef == complex(c)]

    @property
    def c_values(self) -> List[complex]:
        seen = []
        for row in self.rows:
            if row.c_coef not in seen:
                seen.append(row.c_coef)
        return seen


def measure_point(cfg: SimulationConfig, criteria: FormationCriteria) -> SweepRow:
    """Velocity of the dominant track of one (lambda, C) run; absent when nothing usable forms"""
    report = formation_report(cfg, criteria)
    velocity = None
    if report.dominant is not None:
        try:
            velocity = estimate_velocity(report.dominant, cfg.dt, criteria.velocity_window)
        except TooFewSamples as e:
            logger.warning(f"No velocity for lambda={cfg.lam:g}, C={cfg.c_coef}: {e}")
    return SweepRow(cfg.lam, cfg.c_coef, velocity, None, len(report.tracks), report.formation_step)


def run_jobs(function, jobs: Sequence, max_workers: Optional[int] = None) -> list:
    """Map over independent jobs, returning results in job order"""
    workers = max(1, max_workers or 1)
    if workers == 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, jobs))


def _normalise(rows: List[SweepRow]) -> List[SweepRow]:
    out = []
    for c in dict.fromkeys(r.c_coef for r in rows):
        series = [r for r in rows if r.c_coef == c]
        reference = next((r.velocity_abs for r in series if r.lam == REFERENCE_LAMBDA), None)
        for r in series:
            relative = None
            if r.velocity_abs is not None and reference not in (None, 0.0):
                relative = r.velocity_abs / reference
            out.append(SweepRow(r.lam, r.c_coef, r.velocity_abs, relative, r.n_tracks, r.formation_step))
    return out


def velocity_vs_lambda(c_list: Sequence[complex] = DEFAULT_SWEEP_C_LIST,
                       lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                       cfg_base: Optional[SimulationConfig] = None, *,
                       criteria: Optional[FormationCriteria] = None,
                       max_workers: Optional[int] = None,
                       measure: Callable[[SimulationConfig, FormationCriteria], SweepRow] = measure_point,
                       ) -> SweepResult:
    lambda_grid = [float(v) for v in lambda_grid]
    if any(not 0 < v < 2 for v in lambda_grid):
        raise ExperimentError(f"lambda grid must lie inside (0, 2): {lambda_grid}")
    if lambda_grid != sorted(lambda_grid):
        raise ExperimentError("lambda grid must be sorted ascending")
    cfg_base = cfg_base or SimulationConfig()
    criteria = criteria or FormationCriteria()

    jobs = [cfg_base.replace(lam=lam, c_coef=c) for c in c_list for lam in lambda_grid]
    logger.info(f"Velocity sweep: {len(jobs)} runs on {max_workers or 1} worker(s)")
    rows = run_jobs(lambda cfg: measure(cfg, criteria), jobs, max_workers)
    rows = sorted(_normalise(rows), key=SweepRow.sort_key)

    metadata = {
        'config_digest': config_digest({
            'base': cfg_base.as_dict(),
            'c_list': [[complex(c).real, complex(c).imag] for c in c_list],
            'lambda_grid': lambda_grid,
            'criteria': criteria.as_dict(),
        }),
        'timestamp': timezone.now().isoformat(),
        'criteria': criteria.as_dict(),
    }
    return SweepResult(tuple(rows), metadata)


@dataclass(frozen=True)
class MonotonicityResult:
    is_monotone: bool
    first_violation: Optional[int]

    def __bool__(self):
        return self.is_monotone


def is_weakly_monotone(values: Sequence[float]) -> MonotonicityResult:
    direction = 0
    for i in range(1, len(values)):
        delta = values[i] - values[i - 1]
        if delta == 0:
            continue
        sign = 1 if delta > 0 else -1
        if direction == 0:
            direction = sign
        elif sign != direction:
            return MonotonicityResult(False, i)
    return MonotonicityResult(True, None)


def monotonicity_check(sweep: SweepResult, per_c: complex) -> MonotonicityResult:
    """Weak monotonicity (either direction) of present velocities over ascending lambda"""
    rows = sorted(
        (r for r in sweep.rows_for(per_c) if r.velocity_abs is not None),
        key=lambda r: r.lam,
    )
    if len(rows) < 3:
        raise TooFewRows(f"need at least 3 present velocity rows for C={per_c}, got {len(rows)}")
    return is_weakly_monotone([r.velocity_abs for r in rows])


@dataclass(frozen=True)
class HeightTrace:
    c_coef: complex
    lam: float
    track_id: Optional[int]
    series: tuple  # (time_index, height)
    events: tuple  # EventRecord from soliton_metrics
    stride: int = 1

    @property
    def plateau_height(self) -> Optional[float]:
        if not self.series:
            return None
        return float(np.median([h for _, h in self.series]))

    def spikes(self, factor: float = SPIKE_FACTOR) -> List[Tuple[int, float]]:
        """Local maxima of the series exceeding factor * plateau"""
        plateau = self.plateau_height
        if plateau is None:
            return []
        out = []
        for i in range(1, len(self.series) - 1):
            t, h = self.series[i]
            if h > self.series[i - 1][1] and h >= self.series[i + 1][1] and h > factor * plateau:
                out.append((t, h))
        return out

    def event_kinds_at(self, time_index: int) -> List[str]:
        return sorted({e.kind for e in self.events if e.time_index == time_index})


def trace_heights(cfg: SimulationConfig, criteria: Optional[FormationCriteria] = None,
                  trajectory: Optional[Trajectory] = None) -> HeightTrace:
    """Dominant-track height series of one run with its collision/reflection markers"""
    report = formation_report(cfg, criteria, trajectory)
    tracks, params = report.tracks, report.params
    events = detect_collisions(tracks, params.collision_proximity) + \
        detect_reflections(tracks, params.boundary_band, params.domain_length)
    events = sorted(events, key=lambda e: (e.time_index, e.kind, e.track_ids))
    dominant = report.dominant
    series = tuple(height_series(dominant)) if dominant is not None else ()
    return HeightTrace(
        c_coef=cfg.c_coef,
        lam=cfg.lam,
        track_id=dominant.track_id if dominant is not None else None,
        series=series,
        events=tuple(events),
        stride=report.stride,
    )


def height_vs_time(c_list: Sequence[complex] = DEFAULT_HEIGHT_C_LIST, lam: float = 1.0,
                   cfg_base: Optional[SimulationConfig] = None, *,
                   criteria: Optional[FormationCriteria] = None,
                   max_workers: Optional[int] = None) -> List[HeightTrace]:
    if not c_list:
        raise ExperimentError("height trace needs at least one C value")
    cfg_base = cfg_base or SimulationConfig()
    jobs = [cfg_base.replace(lam=lam, c_coef=c) for c in c_list]
    traces = run_jobs(lambda cfg: trace_heights(cfg, criteria), jobs, max_workers)
    for trace in traces:
        logger.info(
            f"Height trace C={trace.c_coef}: {len(trace.series)} samples, "
            f"{len(trace.events)} events, plateau {trace.plateau_height}"
        )
    return traces
