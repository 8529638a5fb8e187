"""
Peak detection in |u|, peak tracking through a trajectory and the
measurements built on the tracks: velocity, height series, collisions
and boundary reflections.

Two trackers share the association rule. `track_peaks` follows maxima of
|u| itself. `PacketTracker` follows maxima of the travelling envelope: the
field is extended oddly to a ring of length 2L and split into its
positive-wavenumber part, so every packet moves one way round the ring and
a wall reflection is just the crossing of x = 0 or x = L.
"""

import logging
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft, stats

from .field_core import GridSpec, SimulationConfig, StateVector
from .lambda_scheme import Trajectory, packet_speed

logger = logging.getLogger(__name__)

RELATIVE_PROMINENCE = 0.05
VELOCITY_WINDOW = (0.2, 0.8)
MIN_VELOCITY_SAMPLES = 5
BOUNDARY_BAND_LIMIT = 0.125  # fraction of the domain length

ACTIVE = 'active'
MERGED = 'merged'
EXITED = 'exited'
LOST = 'lost'

COLLISION = 'collision'
REFLECTION = 'reflection'


class MetricsError(Exception):
    pass


class TooFewSamples(MetricsError):
    pass


@dataclass(frozen=True)
class Peak:
    node_index: int
    position: float
    height: float
    prominence: float


@dataclass(frozen=True)
class TrackSample:
    time_index: int
    position: float
    height: float
    path: Optional[float] = None  # unwrapped distance along the ring, packet tracks only

    @property
    def travelled(self) -> float:
        return self.position if self.path is None else self.path


@dataclass
class PeakTrack:
    track_id: int
    samples: List[TrackSample] = dataclass_field(default_factory=list)
    status: str = ACTIVE

    def __len__(self):
        return len(self.samples)

    @property
    def first_time_index(self) -> int:
        return self.samples[0].time_index

    @property
    def last_time_index(self) -> int:
        return self.samples[-1].time_index

    @property
    def last_position(self) -> float:
        return self.samples[-1].position

    @property
    def mean_height(self) -> float:
        return float(np.mean([s.height for s in self.samples])) if self.samples else 0.0

    def append(self, time_index: int, position: float, height: float, path: Optional[float] = None):
        if self.samples and time_index <= self.samples[-1].time_index:
            raise MetricsError(
                f"track {self.track_id}: time index {time_index} not after {self.samples[-1].time_index}"
            )
        self.samples.append(TrackSample(time_index, position, height, path))

    def sample_at(self, time_index: int) -> Optional[Tuple[int, TrackSample]]:
        for i, sample in enumerate(self.samples):
            if sample.time_index == time_index:
                return i, sample
        return None

    def local_velocity(self, i: int) -> float:
        """Finite-difference position change per step around sample i"""
        if len(self.samples) < 2:
            return 0.0
        j, k = (i - 1, i) if i > 0 else (0, 1)
        a, b = self.samples[j], self.samples[k]
        return (b.position - a.position) / (b.time_index - a.time_index)


@dataclass(frozen=True)
class EventRecord:
    kind: str
    time_index: int
    position: float
    track_ids: tuple
    peak_height: float


@dataclass(frozen=True)
class TrackingParams:
    """Grid-relative association thresholds, in domain units"""
    gate: float
    merge_distance: float
    boundary_band: float
    collision_proximity: float
    domain_length: float = 1.0

    @classmethod
    def for_grid(cls, grid: GridSpec) -> 'TrackingParams':
        h = grid.h
        return cls(
            gate=10 * h,
            merge_distance=3 * h,
            boundary_band=min(5 * h, BOUNDARY_BAND_LIMIT * grid.domain_length),
            collision_proximity=10 * h,
            domain_length=grid.domain_length,
        )

    @classmethod
    def for_config(cls, cfg: SimulationConfig, stride: int = 1) -> 'TrackingParams':
        """Grid thresholds widened by the packet travel over one sampling stride"""
        base = cls.for_grid(cfg.grid)
        h, length = cfg.grid.h, cfg.grid.domain_length
        travel = packet_speed(cfg) * cfg.dt * stride
        return cls(
            gate=base.gate + travel,
            merge_distance=base.merge_distance,
            boundary_band=min(max(base.boundary_band, 0.5 * travel + h), BOUNDARY_BAND_LIMIT * length),
            collision_proximity=max(base.collision_proximity, travel),
            domain_length=length,
        )

    def in_boundary_band(self, position: float) -> bool:
        return position < self.boundary_band or position > self.domain_length - self.boundary_band


def default_min_prominence(field: StateVector, relative: float = RELATIVE_PROMINENCE) -> float:
    return relative * float(np.max(np.abs(field.values))) if len(field) else 0.0


def _flanking_minimum(magnitude: np.ndarray, j: int, direction: int) -> float:
    i = j
    while 0 <= i + direction < len(magnitude) and magnitude[i + direction] <= magnitude[i]:
        i += direction
    return magnitude[i]


def _ring_flanking_minimum(magnitude: np.ndarray, j: int, direction: int) -> float:
    n = len(magnitude)
    i = j
    for _ in range(n):
        nxt = (i + direction) % n
        if magnitude[nxt] > magnitude[i]:
            break
        i = nxt
    return magnitude[i]


def _refine(ym: float, y0: float, yp: float) -> Tuple[float, float]:
    """Vertex of the parabola through three neighbouring samples, as (offset, height)"""
    curvature = ym - 2 * y0 + yp
    offset = 0.5 * (ym - yp) / curvature if curvature != 0 else 0.0
    return offset, y0 - 0.25 * (ym - yp) * offset


def _candidates(magnitude: np.ndarray, is_max: np.ndarray, min_prominence: float) -> np.ndarray:
    # prominence never exceeds the rise above the global minimum
    return np.flatnonzero(is_max & (magnitude - magnitude.min() >= min_prominence))


def detect_peaks(field: StateVector, grid: GridSpec, min_prominence: Optional[float] = None) -> List[Peak]:
    """Strict interior local maxima of |u| with prominence >= min_prominence, sorted by position"""
    if min_prominence is None:
        min_prominence = default_min_prominence(field)
    magnitude = np.abs(field.values)
    if len(magnitude) < 3:
        return []
    is_max = np.zeros(len(magnitude), dtype=bool)
    is_max[1:-1] = (magnitude[1:-1] > magnitude[:-2]) & (magnitude[1:-1] > magnitude[2:])
    peaks = []
    for j in _candidates(magnitude, is_max, min_prominence):
        left = _flanking_minimum(magnitude, j, -1)
        right = _flanking_minimum(magnitude, j, +1)
        prominence = float(magnitude[j] - max(left, right))
        if prominence < min_prominence:
            continue
        offset, height = _refine(magnitude[j - 1], magnitude[j], magnitude[j + 1])
        peaks.append(Peak(
            node_index=int(j),
            position=float((j + offset) * grid.h),
            height=float(height),
            prominence=prominence,
        ))
    return peaks


def detect_ring_peaks(magnitude: np.ndarray, spacing: float, min_prominence: float = 0.0) -> List[Peak]:
    """Strict local maxima of a periodic sample array; positions are ring coordinates in [0, n*spacing)"""
    magnitude = np.asarray(magnitude, dtype=float)
    n = len(magnitude)
    if n < 3:
        return []
    before, after = np.roll(magnitude, 1), np.roll(magnitude, -1)
    peaks = []
    for j in _candidates(magnitude, (magnitude > before) & (magnitude > after), min_prominence):
        left = _ring_flanking_minimum(magnitude, j, -1)
        right = _ring_flanking_minimum(magnitude, j, +1)
        prominence = float(magnitude[j] - max(left, right))
        if prominence < min_prominence:
            continue
        offset, height = _refine(before[j], magnitude[j], after[j])
        peaks.append(Peak(
            node_index=int(j),
            position=float(((j + offset) % n) * spacing),
            height=float(height),
            prominence=prominence,
        ))
    return peaks


def travelling_envelope(state: StateVector) -> np.ndarray:
    """|positive-wavenumber part| of the odd 2L-periodic extension of the field

    Entry j of the result sits at ring coordinate j*h; entries past n-1 mirror
    the physical node 2(n-1) - j.
    """
    values = state.values
    extended = np.concatenate((values, -values[-2:0:-1]))
    spectrum = fft.fft(extended)
    n_ring = len(extended)
    keep = np.zeros(n_ring)
    keep[1:(n_ring + 1) // 2] = 1.0
    if n_ring % 2 == 0:
        keep[n_ring // 2] = 0.5
    keep[0] = 0.5
    return np.abs(fft.ifft(spectrum * keep))


def _greedy_pairs(active: Sequence[PeakTrack], peaks: Sequence[Peak],
                  distance: Callable[[PeakTrack, Peak], float], gate: float):
    """Nearest (track, peak) pairs within the gate, each track and peak used once"""
    pairs = []
    for track in active:
        for p, peak in enumerate(peaks):
            d = distance(track, peak)
            if d <= gate:
                pairs.append((d, track.track_id, p, track))
    pairs.sort(key=lambda item: item[:3])
    matched_tracks, matched_peaks = set(), set()
    for _, track_id, p, track in pairs:
        if track_id in matched_tracks or p in matched_peaks:
            continue
        matched_tracks.add(track_id)
        matched_peaks.add(p)
        yield track, p


def track_peaks(traj: Trajectory, min_prominence: Optional[float] = None,
                params: Optional[TrackingParams] = None,
                absolute_prominence: float = 0.0,
                relative_prominence: float = RELATIVE_PROMINENCE) -> List[PeakTrack]:
    """Greedy nearest-neighbour association of peaks between consecutive snapshots"""
    if len(traj) < 2:
        raise MetricsError("tracking needs at least two snapshots")
    grid = traj.config.grid
    params = params or TrackingParams.for_grid(grid)
    tracks: List[PeakTrack] = []
    active: List[PeakTrack] = []

    for snapshot in traj.snapshots:
        floor = default_min_prominence(snapshot, relative_prominence) if min_prominence is None else min_prominence
        peaks = detect_peaks(snapshot, grid, max(floor, absolute_prominence))

        matched_tracks, matched_peaks = set(), set()
        for track, p in _greedy_pairs(active, peaks, lambda t, peak: abs(peak.position - t.last_position),
                                      params.gate):
            matched_tracks.add(track.track_id)
            matched_peaks.add(p)
            track.append(snapshot.time_index, peaks[p].position, peaks[p].height)

        survivors = [t for t in active if t.track_id in matched_tracks]
        for track in active:
            if track.track_id in matched_tracks:
                continue
            if params.in_boundary_band(track.last_position):
                track.status = EXITED
            elif any(abs(s.last_position - track.last_position) <= params.merge_distance for s in survivors):
                track.status = MERGED
            else:
                track.status = LOST

        for p, peak in enumerate(peaks):
            if p in matched_peaks:
                continue
            track = PeakTrack(track_id=len(tracks))
            track.append(snapshot.time_index, peak.position, peak.height)
            tracks.append(track)
            survivors.append(track)
        active = survivors

    logger.debug(f"tracked {len(tracks)} peak tracks over {len(traj)} snapshots")
    return tracks


class PacketTracker:
    """Incremental tracking of travelling-envelope maxima, fed one state at a time

    Sample positions are physical (the ring folded back onto [0, L]), `path`
    is the unwrapped ring coordinate and `height` is the upper envelope of
    |u| at the sample: the packet plus whatever counter-propagating part
    overlaps it.
    """

    def __init__(self, grid: GridSpec, params: TrackingParams, absolute_prominence: float = 0.0,
                 relative_prominence: float = RELATIVE_PROMINENCE):
        self.grid = grid
        self.params = params
        self.absolute_prominence = absolute_prominence
        self.relative_prominence = relative_prominence
        self.tracks: List[PeakTrack] = []
        self.observed = 0
        self._active: List[PeakTrack] = []
        self._ring_positions = {}

    @property
    def ring_length(self) -> float:
        return 2 * self.grid.domain_length

    def _ring_gap(self, a: float, b: float) -> float:
        delta = (b - a) % self.ring_length
        return min(delta, self.ring_length - delta)

    def _ring_distance(self, track: PeakTrack, peak: Peak) -> float:
        return self._ring_gap(self._ring_positions[track.track_id], peak.position)

    def _fold(self, ring_position: float) -> float:
        length = self.grid.domain_length
        return ring_position if ring_position <= length else self.ring_length - ring_position

    def observe(self, state: StateVector):
        envelope = travelling_envelope(state)
        n_ring = len(envelope)
        floor = max(self.relative_prominence * float(envelope.max()), self.absolute_prominence)
        peaks = detect_ring_peaks(envelope, self.grid.h, floor)
        self.observed += 1

        def upper_envelope(peak: Peak) -> float:
            return peak.height + float(envelope[(-peak.node_index) % n_ring])

        matched_tracks, matched_peaks = set(), set()
        for track, p in _greedy_pairs(self._active, peaks, self._ring_distance, self.params.gate):
            peak = peaks[p]
            delta = (peak.position - self._ring_positions[track.track_id]) % self.ring_length
            if delta > self.ring_length / 2:
                delta -= self.ring_length
            track.append(state.time_index, self._fold(peak.position), upper_envelope(peak),
                         track.samples[-1].path + delta)
            self._ring_positions[track.track_id] = peak.position
            matched_tracks.add(track.track_id)
            matched_peaks.add(p)

        survivors = [t for t in self._active if t.track_id in matched_tracks]
        for track in self._active:
            if track.track_id in matched_tracks:
                continue
            here = self._ring_positions[track.track_id]
            merged = any(self._ring_gap(here, self._ring_positions[s.track_id]) <= self.params.merge_distance
                         for s in survivors)
            track.status = MERGED if merged else LOST

        for p, peak in enumerate(peaks):
            if p in matched_peaks:
                continue
            track = PeakTrack(track_id=len(self.tracks))
            track.append(state.time_index, self._fold(peak.position), upper_envelope(peak), peak.position)
            self._ring_positions[track.track_id] = peak.position
            self.tracks.append(track)
            survivors.append(track)
        self._active = survivors


def track_packets(traj: Trajectory, params: Optional[TrackingParams] = None,
                  absolute_prominence: float = 0.0,
                  relative_prominence: float = RELATIVE_PROMINENCE) -> List[PeakTrack]:
    """PacketTracker over the stored snapshots of a trajectory"""
    if len(traj) < 2:
        raise MetricsError("tracking needs at least two snapshots")
    cfg = traj.config
    params = params or TrackingParams.for_config(cfg, cfg.snapshot_stride)
    tracker = PacketTracker(cfg.grid, params, absolute_prominence, relative_prominence)
    for snapshot in traj.snapshots:
        tracker.observe(snapshot)
    logger.debug(f"tracked {len(tracker.tracks)} packet tracks over {len(traj)} snapshots")
    return tracker.tracks


def estimate_velocity(track: PeakTrack, dt: float, window: Tuple[float, float] = VELOCITY_WINDOW) -> float:
    """Least-squares slope of travelled distance against physical time inside a lifetime window

    For |u| tracks the travelled distance is the position, so the sign gives the direction.
    """
    start, end = window
    if not 0 <= start < end <= 1:
        raise MetricsError(f"window must satisfy 0 <= start < end <= 1, got {window}")
    if not track.samples:
        raise TooFewSamples(f"track {track.track_id} is empty")
    t0, t1 = track.first_time_index, track.last_time_index
    lo, hi = t0 + start * (t1 - t0), t0 + end * (t1 - t0)
    inside = [s for s in track.samples if lo <= s.time_index <= hi]
    if len(inside) < MIN_VELOCITY_SAMPLES:
        raise TooFewSamples(
            f"track {track.track_id} has {len(inside)} samples in window {window}, "
            f"need {MIN_VELOCITY_SAMPLES}"
        )
    times = np.array([s.time_index for s in inside], dtype=float) * dt
    distances = np.array([s.travelled for s in inside])
    return float(stats.linregress(times, distances).slope)


def height_series(track: PeakTrack) -> List[Tuple[int, float]]:
    return [(s.time_index, s.height) for s in track.samples]


def detect_collisions(tracks: Sequence[PeakTrack], proximity: float) -> List[EventRecord]:
    """Counter-propagating track pairs within `proximity` at a shared time index, one event per encounter"""
    if not proximity > 0:
        raise MetricsError(f"proximity must be positive, got {proximity}")
    events = []
    ordered = sorted(tracks, key=lambda t: t.track_id)
    for a_pos, a in enumerate(ordered):
        for b in ordered[a_pos + 1:]:
            b_index = {s.time_index: j for j, s in enumerate(b.samples)}
            encounter = []
            for i, sa in enumerate(a.samples):
                j = b_index.get(sa.time_index)
                close = False
                if j is not None:
                    sb = b.samples[j]
                    va, vb = a.local_velocity(i), b.local_velocity(j)
                    close = va * vb < 0 and abs(sa.position - sb.position) <= proximity
                if close:
                    encounter.append((abs(sa.position - sb.position), sa, sb))
                elif encounter:
                    events.append(_collision_event(encounter, a, b))
                    encounter = []
            if encounter:
                events.append(_collision_event(encounter, a, b))
    return sorted(events, key=lambda e: (e.time_index, e.track_ids))


def _collision_event(encounter, a: PeakTrack, b: PeakTrack) -> EventRecord:
    _, sa, sb = min(encounter, key=lambda item: (item[0], item[1].time_index))
    return EventRecord(
        kind=COLLISION,
        time_index=sa.time_index,
        position=0.5 * (sa.position + sb.position),
        track_ids=(a.track_id, b.track_id),
        peak_height=max(sa.height, sb.height),
    )


def detect_reflections(tracks: Sequence[PeakTrack], boundary_band: float,
                       domain_length: float = 1.0) -> List[EventRecord]:
    """Velocity sign change while inside the band near either boundary, one event per band visit"""
    if not 0 < boundary_band < domain_length / 4:
        raise MetricsError(f"boundary_band must lie in (0, {domain_length / 4}), got {boundary_band}")
    events = []
    for track in sorted(tracks, key=lambda t: t.track_id):
        samples = track.samples
        reported = False
        for i in range(1, len(samples) - 1):
            s = samples[i]
            in_band = s.position < boundary_band or s.position > domain_length - boundary_band
            if not in_band:
                reported = False
                continue
            before = samples[i].position - samples[i - 1].position
            after = samples[i + 1].position - samples[i].position
            if before * after < 0 and not reported:
                events.append(EventRecord(
                    kind=REFLECTION,
                    time_index=s.time_index,
                    position=s.position,
                    track_ids=(track.track_id,),
                    peak_height=s.height,
                ))
                reported = True
    return sorted(events, key=lambda e: (e.time_index, e.track_ids))
