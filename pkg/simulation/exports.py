"""
Output writers: CSV tables, standalone SVG line plots and .meta sidecars.
Every file is written to a temporary sibling and renamed into place.
"""

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder
from django.template.loader import render_to_string
from django.utils import timezone

import simulation

logger = logging.getLogger(__name__)

PALETTE = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#17becf')
EVENT_COLOURS = {'collision': '#d62728', 'reflection': '#7f7f7f'}

WIDTH, HEIGHT = 720, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 30, 55


class ExportError(Exception):
    pass


class EmptySeries(ExportError):
    pass


def atomic_write(path, data: str):
    """Write text as UTF-8 with LF endings via temp file + rename"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
                handle.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e}") from e
    logger.debug(f"wrote {path}")


def format_cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    if not header:
        raise ExportError(f"{path}: CSV header must not be empty")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    atomic_write(path, buffer.getvalue())
    return Path(path)


def write_meta(path, subcommand: str, config_digest: str, extra: Optional[dict] = None) -> Path:
    """Sidecar <file>.meta next to an output file"""
    meta_path = Path(f'{path}.meta')
    payload = {
        'file': Path(path).name,
        'subcommand': subcommand,
        'config_digest': config_digest,
        'tool_version': simulation.__version__,
        'written_at': timezone.now(),
    }
    if extra:
        payload.update(extra)
    atomic_write(meta_path, json.dumps(payload, cls=DjangoJSONEncoder, indent=2, sort_keys=True) + '\n')
    return meta_path


@dataclass(frozen=True)
class PlotSeries:
    name: str
    points: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class PlotMarker:
    x: float
    label: str


def nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / count
    magnitude = 10 ** np.floor(np.log10(raw))
    step = min((m * magnitude for m in (1, 2, 2.5, 5, 10) if m * magnitude >= raw), default=raw)
    first = np.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(float(round(value / step) * step))
        value += step
    return ticks


def _fmt(value: float) -> str:
    return f'{value:.2f}'


def _label(value: float) -> str:
    text = f'{value:.4g}'
    return '0' if text == '-0' else text


def render_svg_lineplot(series: Sequence[PlotSeries], x_label: str, y_label: str, path,
                        markers: Sequence[PlotMarker] = (), title: str = '') -> Path:
    """Standalone SVG with one polyline per series, legend, linear axes and event markers"""
    if not series:
        raise EmptySeries(f"{path}: nothing to plot")
    for s in series:
        if len(s.points) < 2:
            raise EmptySeries(f"{path}: series {s.name!r} has {len(s.points)} point(s), need 2")

    xs = [p[0] for s in series for p in s.points] + [m.x for m in markers]
    ys = [p[1] for s in series for p in s.points]
    x_ticks = nice_ticks(min(xs), max(xs))
    y_ticks = nice_ticks(min(ys), max(ys))
    x_lo, x_hi = min(x_ticks[0], min(xs)), max(x_ticks[-1], max(xs))
    y_lo, y_hi = min(y_ticks[0], min(ys)), max(y_ticks[-1], max(ys))
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_lo) / ((x_hi - x_lo) or 1.0) * plot_w

    def sy(y):
        return MARGIN_TOP + plot_h - (y - y_lo) / ((y_hi - y_lo) or 1.0) * plot_h

    context = {
        'width': WIDTH,
        'height': HEIGHT,
        'title': title,
        'x_label': x_label,
        'y_label': y_label,
        'plot': {
            'left': MARGIN_LEFT, 'top': MARGIN_TOP,
            'right': MARGIN_LEFT + plot_w, 'bottom': MARGIN_TOP + plot_h,
            'width': plot_w, 'height': plot_h,
            'centre_x': _fmt(MARGIN_LEFT + plot_w / 2), 'centre_y': _fmt(MARGIN_TOP + plot_h / 2),
        },
        'x_ticks': [{'pos': _fmt(sx(t)), 'label': _label(t)} for t in x_ticks if x_lo <= t <= x_hi],
        'y_ticks': [{'pos': _fmt(sy(t)), 'label': _label(t)} for t in y_ticks if y_lo <= t <= y_hi],
        'series': [
            {
                'name': s.name,
                'colour': PALETTE[i % len(PALETTE)],
                'points': ' '.join(f'{_fmt(sx(x))},{_fmt(sy(y))}' for x, y in s.points),
                'legend_y': MARGIN_TOP + 10 + 20 * i,
            }
            for i, s in enumerate(series)
        ],
        'legend_x': MARGIN_LEFT + plot_w + 15,
        'markers': [
            {
                'x': _fmt(sx(m.x)),
                'label': m.label,
                'colour': EVENT_COLOURS.get(m.label, '#7f7f7f'),
            }
            for m in markers
        ],
    }
    atomic_write(path, render_to_string('simulation/lineplot.svg', context))
    return Path(path)
