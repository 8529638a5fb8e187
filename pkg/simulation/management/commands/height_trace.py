"""
Management command for the soliton height against time: heights.csv with
collision/reflection markers, and heights.svg.
"""

import logging

from django.conf import settings

from simulation.experiments import height_vs_time
from simulation.exports import PlotMarker, PlotSeries, render_svg_lineplot, write_csv

from ._base import LabCommand, complex_label, parse_complex

logger = logging.getLogger(__name__)

HEIGHTS_HEADER = ('c_re', 'c_im', 'step', 'height', 'event_kind')


def height_rows(traces):
    for trace in traces:
        for time_index, height in trace.series:
            kinds = ';'.join(trace.event_kinds_at(time_index))
            yield trace.c_coef.real, trace.c_coef.imag, time_index, height, kinds


class Command(LabCommand):
    help = 'Trace the dominant soliton height over time for several C'
    subcommand = 'height-trace'

    def add_subcommand_arguments(self, parser):
        parser.add_argument(
            '--c-list',
            nargs='+',
            type=parse_complex,
            default=[complex(c) for c in settings.SIMULATION_DEFAULTS['height_c_list']],
            help='C values, e.g. 2.8i 1.5i 0.5i (default: 2.8i 1.5i 0.5i)',
        )

    def parameters(self, cfg, options):
        return {
            'config': cfg.as_dict(),
            'c_list': [[c.real, c.imag] for c in options['c_list']],
            'criteria': self.criteria().as_dict(),
        }

    def run(self, cfg, options, output_dir):
        c_list = options['c_list']
        self.stdout.write(f'Tracing heights for {len(c_list)} C values at lambda={cfg.lam:g}...')
        traces = height_vs_time(
            c_list, cfg.lam, cfg,
            criteria=self.criteria(),
            max_workers=self.max_workers,
        )
        for trace in traces:
            plateau = trace.plateau_height
            plateau_text = f'{plateau:.4g}' if plateau is not None else 'n/a'
            self.stdout.write(
                f'   {complex_label(trace.c_coef)}: plateau {plateau_text}, '
                f'{len(trace.spikes())} spike(s), {len(trace.events)} event(s)'
            )

        outputs = [write_csv(HEIGHTS_HEADER, height_rows(traces), output_dir / 'heights.csv')]
        series = [
            PlotSeries(complex_label(t.c_coef), tuple(t.series))
            for t in traces if len(t.series) >= 2
        ]
        if series:
            markers = sorted(
                {(e.time_index, e.kind) for t in traces for e in t.events}
            )
            outputs.append(render_svg_lineplot(
                series, 'step', 'height', output_dir / 'heights.svg',
                markers=[PlotMarker(time_index, kind) for time_index, kind in markers],
                title=f'Soliton height, lambda={cfg.lam:g}',
            ))
        else:
            self.stdout.write(self.style.WARNING('   no height series long enough to plot heights.svg'))
        return outputs
