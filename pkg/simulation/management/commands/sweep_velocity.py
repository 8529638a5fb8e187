"""
Management command for the velocity-vs-lambda sweep: velocity.csv plus the
relative-velocity plot velocity.svg.
"""

import logging

from django.conf import settings

from simulation.experiments import velocity_vs_lambda
from simulation.exports import PlotSeries, render_svg_lineplot, write_csv

from ._base import LabCommand, complex_label, parse_complex

logger = logging.getLogger(__name__)

VELOCITY_HEADER = ('c_re', 'c_im', 'lambda', 'velocity_abs', 'velocity_rel', 'n_tracks', 'formation_step')


def velocity_rows(sweep):
    for row in sweep.rows:
        yield (row.c_coef.real, row.c_coef.imag, row.lam, row.velocity_abs,
               row.velocity_relative, row.n_tracks, row.formation_step)


def velocity_series(sweep):
    """Relative velocity per C, falling back to absolute velocity when no reference exists"""
    series = []
    for c in sweep.c_values:
        rows = sweep.rows_for(c)
        relative = [(r.lam, r.velocity_relative) for r in rows if r.velocity_relative is not None]
        points = relative or [(r.lam, r.velocity_abs) for r in rows if r.velocity_abs is not None]
        if len(points) >= 2:
            series.append(PlotSeries(complex_label(c), tuple(points)))
    return series


class Command(LabCommand):
    help = 'Sweep lambda for several C and record the dominant soliton velocity'
    subcommand = 'sweep-velocity'

    def add_subcommand_arguments(self, parser):
        defaults = settings.SIMULATION_DEFAULTS
        parser.add_argument(
            '--c-list',
            nargs='+',
            type=parse_complex,
            default=[complex(c) for c in defaults['sweep_c_list']],
            help='C values, e.g. 0.5i 1i 1.5i (default: 0.5i 1i 1.5i)',
        )
        parser.add_argument(
            '--lambdas',
            nargs='+',
            type=float,
            default=list(defaults['lambda_grid']),
            help='Ascending lambda grid inside (0, 2) (default: 0.1 ... 1.9)',
        )

    def parameters(self, cfg, options):
        return {
            'config': cfg.as_dict(),
            'c_list': [[c.real, c.imag] for c in options['c_list']],
            'lambda_grid': list(options['lambdas']),
            'criteria': self.criteria().as_dict(),
        }

    def run(self, cfg, options, output_dir):
        c_list, grid = options['c_list'], options['lambdas']
        self.stdout.write(
            f'Sweeping {len(grid)} lambda values for {len(c_list)} C values '
            f'on {self.max_workers} worker(s)...'
        )
        sweep = velocity_vs_lambda(
            c_list, grid, cfg,
            criteria=self.criteria(),
            max_workers=self.max_workers,
        )
        missing = sum(1 for r in sweep.rows if r.velocity_abs is None)
        if missing:
            self.stdout.write(self.style.WARNING(f'   {missing} sweep point(s) without a velocity'))

        outputs = [write_csv(VELOCITY_HEADER, velocity_rows(sweep), output_dir / 'velocity.csv')]
        series = velocity_series(sweep)
        if series:
            outputs.append(render_svg_lineplot(
                series, 'lambda', 'relative velocity', output_dir / 'velocity.svg',
                title='Soliton velocity against lambda',
            ))
        else:
            self.stdout.write(self.style.WARNING('   not enough velocities to plot velocity.svg'))
        return outputs
