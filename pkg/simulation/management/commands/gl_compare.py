"""
Management command comparing one lambda-scheme run with Grünwald-Letnikov
runs of several fractional orders.
"""

import logging

from django.conf import settings

from simulation.exports import write_csv
from simulation.gl_fractional import UNBOUNDED, sweep_gamma

from ._base import LabCommand

logger = logging.getLogger(__name__)

COMPARE_HEADER = ('gamma', 'step', 'l2', 'max_abs')
SUMMARY_HEADER = ('gamma', 'max_l2', 'mean_l2', 'max_abs', 'mean_abs')


class Command(LabCommand):
    help = 'Compare the lambda-scheme with fractional GL runs over a list of gamma'
    subcommand = 'gl-compare'

    def add_subcommand_arguments(self, parser):
        parser.add_argument(
            '--gammas',
            nargs='+',
            type=float,
            default=list(settings.SIMULATION_DEFAULTS['gl_gammas']),
            help='Fractional orders in (0, 1] (default: %(default)s)',
        )
        parser.add_argument('--k-real', type=float, help='Real part of K_gamma (default: C)')
        parser.add_argument('--k-imag', type=float, help='Imaginary part of K_gamma (default: C)')
        parser.add_argument(
            '--memory',
            type=int,
            default=UNBOUNDED,
            help='Truncate the GL history to this many steps (default: unbounded)',
        )

    def k_gamma(self, cfg, options) -> complex:
        re = cfg.c_coef.real if options['k_real'] is None else options['k_real']
        im = cfg.c_coef.imag if options['k_imag'] is None else options['k_imag']
        return complex(re, im)

    def parameters(self, cfg, options):
        k = self.k_gamma(cfg, options)
        return {
            'config': cfg.as_dict(),
            'gammas': list(options['gammas']),
            'k_gamma': [k.real, k.imag],
            'memory_length': options['memory'],
        }

    def run(self, cfg, options, output_dir):
        self.stdout.write(
            f'Comparing lambda={cfg.lam:g} against gamma in {options["gammas"]} '
            f'over {cfg.n_steps} steps...'
        )
        sweep = sweep_gamma(cfg, options['gammas'], self.k_gamma(cfg, options), options['memory'])

        compare_rows = [
            (gamma, row.time_index, row.l2, row.max_abs)
            for gamma, table in sweep.tables
            for row in table.rows
        ]
        summary_rows = [
            (gamma, table.max_l2, table.mean_l2, table.max_abs, table.mean_abs)
            for gamma, table in sweep.tables
        ]
        if sweep.best_gamma is not None:
            self.stdout.write(f'   closest gamma: {sweep.best_gamma:g}')
        return [
            write_csv(COMPARE_HEADER, compare_rows, output_dir / 'gl_compare.csv'),
            write_csv(SUMMARY_HEADER, summary_rows, output_dir / 'gl_summary.csv'),
        ]
