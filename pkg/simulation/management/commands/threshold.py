"""
Management command to bisect the initial gradient at which a soliton first
forms and write threshold.csv.
"""

import logging

from django.conf import settings

from simulation.experiments import JUMP_MODE, RAMP_MODE, threshold_gradient
from simulation.exports import write_csv

from ._base import LabCommand

logger = logging.getLogger(__name__)

THRESHOLD_HEADER = ('lambda', 'c_re', 'c_im', 'eps_lo', 'eps_hi', 'eps_star', 'n_bisections')


class Command(LabCommand):
    help = 'Find the formation threshold of the initial gradient by bisection'
    subcommand = 'threshold'

    def add_subcommand_arguments(self, parser):
        defaults = settings.SIMULATION_DEFAULTS
        parser.add_argument(
            '--bracket',
            nargs=2,
            type=float,
            metavar=('LO', 'HI'),
            default=list(defaults['threshold_bracket']),
            help='Gradient bracket, non-forming then forming (default: %(default)s)',
        )
        parser.add_argument(
            '--tol',
            type=float,
            default=defaults['threshold_tol'],
            help='Stop when the bracket is narrower than this (default: %(default)s)',
        )
        parser.add_argument(
            '--mode',
            choices=[RAMP_MODE, JUMP_MODE],
            default=RAMP_MODE,
            help='How the gradient shapes the initial field (default: %(default)s)',
        )

    def parameters(self, cfg, options):
        return {
            'config': cfg.as_dict(),
            'bracket': list(options['bracket']),
            'tol': options['tol'],
            'mode': options['mode'],
            'ramp_width': options['ramp_width'],
            'criteria': self.criteria().as_dict(),
        }

    def run(self, cfg, options, output_dir):
        lo, hi = options['bracket']
        self.stdout.write(
            f'Bisecting the {options["mode"]} gradient for lambda={cfg.lam:g}, C={cfg.c_coef} '
            f'in ({lo:g}, {hi:g})...'
        )
        result = threshold_gradient(
            cfg.lam, cfg.c_coef, (lo, hi), options['tol'],
            cfg_base=cfg,
            criteria=self.criteria(),
            mode=options['mode'],
            ramp_width=options['ramp_width'],
        )
        self.stdout.write(
            f'   eps* = {result.epsilon_star:.6g} after {result.n_bisections} bisections'
        )
        row = (result.lam, result.c_coef.real, result.c_coef.imag, result.epsilon_lo,
               result.epsilon_hi, result.epsilon_star, result.n_bisections)
        return [write_csv(THRESHOLD_HEADER, [row], output_dir / 'threshold.csv')]
