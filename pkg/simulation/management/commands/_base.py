"""
Shared plumbing for the lab commands: simulation flags, config building,
error-to-exit-code mapping and run ledger bookkeeping.
"""

import argparse
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from simulation.experiments import ExperimentError, FormationCriteria
from simulation.exports import ExportError, write_meta
from simulation.field_core import (
    FieldError, GridSpec, SimulationConfig, Uniform, UniformWithEdgeRamp, config_digest,
)
from simulation.gl_fractional import FractionalError
from simulation.lambda_scheme import SchemeError
from simulation.services import RunLedgerService
from simulation.soliton_metrics import MetricsError

logger = logging.getLogger(__name__)

USAGE_ERROR = 1
NUMERICAL_ERROR = 2

BASE_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color',
    'skip_checks', 'stdout', 'stderr',
}


def parse_complex(text: str) -> complex:
    """Accepts '1.5i', '0.5+1i', '2' as well as Python's '1.5j'"""
    try:
        return complex(text.strip().replace('i', 'j').replace(' ', ''))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def complex_label(c: complex) -> str:
    c = complex(c)
    if c.real == 0:
        return f'C={c.imag:g}i'
    return f'C={c.real:g}{c.imag:+g}i'


class LabCommand(BaseCommand):
    """Base for subcommands that turn flags into a SimulationConfig and write files"""

    subcommand = None
    requires_system_checks = []

    def add_arguments(self, parser):
        defaults = settings.SIMULATION_DEFAULTS
        c_default = complex(defaults['c_coef'])
        parser.add_argument('--lambda', dest='lam', type=float, default=defaults['lambda'],
                            help='Scheme parameter lambda (default: %(default)s)')
        parser.add_argument('--c-real', type=float, default=c_default.real,
                            help='Real part of C (default: %(default)s)')
        parser.add_argument('--c-imag', type=float, default=c_default.imag,
                            help='Imaginary part of C (default: %(default)s)')
        parser.add_argument('--n', dest='n_points', type=int, default=defaults['n_points'],
                            help='Grid nodes including both boundaries (default: %(default)s)')
        parser.add_argument('--length', type=float, default=defaults['domain_length'],
                            help='Domain length (default: %(default)s)')
        parser.add_argument('--dt', type=float, default=defaults['dt'],
                            help='Time step (default: %(default)s)')
        parser.add_argument('--steps', type=int, default=defaults['n_steps'],
                            help='Number of time steps (default: %(default)s)')
        parser.add_argument('--stride', type=int, default=defaults['snapshot_stride'],
                            help='Keep every stride-th snapshot (default: %(default)s)')
        parser.add_argument('--ic', choices=['uniform', 'ramp'], default='uniform',
                            help='Initial condition (default: %(default)s)')
        parser.add_argument('--level', type=float, default=1.0,
                            help='Plateau level of the initial field (default: %(default)s)')
        parser.add_argument('--gradient', type=float, default=0.001,
                            help='Edge ramp slope for --ic ramp (default: %(default)s)')
        parser.add_argument('--ramp-width', type=float, default=defaults['ramp_width'],
                            help='Edge ramp width as a fraction of the domain (default: %(default)s)')
        parser.add_argument('--output-dir', type=Path, default=Path(settings.LAMBDA_LAB_OUTPUT_DIR),
                            help='Directory for output files (default: %(default)s)')
        self.add_subcommand_arguments(parser)

    def add_subcommand_arguments(self, parser):
        pass

    def build_config(self, options) -> SimulationConfig:
        if options['ic'] == 'ramp':
            ic = UniformWithEdgeRamp(options['level'], options['gradient'], options['ramp_width'])
        else:
            ic = Uniform(options['level'])
        try:
            return SimulationConfig(
                grid=GridSpec(domain_length=options['length'], n_points=options['n_points']),
                lam=options['lam'],
                c_coef=complex(options['c_real'], options['c_imag']),
                dt=options['dt'],
                n_steps=options['steps'],
                snapshot_stride=options['stride'],
                ic=ic,
            )
        except FieldError as e:
            raise CommandError(f"invalid configuration: {e}", returncode=USAGE_ERROR)

    def criteria(self) -> FormationCriteria:
        return FormationCriteria(**settings.SIMULATION_DEFAULTS.get('formation', {}))

    @property
    def max_workers(self) -> int:
        return settings.LAMBDA_SOLITON_THREADS

    def parameters(self, cfg, options) -> dict:
        """JSON-safe record of the run inputs for the ledger and sidecars"""
        return {'config': cfg.as_dict()}

    def handle(self, *args, **options):
        output_dir = options['output_dir']
        try:
            cfg = self.build_config(options)
        except CommandError as e:
            raw = {k: str(v) for k, v in sorted(options.items()) if k not in BASE_OPTIONS}
            run = RunLedgerService.start(self.subcommand, '', {'options': raw}, output_dir)
            RunLedgerService.fail(run, USAGE_ERROR, str(e))
            raise
        parameters = self.parameters(cfg, options)
        digest = config_digest({'subcommand': self.subcommand, **parameters})
        run = RunLedgerService.start(self.subcommand, digest, parameters, output_dir)
        try:
            outputs = self.run(cfg, options, output_dir)
            for path in outputs:
                write_meta(path, self.subcommand, digest, {'parameters': parameters})
        except SchemeError as e:
            message = f"numerical failure: {e}"
            RunLedgerService.fail(run, NUMERICAL_ERROR, message)
            raise CommandError(message, returncode=NUMERICAL_ERROR)
        except (FieldError, FractionalError, MetricsError, ExperimentError, ExportError) as e:
            RunLedgerService.fail(run, USAGE_ERROR, str(e))
            raise CommandError(str(e), returncode=USAGE_ERROR)

        RunLedgerService.succeed(run, outputs)
        for path in outputs:
            self.stdout.write(self.style.SUCCESS(f'wrote {path}'))

    def run(self, cfg, options, output_dir) -> list:
        """Perform the subcommand and return the written file paths"""
        raise NotImplementedError
