"""
Management command to run one lambda-scheme simulation and dump the
snapshots as trajectory.csv.
"""

import logging

import numpy as np

from simulation.exports import write_csv
from simulation.lambda_scheme import simulate

from ._base import LabCommand

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ('step', 'x', 'u_re', 'u_im', 'abs_u')


def trajectory_rows(traj):
    x = traj.config.grid.x
    for snapshot in traj.snapshots:
        magnitude = np.abs(snapshot.values)
        for j, u in enumerate(snapshot.values):
            yield snapshot.time_index, x[j], u.real, u.imag, magnitude[j]


class Command(LabCommand):
    help = 'Run the implicit lambda-scheme and write trajectory.csv'
    subcommand = 'simulate'

    def add_subcommand_arguments(self, parser):
        parser.add_argument(
            '--no-cache',
            action='store_true',
            help='Re-factorize the step matrix every step instead of reusing it',
        )

    def run(self, cfg, options, output_dir):
        self.stdout.write(
            f'Simulating lambda={cfg.lam:g}, C={cfg.c_coef}, n={cfg.grid.n_points}, '
            f'{cfg.n_steps} steps (rho={cfg.rho:.4g})...'
        )
        traj = simulate(cfg, cache_factorization=not options['no_cache'])
        norms = traj.norms()
        self.stdout.write(f'   L2 norm {norms[0]:.6g} -> {norms[-1]:.6g} over {len(traj)} snapshots')
        return [write_csv(TRAJECTORY_HEADER, trajectory_rows(traj), output_dir / 'trajectory.csv')]
