"""
Full-size physics runs at the default configuration.

Tagged 'acceptance' and skipped by the default test run; enable with
LAMBDA_LAB_ACCEPTANCE=True or `manage.py test --tag acceptance`.
"""

import io
import shutil
import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase, TestCase, tag

from simulation.cli import run_cli
from simulation.experiments import (
    FormationCriteria, formation_report, height_vs_time, monotonicity_check,
    threshold_gradient, velocity_vs_lambda,
)
from simulation.field_core import SimulationConfig, Uniform
from simulation.lambda_scheme import packet_speed


def default_criteria():
    return FormationCriteria(**settings.SIMULATION_DEFAULTS['formation'])


@tag('acceptance')
class SolitonPhysicsTests(SimpleTestCase):

    def test_formation_across_lambda(self):
        for lam in (0.2, 0.6, 1.0, 1.4, 1.8):
            with self.subTest(lam=lam):
                cfg = SimulationConfig(lam=lam, c_coef=1j, ic=Uniform(1.0))
                report = formation_report(cfg, default_criteria())
                self.assertTrue(report.formed, f'no soliton formed for lambda={lam}: {report}')

    def test_threshold_order_of_magnitude(self):
        result = threshold_gradient(1.0, 1j, (1e-5, 1e-1), 1e-4, criteria=default_criteria())
        print(f'\nmeasured eps* = {result.epsilon_star:.6g} ({result.n_bisections} bisections)')
        self.assertGreaterEqual(result.epsilon_star, 1e-4, f'eps* = {result.epsilon_star:.6g}')
        self.assertLessEqual(result.epsilon_star, 1e-2, f'eps* = {result.epsilon_star:.6g}')

    def test_velocity_monotone_in_lambda(self):
        grid = [round(0.2 * i, 1) for i in range(1, 10)]
        sweep = velocity_vs_lambda((0.5j, 1.0j, 1.5j), grid, SimulationConfig(),
                                   criteria=default_criteria(),
                                   max_workers=settings.LAMBDA_SOLITON_THREADS)
        for c in sweep.c_values:
            with self.subTest(c=c):
                result = monotonicity_check(sweep, c)
                self.assertTrue(result, f'velocity not monotone for C={c} at row {result.first_violation}')
                for row in sweep.rows_for(c):
                    expected = packet_speed(SimulationConfig(lam=row.lam, c_coef=c))
                    self.assertAlmostEqual(row.velocity_abs / expected, 1.0, delta=0.05)

    def test_heights_and_spikes(self):
        cfg = SimulationConfig()
        traces = height_vs_time((2.8j, 1.5j, 0.5j), 1.0, cfg,
                                criteria=default_criteria(),
                                max_workers=settings.LAMBDA_SOLITON_THREADS)
        plateaus = [t.plateau_height for t in traces]
        self.assertNotIn(None, plateaus)
        by_c = {t.c_coef: t.plateau_height for t in traces}
        print('\nplateau heights: ' + ', '.join(f'{c}: {h:.4g}' for c, h in by_c.items()))
        # every mode is damped harder as |C| grows, so the plateau falls with |C|
        self.assertGreater(by_c[0.5j], by_c[1.5j])
        self.assertGreater(by_c[1.5j], by_c[2.8j])

        for trace in traces:
            window = 2 * trace.stride
            for time_index, height in trace.spikes():
                with self.subTest(c=trace.c_coef, step=time_index):
                    near = [e for e in trace.events if abs(e.time_index - time_index) <= window]
                    self.assertTrue(near, f'spike of height {height:.4g} without a nearby event')


@tag('acceptance')
class SweepDeterminismTests(TestCase):

    def test_sweep_velocity_twice(self):
        tmp = Path(tempfile.mkdtemp(prefix='lambda-lab-acceptance-'))
        self.addCleanup(shutil.rmtree, tmp, ignore_errors=True)
        for name in ('first', 'second'):
            code = run_cli(['sweep-velocity', '--output-dir', str(tmp / name)],
                           stdout=io.StringIO(), stderr=io.StringIO())
            self.assertEqual(code, 0)
        for filename in ('velocity.csv', 'velocity.svg'):
            self.assertEqual((tmp / 'first' / filename).read_bytes(),
                             (tmp / 'second' / filename).read_bytes())
