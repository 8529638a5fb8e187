import csv
import io
import shutil
import tempfile
from pathlib import Path
from unittest import mock

from django.core.exceptions import ImproperlyConfigured
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings

from lambda_lab.settings import _thread_count
from simulation.cli import run_cli
from simulation.models import LabRun
from simulation.services import RunLedgerService

SINGULAR = ['--c-real', '-1', '--c-imag', '0', '--n', '5', '--dt', '0.0625', '--lambda', '1', '--steps', '1']


class CliTestCase(TestCase):

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp(prefix='lambda-lab-cli-'))
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def cli(self, *argv, output_dir=None):
        self.stdout, self.stderr = io.StringIO(), io.StringIO()
        argv = list(argv)
        if argv and argv[0] in ('simulate', 'sweep-velocity', 'threshold', 'height-trace', 'gl-compare'):
            argv += ['--output-dir', str(output_dir or self.tmp)]
        return run_cli(argv, stdout=self.stdout, stderr=self.stderr)

    def read_csv(self, name, directory=None):
        with open((directory or self.tmp) / name, newline='', encoding='utf-8') as handle:
            return list(csv.reader(handle))


class UsageTests(CliTestCase):

    def test_unknown_flag(self):
        self.assertEqual(self.cli('simulate', '--bogus'), 1)
        self.assertIn('usage:', self.stderr.getvalue())
        self.assertIn('--bogus', self.stderr.getvalue())
        self.assertFalse(LabRun.objects.exists())

    def test_unknown_subcommand(self):
        self.assertEqual(self.cli('animate'), 1)
        self.assertIn('unknown subcommand', self.stderr.getvalue())

    def test_missing_subcommand(self):
        self.assertEqual(self.cli(), 1)
        self.assertIn('usage: lambda-lab', self.stderr.getvalue())

    def test_top_level_help(self):
        self.assertEqual(self.cli('--help'), 0)
        self.assertIn('sweep-velocity', self.stdout.getvalue())

    def test_bad_complex_value(self):
        self.assertEqual(self.cli('height-trace', '--c-list', 'one-i'), 1)

    def test_invalid_configuration(self):
        self.assertEqual(self.cli('simulate', '--n', '3'), 1)
        self.assertIn('n_points', self.stderr.getvalue())
        run = LabRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.exit_code, 1)

    def test_bad_thread_setting(self):
        with self.assertRaises(ImproperlyConfigured) as ctx:
            _thread_count('many')
        with self.assertRaises(ImproperlyConfigured):
            _thread_count('0')
        self.assertEqual(_thread_count('3'), 3)
        with mock.patch('simulation.cli.setup_django', side_effect=ctx.exception):
            self.assertEqual(self.cli('simulate', '--n', '21', '--steps', '2'), 1)
        self.assertIn('LAMBDA_SOLITON_THREADS', self.stderr.getvalue())
        self.assertFalse((self.tmp / 'trajectory.csv').exists())


class SimulateCommandTests(CliTestCase):

    def test_small_run(self):
        code = self.cli('simulate', '--n', '21', '--steps', '10', '--stride', '5', '--lambda', '0.8')
        self.assertEqual(code, 0, self.stderr.getvalue())
        rows = self.read_csv('trajectory.csv')
        self.assertEqual(rows[0], ['step', 'x', 'u_re', 'u_im', 'abs_u'])
        self.assertEqual(len(rows), 1 + 3 * 21)
        self.assertEqual({r[0] for r in rows[1:]}, {'0', '5', '10'})
        self.assertEqual(rows[1], ['0', '0.0', '0.0', '0.0', '0.0'])
        self.assertTrue((self.tmp / 'trajectory.csv.meta').exists())

        run = LabRun.objects.get()
        self.assertEqual(run.subcommand, 'simulate')
        self.assertEqual(run.status, 'succeeded')
        self.assertEqual(run.exit_code, 0)
        self.assertEqual(run.outputs, [str(self.tmp / 'trajectory.csv')])
        self.assertEqual(run.parameters['config']['lambda'], 0.8)
        self.assertEqual(len(run.config_digest), 64)
        self.assertIsNotNone(run.duration_seconds)

    def test_cached_and_uncached_outputs_match(self):
        other = self.tmp / 'uncached'
        self.assertEqual(self.cli('simulate', '--n', '21', '--steps', '8', '--stride', '4'), 0)
        self.assertEqual(self.cli('simulate', '--n', '21', '--steps', '8', '--stride', '4', '--no-cache',
                                  output_dir=other), 0)
        self.assertEqual((self.tmp / 'trajectory.csv').read_bytes(), (other / 'trajectory.csv').read_bytes())

    def test_singular_system_exits_with_two(self):
        self.assertEqual(self.cli('simulate', *SINGULAR), 2)
        self.assertIn('step 1', self.stderr.getvalue())
        self.assertFalse((self.tmp / 'trajectory.csv').exists())
        run = LabRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.exit_code, 2)
        self.assertIn('step 1', run.error_message)

    def test_management_command(self):
        call_command('simulate', n_points=21, steps=4, stride=2, output_dir=self.tmp, stdout=io.StringIO())
        self.assertTrue((self.tmp / 'trajectory.csv').exists())
        with self.assertRaises(CommandError) as ctx:
            call_command('simulate', c_real=-1.0, c_imag=0.0, n_points=5, dt=0.0625, lam=1.0, steps=1,
                         output_dir=self.tmp, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)


@override_settings(LAMBDA_SOLITON_THREADS=2)
class ExperimentCommandTests(CliTestCase):

    SWEEP = ('sweep-velocity', '--n', '21', '--steps', '40', '--stride', '2',
             '--lambdas', '0.5', '1.0', '--c-list', '0.5i', '1i')

    def test_sweep_velocity_is_deterministic(self):
        first, second = self.tmp / 'first', self.tmp / 'second'
        self.assertEqual(self.cli(*self.SWEEP, output_dir=first), 0, self.stderr.getvalue())
        self.assertEqual(self.cli(*self.SWEEP, output_dir=second), 0, self.stderr.getvalue())
        rows = self.read_csv('velocity.csv', first)
        self.assertEqual(rows[0], ['c_re', 'c_im', 'lambda', 'velocity_abs', 'velocity_rel', 'n_tracks', 'formation_step'])
        self.assertEqual([(r[1], r[2]) for r in rows[1:]], [('0.5', '0.5'), ('0.5', '1.0'), ('1.0', '0.5'), ('1.0', '1.0')])
        self.assertEqual((first / 'velocity.csv').read_bytes(), (second / 'velocity.csv').read_bytes())
        self.assertEqual((first / 'velocity.svg').exists(), (second / 'velocity.svg').exists())
        if (first / 'velocity.svg').exists():
            self.assertEqual((first / 'velocity.svg').read_bytes(), (second / 'velocity.svg').read_bytes())
        self.assertEqual(LabRun.objects.filter(subcommand='sweep-velocity', status='succeeded').count(), 2)
        digests = set(LabRun.objects.values_list('config_digest', flat=True))
        self.assertEqual(len(digests), 1)

    def test_threshold_degenerate_bracket(self):
        self.assertEqual(self.cli('threshold', '--n', '21', '--steps', '20', '--bracket', '0.001', '0.001'), 1)
        self.assertIn('bracket', self.stderr.getvalue())
        self.assertEqual(LabRun.objects.get().exit_code, 1)

    def test_height_trace_without_structures(self):
        code = self.cli('height-trace', '--n', '21', '--steps', '20', '--stride', '2', '--level', '0',
                        '--c-list', '2.8i', '0.5i')
        self.assertEqual(code, 0, self.stderr.getvalue())
        self.assertEqual(self.read_csv('heights.csv'), [['c_re', 'c_im', 'step', 'height', 'event_kind']])
        self.assertFalse((self.tmp / 'heights.svg').exists())

    def test_gl_compare(self):
        code = self.cli('gl-compare', '--n', '21', '--steps', '10', '--stride', '5', '--gammas', '0.5', '1.0',
                        '--lambda', '2.0')
        self.assertEqual(code, 0, self.stderr.getvalue())
        compare = self.read_csv('gl_compare.csv')
        self.assertEqual(compare[0], ['gamma', 'step', 'l2', 'max_abs'])
        self.assertEqual(len(compare), 1 + 2 * 3)
        summary = self.read_csv('gl_summary.csv')
        self.assertEqual(summary[0], ['gamma', 'max_l2', 'mean_l2', 'max_abs', 'mean_abs'])
        self.assertEqual([r[0] for r in summary[1:]], ['0.5', '1.0'])
        self.assertLessEqual(float(summary[2][1]), 1e-12)
        self.assertTrue((self.tmp / 'gl_summary.csv.meta').exists())


class RunLedgerServiceTests(TestCase):

    def test_lifecycle(self):
        run = RunLedgerService.start('simulate', 'f' * 64, {'config': {}}, '/tmp/out')
        self.assertEqual(run.status, 'running')
        RunLedgerService.succeed(run, [Path('/tmp/out/trajectory.csv')])
        run.refresh_from_db()
        self.assertEqual(run.status, 'succeeded')
        self.assertEqual(run.outputs, ['/tmp/out/trajectory.csv'])
        self.assertEqual(RunLedgerService.recent('simulate'), [run])

    def test_missing_run_is_ignored(self):
        self.assertIsNone(RunLedgerService.succeed(None, []))
        self.assertIsNone(RunLedgerService.fail(None, 2, 'boom'))
