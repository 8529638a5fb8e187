"""
Command-line entry point: `python -m lambda_lab <subcommand> [flags]`.

Each subcommand is the management command of the same name, so
`python manage.py sweep_velocity ...` and `python -m lambda_lab sweep-velocity ...`
behave the same. Exit codes: 0 success, 1 usage or configuration error,
2 numerical failure.
"""

import logging
import os
import sys

from django.core.exceptions import ImproperlyConfigured

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    'simulate': 'simulate',
    'sweep-velocity': 'sweep_velocity',
    'threshold': 'threshold',
    'height-trace': 'height_trace',
    'gl-compare': 'gl_compare',
}

USAGE = (
    "usage: lambda-lab <subcommand> [flags]\n"
    "\n"
    "subcommands:\n"
    "  simulate        run one simulation, write trajectory.csv\n"
    "  sweep-velocity  velocity against lambda per C, write velocity.csv/.svg\n"
    "  threshold       formation threshold of the initial gradient, write threshold.csv\n"
    "  height-trace    soliton height over time per C, write heights.csv/.svg\n"
    "  gl-compare      compare with fractional GL runs, write gl_compare.csv, gl_summary.csv\n"
    "\n"
    "run 'lambda-lab <subcommand> --help' for the flags of one subcommand\n"
)


def setup_django():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'lambda_lab.settings')
    from django.apps import apps
    if not apps.ready:
        import django
        django.setup()


def run_cli(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if not argv or argv[0] in ('-h', '--help'):
        (stdout if argv else stderr).write(USAGE)
        return 0 if argv else 1
    name = SUBCOMMANDS.get(argv[0])
    if name is None:
        stderr.write(f"lambda-lab: unknown subcommand {argv[0]!r}\n\n{USAGE}")
        return 1

    try:
        setup_django()
    except ImproperlyConfigured as e:
        stderr.write(f"lambda-lab: configuration error: {e}\n")
        return 1
    from django.core.management import load_command_class
    from django.core.management.base import CommandError

    command = load_command_class('simulation', name)
    parser = command.create_parser('lambda-lab', argv[0])
    try:
        options = vars(parser.parse_args(argv[1:]))
        args = options.pop('args', ())
        command.execute(*args, stdout=stdout, stderr=stderr, **options)
    except CommandError as e:
        if e.returncode == 1 and str(e).startswith('Error:'):
            stderr.write(parser.format_usage())
        stderr.write(f"lambda-lab {argv[0]}: {e}\n")
        logger.error(f"{argv[0]} failed with exit code {e.returncode}: {e}")
        return e.returncode
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    return 0
