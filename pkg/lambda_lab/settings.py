"""
Environment-driven settings. Everything configurable is read through decouple,
so values come from the process environment or a local .env file.
"""

from pathlib import Path

import dj_database_url
import psutil
from decouple import Csv, config
from django.core.exceptions import ImproperlyConfigured

from .settings_base import *  # noqa: F401,F403
from .settings_base import BASE_DIR, LOGGING


def _thread_count(raw):
    if raw in (None, ''):
        return psutil.cpu_count(logical=False) or 1
    try:
        threads = int(raw)
    except (TypeError, ValueError):
        raise ImproperlyConfigured(f"LAMBDA_SOLITON_THREADS must be an integer >= 1, got {raw!r}")
    if threads < 1:
        raise ImproperlyConfigured(f"LAMBDA_SOLITON_THREADS must be an integer >= 1, got {threads}")
    return threads


DEBUG = config('LAMBDA_LAB_DEBUG', default=False, cast=bool)

# No web surface is served; the key only satisfies Django's startup checks
SECRET_KEY = config('LAMBDA_LAB_SECRET_KEY', default='lambda-lab-development-key-not-secret')

ALLOWED_HOSTS = config('LAMBDA_LAB_ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())

DATABASES = {
    'default': dj_database_url.config(
        default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}",
        conn_max_age=0,
    )
}

LAMBDA_SOLITON_THREADS = _thread_count(config('LAMBDA_SOLITON_THREADS', default=''))

LAMBDA_LAB_OUTPUT_DIR = Path(config('LAMBDA_LAB_OUTPUT_DIR', default=str(BASE_DIR / 'output')))

LAMBDA_LAB_ACCEPTANCE = config('LAMBDA_LAB_ACCEPTANCE', default=False, cast=bool)

LOG_LEVEL = config('LAMBDA_LAB_LOG_LEVEL', default='INFO').upper()
LOG_FILE = Path(config('LAMBDA_LAB_LOG_FILE', default=str(BASE_DIR / 'logs' / 'lambda_lab.log')))
LOG_FILE.parent.mkdir(parents=True, exist_ok=True)

LOGGING['handlers']['file']['filename'] = LOG_FILE
LOGGING['root']['level'] = LOG_LEVEL
LOGGING['loggers']['simulation']['level'] = LOG_LEVEL
