"""
pytest wiring mirroring `manage.py test` with lambda_lab.test_runner.LabTestRunner:
Django is configured from lambda_lab.settings, test databases are created for the
session, and tests tagged 'acceptance' are skipped unless LAMBDA_LAB_ACCEPTANCE is set.
"""

import os

import django
import pytest

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'lambda_lab.settings')
django.setup()

from django.conf import settings  # noqa: E402
from django.test.utils import (  # noqa: E402
    setup_databases, setup_test_environment, teardown_databases, teardown_test_environment,
)

from lambda_lab.test_runner import ACCEPTANCE_TAG  # noqa: E402


@pytest.fixture(scope='session', autouse=True)
def _django_test_environment():
    setup_test_environment()
    old_config = setup_databases(verbosity=0, interactive=False)
    yield
    teardown_databases(old_config, verbosity=0)
    teardown_test_environment()


def pytest_collection_modifyitems(config, items):
    if getattr(settings, 'LAMBDA_LAB_ACCEPTANCE', False):
        return
    skip = pytest.mark.skip(reason=f"tagged '{ACCEPTANCE_TAG}'; set LAMBDA_LAB_ACCEPTANCE=True to run")
    for item in items:
        cls = getattr(item, 'cls', None)
        tags = set(getattr(cls, 'tags', ())) | set(getattr(getattr(item, 'obj', None), 'tags', ()))
        if ACCEPTANCE_TAG in tags:
            item.add_marker(skip)
