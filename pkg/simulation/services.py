"""
Run ledger service: records every command-line invocation in the database.
"""

import logging

from django.db import DatabaseError
from django.utils import timezone

from .models import LabRun

logger = logging.getLogger(__name__)


class RunLedgerService:
    """Service for the LabRun lifecycle; the ledger never decides a run's outcome"""

    @staticmethod
    def start(subcommand, config_digest, parameters, output_dir):
        """Open a ledger entry, or return None when the database is unavailable"""
        try:
            run = LabRun.objects.create(
                subcommand=subcommand,
                config_digest=config_digest,
                parameters=parameters,
                output_dir=str(output_dir),
            )
        except DatabaseError as e:
            logger.warning(f"Run ledger unavailable, {subcommand} not recorded: {e}")
            return None
        logger.info(f"Run started: {run}")
        return run

    @staticmethod
    def succeed(run, outputs):
        if run is None:
            return None
        run.status = 'succeeded'
        run.exit_code = 0
        run.outputs = [str(p) for p in outputs]
        run.finished_at = timezone.now()
        return RunLedgerService._save(run)

    @staticmethod
    def fail(run, exit_code, message):
        if run is None:
            return None
        run.status = 'failed'
        run.exit_code = exit_code
        run.error_message = message
        run.finished_at = timezone.now()
        return RunLedgerService._save(run)

    @staticmethod
    def _save(run):
        try:
            run.save()
        except DatabaseError as e:
            logger.warning(f"Could not update run ledger entry {run.pk}: {e}")
            return None
        logger.info(f"Run finished: {run} in {run.duration_seconds:.2f}s")
        return run

    @staticmethod
    def recent(subcommand=None, limit=20):
        runs = LabRun.objects.all()
        if subcommand:
            runs = runs.filter(subcommand=subcommand)
        return list(runs[:limit])
