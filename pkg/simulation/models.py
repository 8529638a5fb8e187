from django.db import models
from django.utils import timezone


class LabRun(models.Model):
    """One command-line invocation and where its outputs went"""
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('succeeded', 'Succeeded'),
        ('failed', 'Failed'),
    ]

    SUBCOMMAND_CHOICES = [
        ('simulate', 'Simulate'),
        ('sweep-velocity', 'Velocity sweep'),
        ('threshold', 'Formation threshold'),
        ('height-trace', 'Height trace'),
        ('gl-compare', 'GL comparison'),
    ]

    subcommand = models.CharField(max_length=20, choices=SUBCOMMAND_CHOICES)
    config_digest = models.CharField(max_length=64, db_index=True)
    parameters = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500)
    outputs = models.JSONField(default=list, blank=True, help_text="Files written by the run")

    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    exit_code = models.IntegerField(null=True, blank=True)
    error_message = models.TextField(blank=True)

    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        verbose_name = "Lab run"
        verbose_name_plural = "Lab runs"
        indexes = [
            models.Index(fields=['subcommand', '-started_at'], name='labrun_subcommand_idx'),
        ]

    def __str__(self):
        return f"{self.subcommand} {self.config_digest[:12]} ({self.status})"

    @property
    def duration_seconds(self):
        if not self.finished_at:
            return None
        return (self.finished_at - self.started_at).total_seconds()
