from __future__ import annotations

from django.db import models
from django.utils import timezone


class RunReport(models.Model):
    STATUS_QUEUED = "queued"
    STATUS_RUNNING = "running"
    STATUS_SUCCEEDED = "succeeded"
    STATUS_FAILED = "failed"
    STATUS_CHOICES = [
        (STATUS_QUEUED, "Queued"),
        (STATUS_RUNNING, "Running"),
        (STATUS_SUCCEEDED, "Succeeded"),
        (STATUS_FAILED, "Failed"),
    ]

    command = models.CharField(max_length=64, default="corpus")
    suite = models.CharField(max_length=64)
    seed = models.BigIntegerField()
    parameters = models.JSONField(default=dict, blank=True)
    inputs_digest = models.CharField(max_length=64, blank=True, db_index=True)
    status = models.CharField(max_length=32, choices=STATUS_CHOICES, default=STATUS_QUEUED)
    instances = models.IntegerField(default=0)
    skipped = models.IntegerField(default=0)
    passed_checks = models.IntegerField(default=0)
    failed_checks = models.IntegerField(default=0)
    checks = models.JSONField(default=list, blank=True)
    timings = models.JSONField(default=dict, blank=True)
    error_message = models.TextField(blank=True)
    created_at = models.DateTimeField(default=timezone.now)
    started_at = models.DateTimeField(blank=True, null=True)
    finished_at = models.DateTimeField(blank=True, null=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["status", "created_at"], name="orientation_status_5d1c2e_idx"),
            models.Index(fields=["suite", "seed"], name="orientation_suite_8a4f10_idx"),
        ]

    def __str__(self) -> str:
        return f"{self.suite} seed={self.seed} ({self.status})"

    @property
    def all_passed(self) -> bool:
        return self.status == self.STATUS_SUCCEEDED and self.failed_checks == 0
