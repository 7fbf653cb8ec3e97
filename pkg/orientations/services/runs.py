from __future__ import annotations

import logging
import time
from collections import Counter
from typing import Any

from django.conf import settings
from django.utils import timezone

from orientations.models import RunReport
from orientations.services.corpus import REPORT_SCHEMA, run_suite, suite_bounds
from orientations.services.graph_io import digest

logger = logging.getLogger(__name__)


def create_corpus_run(
    *,
    suite: str,
    seed: int | None = None,
    count: int | None = None,
    max_n: int | None = None,
    max_m: int | None = None,
) -> RunReport:
    bounds = suite_bounds(suite, count=count, max_n=max_n, max_m=max_m)
    seed = settings.DEFAULT_SEED if seed is None else seed
    return RunReport.objects.create(
        command="corpus",
        suite=suite,
        seed=seed,
        parameters=bounds.as_dict(),
        inputs_digest=digest({"suite": suite, "seed": seed, "bounds": bounds.as_dict()}),
    )


def process_corpus_run(run_id: int, *, workers: int | None = None) -> RunReport:
    run = RunReport.objects.get(pk=run_id)
    if run.status not in {RunReport.STATUS_QUEUED, RunReport.STATUS_FAILED}:
        return run
    run.status = RunReport.STATUS_RUNNING
    run.started_at = timezone.now()
    run.error_message = ""
    run.save(update_fields=["status", "started_at", "error_message", "updated_at"])

    params = run.parameters or {}
    started = time.perf_counter()
    try:
        report = run_suite(
            run.suite,
            seed=run.seed,
            count=params.get("count"),
            max_n=params.get("max_n"),
            max_m=params.get("max_m"),
            workers=workers,
        )
    except Exception as exc:
        logger.exception("corpus run #%s (%s) failed", run_id, run.suite)
        run = RunReport.objects.get(pk=run_id)
        run.status = RunReport.STATUS_FAILED
        run.error_message = str(exc)
        run.finished_at = timezone.now()
        run.save(update_fields=["status", "error_message", "finished_at", "updated_at"])
        return run

    run = RunReport.objects.get(pk=run_id)
    run.status = RunReport.STATUS_SUCCEEDED
    run.instances = report.instances
    run.skipped = report.skipped
    run.failed_checks = len(report.failures)
    run.passed_checks = len(report.checks) - run.failed_checks
    run.checks = [check.as_dict() for check in report.checks]
    run.timings = {"seconds": round(time.perf_counter() - started, 3)}
    run.finished_at = timezone.now()
    run.save(
        update_fields=[
            "status",
            "instances",
            "skipped",
            "passed_checks",
            "failed_checks",
            "checks",
            "timings",
            "finished_at",
            "updated_at",
        ]
    )
    return run


def report_payload(run: RunReport) -> dict[str, Any]:
    """The --json document for a finished run; no timings, so reruns are byte-identical."""
    totals: dict[str, Counter] = {}
    for check in run.checks:
        totals.setdefault(check["check"], Counter())["passed" if check["passed"] else "failed"] += 1
    return {
        "schema": REPORT_SCHEMA,
        "command": run.command,
        "suite": run.suite,
        "seed": run.seed,
        "parameters": run.parameters,
        "inputs_digest": run.inputs_digest,
        "instances": run.instances,
        "skipped": run.skipped,
        "passed": run.failed_checks == 0,
        "summary": {
            name: {"passed": counts["passed"], "failed": counts["failed"]}
            for name, counts in sorted(totals.items())
        },
        "checks": run.checks,
    }

