from __future__ import annotations

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from orientations.models import RunReport
from orientations.services.corpus import UnknownSuiteError, replay_instance, suite_bounds
from orientations.services.graph_io import dumps, write_json
from orientations.services.runs import (
    create_corpus_run,
    process_corpus_run,
    report_payload,
)


class Command(BaseCommand):
    help = "Run a seeded property suite over a generated corpus of small instances."

    def add_arguments(self, parser):
        parser.add_argument("suite")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--count", type=int, default=None, help="Number of instances to draw.")
        parser.add_argument("--max-n", type=int, default=None)
        parser.add_argument("--max-m", type=int, default=None)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--json", dest="json_path")
        parser.add_argument("--replay", type=int, default=None, help="Re-evaluate a single instance by index.")

    def handle(self, *args, **options):
        seed = settings.DEFAULT_SEED if options["seed"] is None else options["seed"]
        try:
            bounds = suite_bounds(
                options["suite"],
                count=options["count"],
                max_n=options["max_n"],
                max_m=options["max_m"],
            )
        except (UnknownSuiteError, ValueError) as exc:
            raise CommandError(str(exc), returncode=1) from exc

        if options["replay"] is not None:
            outcome = replay_instance(options["suite"], seed, options["replay"], bounds)
            payload = {
                "index": outcome.index,
                "instance": outcome.digest,
                "checks": [check.as_dict() for check in outcome.checks],
            }
            self.stdout.write(dumps(payload), ending="")
            if any(not check.passed for check in outcome.checks):
                raise CommandError("Replayed instance fails.", returncode=3)
            return

        run = create_corpus_run(
            suite=options["suite"],
            seed=seed,
            count=bounds.count,
            max_n=bounds.max_n,
            max_m=bounds.max_m,
        )
        run = process_corpus_run(run.pk, workers=options["workers"])

        if run.status == RunReport.STATUS_FAILED:
            raise CommandError(f"Corpus run #{run.pk} failed: {run.error_message}", returncode=1)
        if options["json_path"]:
            write_json(options["json_path"], report_payload(run))
        line = (
            f"suite={run.suite} seed={run.seed} instances={run.instances} skipped={run.skipped} "
            f"passed={run.passed_checks} failed={run.failed_checks}"
        )
        if run.failed_checks:
            self.stdout.write(self.style.ERROR(line))
            raise CommandError(f"{run.failed_checks} checks failed; see run #{run.pk}.", returncode=3)
        self.stdout.write(self.style.SUCCESS(line))
