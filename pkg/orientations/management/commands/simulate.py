from __future__ import annotations

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

import dot_theme

from orientations.services.generators import UnknownGeneratorError, get_generator
from orientations.services.graph_io import dumps, to_dot, write_dot, write_json
from orientations.services.infinite import (
    DecompositionError,
    ExhaustionState,
    ImmersionError,
    InvariantViolation,
    run_simulation,
)
from orientations.services.orientation import ConnectivityPreconditionError


class Command(BaseCommand):
    help = "Grow a k-arc-connected exhaustion of an infinite generator graph, one certified stage per round."

    def add_arguments(self, parser):
        parser.add_argument("generator")
        parser.add_argument("--k", type=int, default=2)
        parser.add_argument("--rounds", type=int, default=3)
        parser.add_argument("--depth-cap", type=int, default=None)
        parser.add_argument("--json", dest="json_path")
        parser.add_argument("--dot", dest="dot_dir", help="Directory for one Graphviz file per stage.")

    def handle(self, *args, **options):
        try:
            g = get_generator(options["generator"])
        except UnknownGeneratorError as exc:
            raise CommandError(f"Unknown generator {exc}.", returncode=1) from exc
        k = int(options["k"])
        rounds = int(options["rounds"])
        if k < 1:
            raise CommandError(f"--k must be positive, got {k}.", returncode=1)
        if not 0 <= rounds <= settings.MAX_ROUNDS:
            raise CommandError(f"--rounds must be between 0 and {settings.MAX_ROUNDS}.", returncode=1)
        try:
            report = run_simulation(g, k, rounds, depth_cap=options["depth_cap"])
        except ConnectivityPreconditionError as exc:
            self.stderr.write(dumps({"cut": exc.cut.as_dict(), "k": k}))
            raise CommandError(str(exc), returncode=2) from exc
        except InvariantViolation as exc:
            self.stderr.write(dumps(exc.state))
            raise CommandError(f"Stage invariant violated: {exc}", returncode=3) from exc
        except (DecompositionError, ImmersionError) as exc:
            raise CommandError(str(exc), returncode=3) from exc

        payload = {"schema": 1, "command": "simulate", **report.as_dict()}
        if options["json_path"]:
            write_json(options["json_path"], payload)
        else:
            self.stdout.write(dumps(payload), ending="")
        if options["dot_dir"]:
            previous = report.initial
            self._write_stage(Path(options["dot_dir"]), report.initial, None)
            for stage in report.stages:
                self._write_stage(Path(options["dot_dir"]), stage, previous)
                previous = stage
        if options["json_path"]:
            self.stdout.write(
                self.style.SUCCESS(f"generator={g.name} k={k} stages={len(report.stages)} -> {options['json_path']}")
            )

    def _write_stage(self, directory: Path, stage: ExhaustionState, previous: ExhaustionState | None) -> None:
        vertex_roles = {v: dot_theme.CORE for v in stage.A}
        vertex_roles.update({x: dot_theme.EXCEPTIONAL for x in stage.X})
        old = set(previous.W.edges) if previous is not None else set()
        edge_roles = {e: dot_theme.NEW_ARC for e in stage.W.edges if e not in old}
        text = to_dot(
            stage.W,
            stage.orientation,
            name=f"stage_{stage.n}",
            vertex_roles=vertex_roles,
            edge_roles=edge_roles,
            legend=[dot_theme.CORE, dot_theme.EXCEPTIONAL, dot_theme.ARC, dot_theme.NEW_ARC],
        )
        write_dot(directory / f"stage_{stage.n:02d}.dot", text)
