from __future__ import annotations

from django.core.management.base import BaseCommand, CommandError

import dot_theme

from orientations.services.graph_io import (
    GraphFormatError,
    dumps,
    graph_to_dict,
    load_graph,
    to_dot,
    write_dot,
    write_json,
)
from orientations.services.orientation import (
    ConnectivityPreconditionError,
    OrientationError,
    k_arc_orientation,
    verify_well_balanced,
)


class Command(BaseCommand):
    help = "Orient a 2k-edge-connected multigraph so that it is k-arc-connected and well-balanced."

    def add_arguments(self, parser):
        parser.add_argument("path", help="Graph JSON file.")
        parser.add_argument("--k", type=int, default=1)
        parser.add_argument("--json", dest="json_path", help="Write the oriented graph here instead of stdout.")
        parser.add_argument("--dot", dest="dot_path", help="Also write a Graphviz file.")

    def handle(self, *args, **options):
        k = int(options["k"])
        try:
            g, _ignored = load_graph(options["path"])
        except GraphFormatError as exc:
            raise CommandError(str(exc), returncode=1) from exc

        try:
            orientation = k_arc_orientation(g, k)
        except ConnectivityPreconditionError as exc:
            self.stderr.write(dumps({"cut": exc.cut.as_dict(), "k": k}))
            if options["dot_path"]:
                write_dot(
                    options["dot_path"],
                    to_dot(
                        g,
                        vertex_roles={v: dot_theme.CUT_SIDE for v in exc.cut.side},
                        edge_roles={e: dot_theme.CUT for e in exc.cut.boundary},
                        legend=[dot_theme.CUT_SIDE, dot_theme.CUT],
                    ),
                )
            raise CommandError(str(exc), returncode=2) from exc
        except OrientationError as exc:
            raise CommandError(str(exc), returncode=3) from exc

        certificate = verify_well_balanced(orientation)
        payload = {
            "schema": 1,
            "command": "orient",
            "k": k,
            "graph": graph_to_dict(g, orientation),
            "well_balanced": certificate.as_dict(),
        }
        if options["json_path"]:
            write_json(options["json_path"], payload)
            self.stdout.write(self.style.SUCCESS(f"oriented edges={g.number_of_edges()} k={k} -> {options['json_path']}"))
        else:
            self.stdout.write(dumps(payload), ending="")
        if options["dot_path"]:
            write_dot(options["dot_path"], to_dot(g, orientation))
        if not certificate.passed:
            raise CommandError("Orientation is not well-balanced.", returncode=3)
