from __future__ import annotations

from django.core.management.base import BaseCommand, CommandError

import dot_theme

from orientations.services.graph_io import (
    GraphFormatError,
    dumps,
    load_graph,
    parse_vertex,
    to_dot,
    write_dot,
    write_json,
)
from orientations.services.lifting import (
    LOOPS_DISCARD,
    LOOPS_FORBID,
    LiftingError,
    LiftingHypothesisError,
    TargetFunction,
    lifting_census,
)
from orientations.services.multigraph import Multigraph


class Command(BaseCommand):
    help = "Build and classify the lifting graph at a vertex s for the target level on A."

    def add_arguments(self, parser):
        parser.add_argument("path", help="Graph JSON file.")
        parser.add_argument("--s", required=True, help="The vertex to lift at (JSON or plain string).")
        parser.add_argument("--level", type=int, required=True)
        parser.add_argument("--A", dest="A", nargs="*", default=None, help="Target set; defaults to every vertex but s.")
        parser.add_argument("--loops", choices=[LOOPS_FORBID, LOOPS_DISCARD], default=LOOPS_FORBID)
        parser.add_argument("--no-dangerous", action="store_true", help="Skip dangerous-set enumeration.")
        parser.add_argument("--json", dest="json_path")
        parser.add_argument("--dot", dest="dot_path")

    def handle(self, *args, **options):
        try:
            g, _ignored = load_graph(options["path"])
        except GraphFormatError as exc:
            raise CommandError(str(exc), returncode=1) from exc
        s = parse_vertex(options["s"])
        if s not in g:
            raise CommandError(f"{s!r} is not a vertex of the graph.", returncode=1)
        if options["A"] is None:
            A = g.vertices - {s}
        else:
            A = {parse_vertex(token) for token in options["A"]}

        try:
            tau = TargetFunction.for_graph(g, A, options["level"])
        except LiftingError as exc:
            raise CommandError(str(exc), returncode=2) from exc
        try:
            census = lifting_census(
                g, tau, s, with_dangerous=not options["no_dangerous"], loops=options["loops"]
            )
        except LiftingHypothesisError as exc:
            raise CommandError(str(exc), returncode=1) from exc
        nodes = census["lifting_graph"]["nodes"]
        ends = census["lifting_graph"]["ends"]
        payload = {"schema": 1, "command": "lifting_graph", "s": s, "level": tau.level, **census}

        if options["json_path"]:
            write_json(options["json_path"], payload)
            self.stdout.write(self.style.SUCCESS(f"class={census['class']['kind']} nodes={len(nodes)}"))
        else:
            self.stdout.write(dumps(payload), ending="")
        if options["dot_path"]:
            picture = Multigraph(nodes, labels={e: f"{e}:{ends[str(e)]}" for e in nodes})
            for e, f in census["lifting_graph"]["adjacency"]:
                picture.add_edge(e, f)
            write_dot(options["dot_path"], to_dot(picture, name="lifting_graph", legend=[dot_theme.VERTEX]))
