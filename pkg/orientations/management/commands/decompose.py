from __future__ import annotations

from django.core.management.base import BaseCommand, CommandError

import dot_theme

from orientations.services.generators import UnknownGeneratorError, get_generator
from orientations.services.graph_io import dumps, parse_vertex, to_dot, write_dot, write_json
from orientations.services.infinite import DecompositionError, decompose, figure1_fixed_set_check, ray_graph


class Command(BaseCommand):
    help = "Split an infinite generator graph around a finite vertex set into boundary-linked components."

    def add_arguments(self, parser):
        parser.add_argument("generator", nargs="?", default="figure1")
        parser.add_argument("--A", dest="A", nargs="*", default=None, help="Vertex ids as JSON; defaults to the root.")
        parser.add_argument("--depth", type=int, default=None)
        parser.add_argument("--depth-cap", type=int, default=None)
        parser.add_argument("--json", dest="json_path")
        parser.add_argument("--dot", dest="dot_path")
        parser.add_argument("--ray-graphs", action="store_true", help="Add the ray graph of every component.")
        parser.add_argument(
            "--figure1-check",
            action="store_true",
            help="Check that no small fixed set near the roots decomposes the Figure-1 graph.",
        )
        parser.add_argument("--max-level", type=int, default=2)
        parser.add_argument("--sizes", type=int, nargs="*", default=[2, 3])

    def handle(self, *args, **options):
        if options["figure1_check"]:
            self._figure1_check(options)
            return
        try:
            g = get_generator(options["generator"])
        except UnknownGeneratorError as exc:
            raise CommandError(f"Unknown generator {exc}.", returncode=1) from exc
        A = [g.root] if not options["A"] else [parse_vertex(token) for token in options["A"]]
        try:
            decomposition = decompose(g, A, depth=options["depth"], depth_cap=options["depth_cap"])
            ray_graphs = [ray_graph(component) for component in decomposition.components] if options["ray_graphs"] else None
        except DecompositionError as exc:
            raise CommandError(str(exc), returncode=3) from exc

        payload = {"schema": 1, "command": "decompose", "generator": g.name, **decomposition.as_dict()}
        if ray_graphs is not None:
            payload["ray_graphs"] = [
                {"end": component.end, "edges": [list(M.endpoints(e)) for e in sorted(M.edges)]}
                for component, M in zip(decomposition.components, ray_graphs)
            ]
        if options["json_path"]:
            write_json(options["json_path"], payload)
            self.stdout.write(
                self.style.SUCCESS(
                    f"generator={g.name} |A|={len(decomposition.A)} components={len(decomposition.components)}"
                )
            )
        else:
            self.stdout.write(dumps(payload), ending="")
        if options["dot_path"]:
            edge_roles = {
                edge_id: dot_theme.BOUNDARY
                for component in decomposition.components
                for edge_id in component.boundary
            }
            text = to_dot(
                decomposition.truncation.graph,
                name=f"{g.name}_decomposition",
                vertex_roles={v: dot_theme.CORE for v in decomposition.A},
                edge_roles=edge_roles,
                legend=[dot_theme.CORE, dot_theme.BOUNDARY],
            )
            write_dot(options["dot_path"], text)

    def _figure1_check(self, options) -> None:
        depth = options["depth"] or 4
        report = figure1_fixed_set_check(depth, max_level=options["max_level"], sizes=tuple(options["sizes"]))
        payload = {"schema": 1, "command": "decompose", "figure1_check": report.as_dict()}
        if options["json_path"]:
            write_json(options["json_path"], payload)
            self.stdout.write(f"checked={report.checked} failures={len(report.failures)}")
        else:
            self.stdout.write(dumps(payload), ending="")
        if not report.passed:
            raise CommandError("Some fixed set admits a boundary-linked decomposition.", returncode=3)
