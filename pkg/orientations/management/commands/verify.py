from __future__ import annotations

from django.core.management.base import BaseCommand, CommandError

from orientations.services.connectivity import arc_certificate, weakest_arc_pair
from orientations.services.graph_io import GraphFormatError, dumps, load_graph, write_json
from orientations.services.orientation import verify_well_balanced


class Command(BaseCommand):
    help = "Check an oriented graph (or a corpus failure witness) for well-balancedness and k-arc-connectivity."

    def add_arguments(self, parser):
        parser.add_argument("path", help="Graph JSON with directed_edges, or a witness containing one.")
        parser.add_argument("--k", type=int, default=None, help="Also require k arc-disjoint paths between all pairs.")
        parser.add_argument("--json", dest="json_path")

    def handle(self, *args, **options):
        try:
            g, orientation = load_graph(options["path"])
        except GraphFormatError as exc:
            raise CommandError(str(exc), returncode=1) from exc
        if orientation is None or not orientation.is_total():
            missing = g.number_of_edges() if orientation is None else len(orientation.unassigned())
            raise CommandError(f"Graph has {missing} unoriented edges; verify needs a total orientation.", returncode=1)

        report = verify_well_balanced(orientation)
        payload = {"schema": 1, "command": "verify", "well_balanced": report.as_dict()}
        passed = report.passed
        k = options["k"]
        if k is not None:
            weakest = weakest_arc_pair(orientation, k)
            payload["k_arc"] = {"k": k, "passed": weakest is None}
            if weakest is not None:
                x, y, value = weakest
                payload["k_arc"]["worst_pair"] = {"x": x, "y": y, "alpha": value}
                certificate = arc_certificate(orientation, x, y)
                payload["k_arc"]["certificate"] = {
                    **certificate.as_dict(),
                    "leaving": sorted(certificate.min_cut.crossing),
                }
                passed = False
        payload["passed"] = passed

        if options["json_path"]:
            write_json(options["json_path"], payload)
            self.stdout.write(f"verified pairs={report.checked_pairs} passed={passed}")
        else:
            self.stdout.write(dumps(payload), ending="")
        if not passed:
            raise CommandError("Verification failed.", returncode=3)
