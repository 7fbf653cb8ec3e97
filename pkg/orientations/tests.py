from __future__ import annotations

import json

from django.test import SimpleTestCase

import dot_theme

from .services.connectivity import (
    all_pairs_edge_connectivity,
    arc_connectivity,
    bridges,
    edge_connectivity,
    is_k_arc_connected,
    is_k_edge_connected,
    lambda_star,
    local_edge_connectivity,
    min_cut_separating,
    pack_paths,
    violating_cut,
)
from .services.generators import UnknownGeneratorError, figure1, get_generator, grid, ladder
from .services.graph_io import (
    GraphFormatError,
    digest,
    dumps,
    graph_document,
    graph_from_dict,
    graph_to_dict,
    parse_vertex,
    to_dot,
)
from .services.multigraph import (
    GraphError,
    LoopError,
    Multigraph,
    Orientation,
    UnknownVertexError,
    boundary,
    contract,
    crossing,
    lift,
)


def cycle(n: int, copies: int = 1) -> Multigraph:
    g = Multigraph(range(n))
    for i in range(n):
        for _ in range(copies):
            g.add_edge(i, (i + 1) % n)
    return g


def directed_cycle(n: int) -> Orientation:
    g = cycle(n)
    return Orientation(g, {edge_id: g.endpoints(edge_id) for edge_id in g.edges})


class MultigraphTests(SimpleTestCase):
    def test_parallel_edges_get_distinct_ids(self):
        g = Multigraph(["a", "b"])
        first = g.add_edge("a", "b")
        second = g.add_edge("a", "b")
        self.assertNotEqual(first, second)
        self.assertEqual(g.degree("a"), 2)
        self.assertEqual(g.edges_between("a", "b"), [first, second])

    def test_loops_and_unknown_vertices_are_rejected(self):
        g = Multigraph(["a", "b"])
        with self.assertRaises(LoopError):
            g.add_edge("a", "a")
        with self.assertRaises(UnknownVertexError):
            g.add_edge("a", "z")

    def test_triangle_plus_parallel_edge_degree(self):
        g = Multigraph("abc", {0: ("a", "b"), 1: ("b", "c"), 2: ("c", "a")})
        g.add_edge("a", "b")
        self.assertEqual(g.degree("a"), 3)

    def test_edge_ids_are_never_reused(self):
        g = cycle(3)
        g.remove_edge(2)
        self.assertEqual(g.add_edge(0, 2), 3)

    def test_lift_path_leaves_s_isolated(self):
        g = Multigraph(["x", "s", "y"], {0: ("x", "s"), 1: ("s", "y")})
        lifted = lift(g, "s", 0, 1)
        self.assertEqual(lifted.degree("s"), 0)
        self.assertEqual(dict(lifted.edges), {2: ("x", "y")})
        self.assertEqual(g.number_of_edges(), 2)

    def test_lift_on_star_keeps_other_degrees(self):
        g = Multigraph(["s", "a", "b", "c", "d"])
        ids = [g.add_edge("s", v) for v in "abcd"]
        lifted = lift(g, "s", ids[0], ids[1])
        self.assertEqual(lifted.degree("s"), 2)
        self.assertEqual(lifted.edges_between("a", "b"), [4])
        for v in "abcd":
            self.assertEqual(lifted.degree(v), 1)

    def test_lift_on_four_cycle_preserves_connectivity(self):
        g = Multigraph(["a", "s", "b", "c"])
        sa = g.add_edge("a", "s")
        sb = g.add_edge("s", "b")
        g.add_edge("b", "c")
        g.add_edge("c", "a")
        lifted = lift(g, "s", sa, sb)
        self.assertEqual(local_edge_connectivity(lifted, "a", "c"), 2)

    def test_lift_with_shared_end(self):
        g = Multigraph(["s", "x"], {0: ("s", "x"), 1: ("s", "x")})
        with self.assertRaises(LoopError):
            lift(g, "s", 0, 1)
        discarded = lift(g, "s", 0, 1, discard_loop=True)
        self.assertEqual(discarded.number_of_edges(), 0)

    def test_lift_rejects_edge_away_from_s(self):
        g = Multigraph(["s", "a", "b"], {0: ("s", "a"), 1: ("a", "b")})
        with self.assertRaises(GraphError):
            lift(g, "s", 0, 1)

    def test_contract_triangle_keeps_parallel_edges(self):
        g = Multigraph("abc", {0: ("a", "b"), 1: ("b", "c"), 2: ("c", "a")})
        contracted, v = contract(g, {"a", "b"})
        self.assertEqual(sorted(contracted.edges), [1, 2])
        self.assertEqual(contracted.degree(v), 2)
        self.assertEqual(contracted.edges_between(v, "c"), [1, 2])

    def test_contract_everything(self):
        contracted, v = contract(cycle(4), range(4))
        self.assertEqual(contracted.vertices, frozenset({v}))
        self.assertEqual(contracted.number_of_edges(), 0)

    def test_contract_middle_row_of_grid(self):
        g = Multigraph((r, c) for r in range(3) for c in range(3))
        for r in range(3):
            for c in range(3):
                if c < 2:
                    g.add_edge((r, c), (r, c + 1))
                if r < 2:
                    g.add_edge((r, c), (r + 1, c))
        contracted, v = contract(g, {(1, 0), (1, 1), (1, 2)})
        self.assertEqual(contracted.number_of_edges(), 12 - 2)
        self.assertEqual(contracted.degree(v), 6)
        outside = {(0, 0), (0, 1)}
        self.assertEqual(len(boundary(contracted, outside)), len(boundary(g, outside)))

    def test_contract_empty_block(self):
        with self.assertRaises(GraphError):
            contract(cycle(3), set())

    def test_boundary(self):
        g = cycle(4)
        self.assertEqual(len(boundary(g, {0})), 2)
        self.assertEqual(boundary(g, set()), frozenset())
        self.assertEqual(boundary(g, {0, 1}), boundary(g, {2, 3}))
        self.assertEqual(crossing(g, {0}, {1, 3}), frozenset({0, 3}))

    def test_boundary_around_both_figure1_roots(self):
        trunc = figure1().truncate(3)
        roots = {((), 0), ((), 1)}
        self.assertEqual(len(boundary(trunc.graph, roots)), 4)

    def test_orientation_rejects_foreign_arc(self):
        g = cycle(3)
        orientation = Orientation(g)
        with self.assertRaises(GraphError):
            orientation.assign(0, 0, 2)
        orientation.orient_from(0, 1)
        self.assertEqual(orientation.assignment[0], (1, 0))
        self.assertFalse(orientation.is_total())
        self.assertEqual(orientation.imbalances()[1], 1)


class ConnectivityTests(SimpleTestCase):
    def test_cycle_certificate(self):
        certificate = edge_connectivity(cycle(4), 0, 2)
        self.assertEqual(certificate.value, 2)
        self.assertEqual(len(certificate.paths), 2)
        used = [e for path in certificate.paths for e in path.edges]
        self.assertEqual(len(used), len(set(used)))
        self.assertEqual(certificate.min_cut.size, 2)

    def test_lambda_star_is_even_floor(self):
        g = Multigraph(range(3), {0: (0, 1), 1: (1, 2), 2: (2, 0), 3: (0, 1)})
        self.assertEqual(local_edge_connectivity(g, 0, 1), 3)
        self.assertEqual(lambda_star(g, 0, 1), 2)

    def test_directed_cycle_arc_connectivity(self):
        d = directed_cycle(4)
        self.assertEqual(arc_connectivity(d, 0, 3), 1)
        self.assertTrue(is_k_arc_connected(d, 1))
        self.assertFalse(is_k_arc_connected(d, 2))

    def test_path_has_violating_cut_and_bridges(self):
        g = Multigraph(range(3), {0: (0, 1), 1: (1, 2)})
        cut = violating_cut(g, 2)
        self.assertIsNotNone(cut)
        self.assertEqual(cut.size, 1)
        self.assertEqual(bridges(g), frozenset({0, 1}))
        self.assertFalse(is_k_edge_connected(g, 2))

    def test_parallel_edges_are_not_bridges(self):
        self.assertEqual(bridges(cycle(2, copies=1)), frozenset())
        self.assertEqual(bridges(cycle(4)), frozenset())

    def test_doubled_cycle_is_four_edge_connected(self):
        g = cycle(4, copies=2)
        self.assertTrue(is_k_edge_connected(g, 4))
        self.assertIsNone(violating_cut(g, 4))

    def test_all_pairs_matches_pairwise_flows(self):
        g = cycle(5)
        g.add_edge(0, 2)
        g.add_vertex("alone")
        table = all_pairs_edge_connectivity(g)
        for x in range(5):
            for y in range(5):
                if x != y:
                    self.assertEqual(table[(x, y)], local_edge_connectivity(g, x, y))
        self.assertEqual(table[(0, "alone")], 0)

    def test_min_cut_separating_prefers_small_source_side(self):
        g = Multigraph(range(4), {0: (0, 1), 1: (1, 2), 2: (2, 3)})
        self.assertEqual(min_cut_separating(g, {0}, {3}).side, frozenset({0}))
        self.assertEqual(min_cut_separating(g, {0}, {3}, minimal="sink").side, frozenset({0, 1, 2}))

    def test_pack_paths_respects_source_capacity(self):
        g = cycle(4, copies=2)
        self.assertEqual(len(pack_paths(g, {0: 3}, {2})), 3)
        self.assertEqual(len(pack_paths(g, {0: None}, {2})), 4)
        self.assertEqual(len(pack_paths(g, {0: 2}, {2}, edge_ids=[0, 1, 2, 3])), 2)


class GraphIoTests(SimpleTestCase):
    def test_tuple_vertices_read_back_as_tuples(self):
        g = Multigraph([(0, 1), ("a", (2,))])
        g.add_edge((0, 1), ("a", (2,)))
        data = json.loads(dumps(graph_to_dict(g)))
        parsed, orientation = graph_from_dict(data)
        self.assertIsNone(orientation)
        self.assertEqual(parsed.vertices, g.vertices)
        self.assertEqual(dict(parsed.edges), dict(g.edges))

    def test_directed_edges_become_orientation(self):
        d = directed_cycle(3)
        data = graph_to_dict(d.base, d)
        self.assertEqual(data["edges"], [])
        parsed, orientation = graph_from_dict(data)
        self.assertTrue(orientation.is_total())
        self.assertEqual(dict(orientation.assignment), dict(d.assignment))

    def test_format_errors(self):
        with self.assertRaises(GraphFormatError):
            graph_from_dict({"schema": 2, "vertices": []})
        with self.assertRaises(GraphFormatError):
            graph_from_dict({"edges": []})
        with self.assertRaises(GraphFormatError):
            graph_from_dict({"vertices": [1], "edges": [{"id": 0, "u": 1, "v": 1}]})
        with self.assertRaises(GraphFormatError):
            graph_from_dict({"vertices": [1, 2], "edges": [{"id": 0, "u": 1, "v": 2}, {"id": 0, "u": 2, "v": 1}]})
        with self.assertRaises(GraphFormatError):
            graph_from_dict({"vertices": [1, 2], "edges": [{"u": 1, "v": 2}]})

    def test_dumps_and_digest_are_canonical(self):
        first = {"b": 1, "a": [1, 2]}
        second = {"a": [1, 2], "b": 1}
        self.assertEqual(dumps(first), dumps(second))
        self.assertEqual(digest(first), digest(second))
        self.assertTrue(dumps(first).endswith("\n"))

    def test_graph_document_unwraps_witnesses(self):
        inner = graph_to_dict(cycle(3))
        self.assertIs(graph_document({"witness": {"result": inner}}), inner)
        self.assertIs(graph_document({"instance": {"graph": inner}}), inner)
        self.assertIs(graph_document(inner), inner)

    def test_parse_vertex(self):
        self.assertEqual(parse_vertex("3"), 3)
        self.assertEqual(parse_vertex("s"), "s")
        self.assertEqual(parse_vertex("[[], 0]"), ((), 0))

    def test_dot_output(self):
        d = directed_cycle(3)
        text = to_dot(d.base, d, edge_roles={0: dot_theme.NEW_ARC}, legend=[dot_theme.NEW_ARC])
        self.assertTrue(text.startswith('digraph "arcorient"'))
        self.assertEqual(text.count("->"), 3)
        self.assertIn(dot_theme.NEW_ARC_COLOR, text)
        self.assertIn("legend", text)
        self.assertIn("--", to_dot(cycle(3)))


class GeneratorTests(SimpleTestCase):
    def test_truncation_sizes(self):
        self.assertEqual(figure1().truncate(2).graph.number_of_vertices(), 14)
        self.assertEqual(ladder().truncate(3).graph.number_of_vertices(), 8)
        g = grid(2).truncate(1).graph
        self.assertEqual(g.number_of_vertices(), 5)
        self.assertEqual(g.number_of_edges(), 8)

    def test_edge_ids_are_stable_across_depths(self):
        g = get_generator("double-ray")
        small = g.truncate(1).graph
        large = g.truncate(3).graph
        for edge_id, ends in small.edges.items():
            self.assertEqual(large.endpoints(edge_id), ends)
        self.assertEqual(large.number_of_vertices(), 7)
        self.assertEqual(large.number_of_edges(), 6)

    def test_vertex_enumeration_order(self):
        g = grid()
        self.assertEqual(g.vertex_at(0), (0, 0))
        self.assertEqual(g.vertex_at(1), (-1, 0))
        self.assertEqual(g.vertex_at(4), (1, 0))

    def test_registered_names_and_connectivity(self):
        self.assertEqual(get_generator("doubled-ladder").edge_connectivity, 4)
        self.assertEqual(get_generator("quadrupled-double-ray").edge_connectivity, 4)
        self.assertEqual(get_generator("doubled-figure1").name, "doubled-figure1")
        with self.assertRaises(UnknownGeneratorError):
            get_generator("torus")

    def test_figure1_ends_and_regions(self):
        g = figure1()
        self.assertEqual(len(g.oracle.ends(2)), 4)
        self.assertEqual(g.region((1, 0), 3), frozenset({((1, 0, 0), 0), ((1, 0, 0), 1)}))
        self.assertEqual(g.label(((0, 1), 1)), "01.1")
