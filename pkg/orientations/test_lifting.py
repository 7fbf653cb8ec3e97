from __future__ import annotations

from django.test import SimpleTestCase

from .services.lifting import (
    LOOPS_DISCARD,
    LiftingClass,
    LiftingError,
    LiftingHypothesisError,
    TargetFunction,
    admissibility_monotone_check,
    classify,
    cut_identity_sides,
    dangerous_equivalence_check,
    enumerate_dangerous_sets,
    four_edge_structure_check,
    frank_matching,
    independent_set_bound_check,
    intersecting_dangerous_sets_check,
    is_admissible,
    lift_pair,
    lifting_census,
    lifting_graph,
    maximal_independent_sets,
    maximal_independent_sets_check,
    verify_cut_identity,
)
from .services.multigraph import Multigraph


def square_with_spokes() -> Multigraph:
    """s joined once to each of a, b, c, d; a-b and c-d doubled, plus a-c and b-d."""
    g = Multigraph(["s", "a", "b", "c", "d"])
    for v in "abcd":
        g.add_edge("s", v)
    for u, v in (("a", "b"), ("a", "b"), ("c", "d"), ("c", "d"), ("a", "c"), ("b", "d")):
        g.add_edge(u, v)
    return g


class TargetFunctionTests(SimpleTestCase):
    def test_level_above_connectivity_is_rejected(self):
        g = square_with_spokes()
        tau = TargetFunction.for_graph(g, "abcd", 4)
        self.assertEqual(tau.value("a", "b"), 4)
        self.assertEqual(tau.value("a", "s"), 0)
        self.assertEqual(tau.value("a", "a"), 0)
        with self.assertRaises(LiftingError):
            TargetFunction.for_graph(g, "abcd", 5)
        with self.assertRaises(LiftingError):
            TargetFunction.for_graph(g, ["z"], 1)

    def test_separates(self):
        tau = TargetFunction(frozenset("abcd"), 4)
        self.assertTrue(tau.separates({"a", "s"}))
        self.assertFalse(tau.separates({"s"}))
        self.assertFalse(tau.separates("abcd"))

    def test_hypotheses_are_checked(self):
        g = square_with_spokes()
        tau = TargetFunction(frozenset("abcds"), 4)
        with self.assertRaises(LiftingHypothesisError) as ctx:
            lifting_graph(g, tau, "s")
        self.assertIn("target set", str(ctx.exception))


class LiftingGraphTests(SimpleTestCase):
    def setUp(self):
        self.g = square_with_spokes()
        self.tau = TargetFunction.for_graph(self.g, "abcd", 4)
        self.lg = lifting_graph(self.g, self.tau, "s")

    def test_spokes_into_a_doubled_side_are_not_admissible(self):
        self.assertEqual(self.lg.nodes, (0, 1, 2, 3))
        self.assertEqual(self.lg.pairs(), [(0, 2), (0, 3), (1, 2), (1, 3)])
        self.assertFalse(is_admissible(self.g, self.tau, "s", 0, 1))
        self.assertEqual(self.lg.ends[2], "c")

    def test_classified_as_complete_bipartite(self):
        shape = classify(self.lg)
        self.assertEqual(shape.kind, LiftingClass.COMPLETE_MULTIPARTITE)
        self.assertEqual(shape.parts, ((0, 1), (2, 3)))

    def test_frank_matching_covers_every_spoke(self):
        pairs = frank_matching(self.lg, self.g)
        self.assertEqual(len(pairs), 2)
        covered = sorted(e for pair in pairs for e in pair)
        self.assertEqual(covered, [0, 1, 2, 3])
        for e, f in pairs:
            self.assertTrue(self.lg.adjacent(e, f))

    def test_frank_matching_refuses_degree_three(self):
        g = Multigraph(["s", "a", "b", "c"])
        for v in "abc":
            g.add_edge("s", v)
        for u, v in (("a", "b"), ("b", "c"), ("c", "a")):
            g.add_edge(u, v)
        tau = TargetFunction.for_graph(g, "abc", 3)
        with self.assertRaises(LiftingError):
            frank_matching(lifting_graph(g, tau, "s"))

    def test_dangerous_sets(self):
        dangerous = enumerate_dangerous_sets(self.g, self.tau, "s")
        self.assertEqual(
            [sorted(d.D) for d in dangerous],
            [["a"], ["b"], ["c"], ["d"], ["a", "b"], ["c", "d"]],
        )
        self.assertTrue(all(d.boundary_size == 4 for d in dangerous))
        with self.assertRaises(LiftingError):
            enumerate_dangerous_sets(self.g, self.tau, "s", max_vertices=3)

    def test_structure_checks_pass(self):
        dangerous = enumerate_dangerous_sets(self.g, self.tau, "s")
        shape = classify(self.lg)
        self.assertTrue(dangerous_equivalence_check(self.lg, dangerous))
        self.assertTrue(intersecting_dangerous_sets_check(self.lg, self.tau, dangerous, self.g.vertices))
        self.assertTrue(four_edge_structure_check(self.lg, 4))
        self.assertTrue(independent_set_bound_check(self.lg))
        self.assertTrue(maximal_independent_sets_check(self.lg, 4))
        self.assertTrue(admissibility_monotone_check(self.g, self.tau, "s"))
        self.assertEqual(shape.as_dict()["parts"], [[0, 1], [2, 3]])

    def test_maximal_independent_sets_are_the_parts(self):
        self.assertEqual(maximal_independent_sets(self.lg), [frozenset({0, 1}), frozenset({2, 3})])

    def test_census_payload(self):
        census = lifting_census(self.g, self.tau, "s")
        self.assertEqual(census["class"]["kind"], LiftingClass.COMPLETE_MULTIPARTITE)
        self.assertEqual(len(census["frank_matching"]), 2)
        self.assertEqual(len(census["dangerous_sets"]), 6)
        self.assertNotIn("dangerous_sets", lifting_census(self.g, self.tau, "s", with_dangerous=False))


class LiftPairTests(SimpleTestCase):
    def test_new_edge_id_is_reported(self):
        g = square_with_spokes()
        lifted, new_edge = lift_pair(g, "s", 0, 2)
        self.assertEqual(new_edge, g.next_edge_id)
        self.assertEqual(lifted.endpoints(new_edge), ("a", "c"))
        self.assertEqual(lifted.degree("s"), 2)

    def test_discarded_loop_has_no_edge(self):
        g = Multigraph(["s", "x", "y"], {0: ("s", "x"), 1: ("s", "x"), 2: ("x", "y")})
        lifted, new_edge = lift_pair(g, "s", 0, 1, loops=LOOPS_DISCARD)
        self.assertIsNone(new_edge)
        self.assertEqual(lifted.number_of_edges(), 1)

    def test_edge_away_from_s(self):
        with self.assertRaises(LiftingError):
            lift_pair(square_with_spokes(), "s", 0, 4)


class CutIdentityTests(SimpleTestCase):
    def test_identity_holds_on_crossing_sides(self):
        g = square_with_spokes()
        for first, second in ((("a", "b"), ("b", "c")), (("a", "s"), ("s", "d")), (("a",), ("a", "b", "c"))):
            left, right = cut_identity_sides(g, first, second)
            self.assertEqual(left, right)
            self.assertTrue(verify_cut_identity(g, first, second))
