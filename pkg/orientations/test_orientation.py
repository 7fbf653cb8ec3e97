from __future__ import annotations

import numpy as np
from django.test import SimpleTestCase, override_settings

from .services.connectivity import is_k_arc_connected
from .services.multigraph import Multigraph, Orientation
from .services.orientation import (
    ConnectivityPreconditionError,
    OddVertexPairing,
    OrientationError,
    balanced_cut_violation,
    brute_force_k_arc_orientation,
    euler_trail,
    extend_to_well_balanced,
    find_odd_pairing,
    k_arc_orientation,
    orient_consistently,
    orientation_from_arcs,
    pairing_violation,
    random_trail_orientation,
    verify_well_balanced,
)


def cycle(n: int, copies: int = 1) -> Multigraph:
    g = Multigraph(range(n))
    for i in range(n):
        for _ in range(copies):
            g.add_edge(i, (i + 1) % n)
    return g


def complete(n: int) -> Multigraph:
    g = Multigraph(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            g.add_edge(i, j)
    return g


class EulerTrailTests(SimpleTestCase):
    def test_open_trail_on_path(self):
        g = Multigraph(range(3), {0: (0, 1), 1: (1, 2)})
        trail = euler_trail(g, g.edges)
        self.assertFalse(trail.is_closed)
        self.assertEqual(trail.endpoints, (0, 2))
        self.assertEqual(trail.edges, (0, 1))
        d = orient_consistently(trail)
        self.assertEqual(dict(d.assignment), {0: (0, 1), 1: (1, 2)})

    def test_closed_trail_on_cycle(self):
        g = cycle(4)
        trail = euler_trail(g, g.edges)
        self.assertTrue(trail.is_closed)
        self.assertEqual(trail.endpoints, (0, 0))
        d = orient_consistently(trail)
        self.assertFalse(any(d.imbalances().values()))

    def test_rejects_non_trails(self):
        star = Multigraph(range(4), {0: (0, 1), 1: (0, 2), 2: (0, 3)})
        with self.assertRaises(OrientationError):
            euler_trail(star, star.edges)
        two = Multigraph(range(4), {0: (0, 1), 1: (2, 3)})
        with self.assertRaises(OrientationError):
            euler_trail(two, two.edges)
        with self.assertRaises(OrientationError):
            euler_trail(two, [])


class PairingTests(SimpleTestCase):
    def test_even_graph_needs_no_pairing(self):
        self.assertEqual(len(find_odd_pairing(cycle(4))), 0)

    def test_complete_graph_pairing_respects_cuts(self):
        g = complete(4)
        pairing = find_odd_pairing(g)
        self.assertEqual(len(pairing), 2)
        self.assertIsNone(pairing_violation(g, pairing))

    def test_pairing_violation_reports_bad_partition(self):
        g = complete(4)
        self.assertEqual(
            pairing_violation(g, OddVertexPairing(((0, 1),))),
            {"reason": "pairs do not partition the odd vertices"},
        )

    def test_pairing_bound(self):
        with self.assertRaises(OrientationError):
            find_odd_pairing(complete(4), max_vertices=3)

    @override_settings(PAIRING_MAX_VERTICES=3)
    def test_pairing_bound_from_settings(self):
        with self.assertRaises(OrientationError):
            find_odd_pairing(complete(4))


class WellBalancedTests(SimpleTestCase):
    def test_complete_graph_extension_is_well_balanced(self):
        d = extend_to_well_balanced(complete(4))
        self.assertTrue(d.is_total())
        report = verify_well_balanced(d)
        self.assertTrue(report.passed)
        self.assertEqual(report.checked_pairs, 12)

    def test_eulerian_orientation_splits_every_cut(self):
        d = extend_to_well_balanced(cycle(6, copies=2))
        self.assertIsNone(balanced_cut_violation(d))
        lopsided = Orientation(cycle(3), {0: (0, 1), 1: (1, 2), 2: (0, 2)})
        self.assertEqual(balanced_cut_violation(lopsided), [0])

    def test_extension_keeps_directed_triangle(self):
        g = complete(4)
        h = Orientation(g, {0: (0, 1), 3: (1, 2), 1: (2, 0)})
        d = extend_to_well_balanced(g, h)
        self.assertTrue(d.extends(h))
        self.assertTrue(verify_well_balanced(d).passed)

    def test_inconsistent_partial_orientation(self):
        g = cycle(4)
        h = Orientation(g, {0: (0, 1), 1: (2, 1)})
        with self.assertRaises(OrientationError):
            extend_to_well_balanced(g, h)

    def test_two_paths_one_way_fail_verification(self):
        g = cycle(4)
        d = Orientation(g, {0: (0, 1), 1: (1, 2), 3: (0, 3), 2: (3, 2)})
        report = verify_well_balanced(d)
        self.assertFalse(report.passed)
        self.assertEqual(report.worst_alpha, 0)
        self.assertEqual(report.worst_lambda_star, 2)
        self.assertEqual(report.as_dict()["worst_pair"]["alpha"], 0)

    def test_partial_orientation_cannot_be_verified(self):
        with self.assertRaises(OrientationError):
            verify_well_balanced(Orientation(cycle(3)))


class KArcOrientationTests(SimpleTestCase):
    def test_cycle_becomes_directed_cycle(self):
        d = k_arc_orientation(cycle(4), 1)
        self.assertTrue(d.is_total())
        for v in range(4):
            self.assertEqual(d.out_degree(v), 1)
            self.assertEqual(d.in_degree(v), 1)
        self.assertTrue(is_k_arc_connected(d, 1))

    def test_doubled_cycle_is_two_arc_connected(self):
        d = k_arc_orientation(cycle(5, copies=2), 2)
        self.assertTrue(is_k_arc_connected(d, 2))

    def test_path_fails_precondition(self):
        g = Multigraph(range(3), {0: (0, 1), 1: (1, 2)})
        with self.assertRaises(ConnectivityPreconditionError) as ctx:
            k_arc_orientation(g, 1)
        self.assertEqual(ctx.exception.cut.size, 1)
        self.assertEqual(ctx.exception.k, 1)

    def test_negative_k(self):
        with self.assertRaises(OrientationError):
            k_arc_orientation(cycle(3), -1)

    def test_brute_force_agrees_on_small_graphs(self):
        self.assertIsNotNone(brute_force_k_arc_orientation(cycle(4), 1))
        self.assertIsNone(brute_force_k_arc_orientation(complete(4), 2))
        found = brute_force_k_arc_orientation(complete(4), 1)
        self.assertTrue(is_k_arc_connected(found, 1))
        with self.assertRaises(OrientationError):
            brute_force_k_arc_orientation(cycle(17), 1)


class RandomTrailTests(SimpleTestCase):
    def test_random_trail_is_a_consistent_trail(self):
        g = complete(5)
        for seed in range(10):
            h = random_trail_orientation(g, np.random.default_rng(seed))
            self.assertGreater(len(h.assignment), 0)
            unbalanced = sorted(value for value in h.imbalances().values() if value)
            self.assertIn(unbalanced, ([], [-1, 1]))
            self.assertTrue(extend_to_well_balanced(g, h).extends(h))

    def test_orientation_from_arcs_rejects_foreign_arcs(self):
        g = cycle(3)
        d = orientation_from_arcs(g, [(0, 0, 1)])
        self.assertEqual(d.head(0), 1)
        with self.assertRaises(OrientationError):
            orientation_from_arcs(g, [(0, 0, 2)])
        with self.assertRaises(OrientationError):
            orientation_from_arcs(g, [(9, 0, 1)])
