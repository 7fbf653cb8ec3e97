from __future__ import annotations

import os
import unittest
from unittest.mock import patch

from django.test import SimpleTestCase

from .services.generators import double_ray, get_generator, ladder
from .services.infinite import (
    DecompositionError,
    ImmersionError,
    _attach_vertex,
    build_immersion,
    decompose,
    figure1_fixed_set_check,
    initial_state,
    ray_graph,
    run_simulation,
    state_violations,
)
from .services.orientation import ConnectivityPreconditionError


class DecompositionTests(SimpleTestCase):
    def test_double_ray_splits_into_two_linked_rays(self):
        decomposition = decompose(double_ray(), [0])
        self.assertEqual(decomposition.A, frozenset({0}))
        self.assertEqual([c.end for c in decomposition.components], ["+", "-"])
        depth = decomposition.depth
        for component, sign in zip(decomposition.components, (1, -1)):
            self.assertEqual(len(component.boundary), 1)
            ray = component.paths[0]
            self.assertEqual(ray.vertices[0], 0)
            self.assertEqual(ray.vertices[-1], sign * depth)
            self.assertEqual(ray.edges[0], component.boundary[0])
        payload = decomposition.as_dict()
        self.assertEqual(payload["A"], [0])
        self.assertEqual(len(payload["components"]), 2)

    def test_empty_set_is_rejected(self):
        with self.assertRaises(DecompositionError):
            decompose(double_ray(), [])

    def test_parallel_rays_form_a_complete_ray_graph(self):
        decomposition = decompose(get_generator("quadrupled-double-ray"), [0])
        component = decomposition.components[0]
        self.assertEqual(len(component.boundary), 4)
        M = ray_graph(component)
        self.assertEqual(M.number_of_vertices(), 4)
        self.assertEqual(M.number_of_edges(), 6)
        with self.assertRaises(DecompositionError):
            ray_graph(component, component.depth + 1)

    def test_single_ray_graph_has_one_vertex(self):
        component = decompose(double_ray(), [0]).components[0]
        M = ray_graph(component)
        self.assertEqual(M.vertices, frozenset(component.boundary))
        self.assertEqual(M.number_of_edges(), 0)

    def test_disconnected_ray_graph_raises_at_the_certificate_depth(self):
        component = decompose(get_generator("quadrupled-double-ray"), [0]).components[0]
        with patch("orientations.services.infinite._joining_count", return_value=0):
            with self.assertRaises(DecompositionError) as ctx:
                ray_graph(component, 1)
        self.assertEqual(ctx.exception.depth, component.depth)
        self.assertTrue(ctx.exception.depth_exhausted)
        self.assertIn(str(component.depth), str(ctx.exception))


class ImmersionTests(SimpleTestCase):
    def test_parallel_boundary_edges_lift_away(self):
        g = get_generator("quadrupled-double-ray")
        certificate = build_immersion(g, decompose(g, [0]), 2)
        self.assertEqual(certificate.H.vertices, frozenset({0}))
        self.assertEqual(certificate.H.number_of_edges(), 0)
        self.assertEqual(certificate.X, frozenset())
        self.assertEqual(certificate.violations(), [])

    def test_needs_k_at_least_two(self):
        g = get_generator("quadrupled-double-ray")
        with self.assertRaises(ImmersionError):
            build_immersion(g, decompose(g, [0]), 1)

    def test_three_boundary_edges_attach_to_one_vertex(self):
        component = decompose(get_generator("quadrupled-double-ray"), [0]).components[0]
        boundary = list(component.boundary)
        triple = tuple(boundary[:3])
        used = set()
        x, attached = _attach_vertex(component, triple, boundary, used)
        self.assertEqual(x, 1)
        self.assertEqual(attached, {edge_id: (edge_id,) for edge_id in triple})
        self.assertEqual(used, set(triple))


class ExhaustionTests(SimpleTestCase):
    def test_initial_state_is_a_directed_cycle(self):
        state = initial_state(get_generator("doubled-ladder"))
        self.assertEqual(state.n, 0)
        self.assertEqual(state.prefix, ((0, 0),))
        self.assertTrue(state.orientation.is_total())
        self.assertFalse(any(state.orientation.imbalances().values()))
        self.assertEqual(state_violations(state, 2), [])

    def test_ladder_grows_by_ears(self):
        report = run_simulation(ladder(), 1, 4)
        self.assertEqual(len(report.stages), 4)
        last = report.stages[-1]
        self.assertEqual(last.prefix[-1], (2, 0))
        self.assertIn((2, 0), last.A)
        self.assertTrue(last.orientation.is_total())
        self.assertTrue(last.orientation.extends(report.stages[0].orientation))
        self.assertEqual(state_violations(last, 1, report.stages[-2]), [])
        self.assertEqual(report.as_dict()["rounds"], 4)

    def test_zero_rounds_reports_only_the_initial_stage(self):
        report = run_simulation(get_generator("doubled-ladder"), 2, 0)
        self.assertEqual(report.stages, ())
        self.assertEqual(report.as_dict()["initial"]["A"], [(0, 0)])

    def test_low_connectivity_is_refused(self):
        with self.assertRaises(ConnectivityPreconditionError) as ctx:
            run_simulation(double_ray(), 1, 1)
        self.assertEqual(ctx.exception.cut.size, 1)

    def test_doubled_generators_grow_in_three_rounds(self):
        for name in ("doubled-grid", "doubled-ladder", "doubled-figure1"):
            with self.subTest(generator=name):
                report = run_simulation(get_generator(name), 2, 3)
                self.assertEqual(len(report.stages), 3)
                previous = report.initial
                for stage in report.stages:
                    self.assertEqual(state_violations(stage, 2, previous), [])
                    self.assertTrue(stage.orientation.extends(previous.orientation))
                    self.assertLessEqual(previous.A, stage.A)
                    previous = stage

    def test_round_limit(self):
        with self.assertRaises(ValueError):
            run_simulation(ladder(), 1, -1)
        with self.assertRaises(ValueError):
            run_simulation(ladder(), 1, 1000)


class Figure1Tests(SimpleTestCase):
    def test_no_pair_near_the_roots_decomposes_figure1(self):
        report = figure1_fixed_set_check(4, max_level=1, sizes=(2,))
        self.assertEqual(report.checked, 15)
        self.assertTrue(report.passed)
        for witness in report.witnesses.values():
            self.assertGreaterEqual(witness["boundary"], 4)
            self.assertLessEqual(witness["capacity"], 3)

    def test_pairs_and_triples_up_to_level_two(self):
        report = figure1_fixed_set_check(4, max_level=2, sizes=(2, 3))
        self.assertEqual(report.checked, 455)
        self.assertTrue(report.passed)

    @unittest.skipUnless(os.getenv("ARCORIENT_SLOW_TESTS"), "set ARCORIENT_SLOW_TESTS to run")
    def test_pairs_and_triples_at_deeper_truncations(self):
        for depth in (5, 6):
            with self.subTest(depth=depth):
                report = figure1_fixed_set_check(depth, max_level=2, sizes=(2, 3))
                self.assertEqual(report.checked, 455)
                self.assertTrue(report.passed)
