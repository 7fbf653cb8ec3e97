from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings

from orientations.services.connectivity import is_k_arc_connected, violating_cut
from orientations.services.graph_io import digest, graph_to_dict
from orientations.services.lifting import (
    LOOPS_DISCARD,
    LiftingClass,
    LiftingError,
    PropertyCheck,
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
    lifting_graph,
    maximal_independent_sets_check,
    odd_degree_structure_check,
    parity_check,
)
from orientations.services.multigraph import Multigraph
from orientations.services.orientation import (
    ConnectivityPreconditionError,
    brute_force_k_arc_orientation,
    extend_to_well_balanced,
    k_arc_orientation,
    random_trail_orientation,
    verify_well_balanced,
)

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1
LIFTING_ATTEMPTS = 50
MONOTONE_MAX_VERTICES = 8
# Draws stop after this many times the requested count, admitted or not.
MAX_DRAW_FACTOR = 4


class UnknownSuiteError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusBounds:
    count: int
    max_n: int
    max_m: int

    def as_dict(self) -> dict:
        return {"count": self.count, "max_n": self.max_n, "max_m": self.max_m}


@dataclass(frozen=True)
class CheckResult:
    instance: str
    name: str
    passed: bool
    witness: dict | None = None

    def as_dict(self) -> dict:
        payload: dict = {"instance": self.instance, "check": self.name, "passed": self.passed}
        if not self.passed:
            payload["witness"] = self.witness or {}
        return payload


@dataclass(frozen=True)
class InstanceOutcome:
    index: int
    digest: str | None
    checks: tuple[CheckResult, ...] = ()


@dataclass(frozen=True)
class CorpusReport:
    suite: str
    seed: int
    bounds: CorpusBounds
    instances: int
    skipped: int
    checks: tuple[CheckResult, ...] = field(repr=False)

    @property
    def failures(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def inputs_digest(self) -> str:
        return digest({"suite": self.suite, "seed": self.seed, "bounds": self.bounds.as_dict()})

    def summary(self) -> dict[str, dict[str, int]]:
        totals: dict[str, Counter] = {}
        for check in self.checks:
            totals.setdefault(check.name, Counter())["passed" if check.passed else "failed"] += 1
        return {
            name: {"passed": counts["passed"], "failed": counts["failed"]}
            for name, counts in sorted(totals.items())
        }

    def as_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "command": "corpus",
            "suite": self.suite,
            "seed": self.seed,
            "parameters": self.bounds.as_dict(),
            "inputs_digest": self.inputs_digest,
            "instances": self.instances,
            "skipped": self.skipped,
            "passed": self.passed,
            "summary": self.summary(),
            "checks": [check.as_dict() for check in self.checks],
        }


# Instance generators. Every instance draws from its own generator so results
# do not depend on evaluation order.


def random_connected_multigraph(rng: np.random.Generator, n: int, m: int) -> Multigraph:
    """Random spanning tree on ``n`` vertices plus ``m - n + 1`` extra edges (parallels allowed)."""
    g = Multigraph(range(n))
    order = [int(v) for v in rng.permutation(n)]
    for position in range(1, n):
        g.add_edge(order[position], order[int(rng.integers(position))])
    for _ in range(max(m - (n - 1), 0)):
        u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        g.add_edge(u, v)
    return g


def random_cyclic_multigraph(rng: np.random.Generator, n: int, m: int, copies: int) -> Multigraph:
    """A Hamiltonian cycle plus chords, every edge repeated ``copies`` times."""
    g = Multigraph(range(n))
    order = [int(v) for v in rng.permutation(n)]
    base: list[tuple[int, int]] = []
    if n == 2:
        base.append((order[0], order[1]))
    else:
        base.extend((order[i], order[(i + 1) % n]) for i in range(n))
    while (len(base) + 1) * copies <= m and rng.random() < 0.5:
        u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        base.append((u, v))
    for u, v in base:
        for _ in range(copies):
            g.add_edge(u, v)
    return g


def _random_size(rng: np.random.Generator, bounds: CorpusBounds, *, low: int = 2) -> tuple[int, int]:
    n = int(rng.integers(low, max(bounds.max_n, low) + 1))
    m = int(rng.integers(n - 1, max(bounds.max_m, n - 1) + 1))
    return n, m


@dataclass(frozen=True)
class LiftingInstance:
    graph: Multigraph
    tau: TargetFunction
    s: str

    def as_dict(self) -> dict:
        return {
            "graph": graph_to_dict(self.graph),
            "s": self.s,
            "A": sorted(self.tau.A),
            "level": self.tau.level,
        }


def random_lifting_instance(
    rng: np.random.Generator,
    bounds: CorpusBounds,
    *,
    degrees: tuple[int, ...],
    levels: tuple[int, ...] = (4, 6),
) -> LiftingInstance | None:
    """G on A ∪ {s} with every non-s vertex in A and λ >= level on A.

    Draws until the connectivity requirement holds or the attempts run out.
    """
    for _attempt in range(LIFTING_ATTEMPTS):
        level = int(rng.choice(levels))
        degree = int(rng.choice(degrees))
        size = int(rng.integers(2, max(bounds.max_n, 3)))
        g = Multigraph([*range(size), "s"])
        ring = [int(v) for v in rng.permutation(size)]
        thickness = int(rng.integers(max(level // 2 - 1, 1), level // 2 + 1))
        if size == 2:
            pairs = [(ring[0], ring[1])] * 2
        else:
            pairs = [(ring[i], ring[(i + 1) % size]) for i in range(size)]
        for u, v in pairs:
            for _ in range(thickness):
                g.add_edge(u, v)
        for _ in range(int(rng.integers(0, size + 1))):
            u, v = (int(x) for x in rng.choice(size, size=2, replace=False))
            g.add_edge(u, v)
        for _ in range(degree):
            g.add_edge("s", int(rng.integers(size)))
        try:
            tau = TargetFunction.for_graph(g, range(size), level)
        except LiftingError:
            continue
        return LiftingInstance(g, tau, "s")
    return None


# Suites.


def _check(instance: str, result: PropertyCheck, context: dict) -> CheckResult:
    witness = None if result.passed else {**context, "detail": result.witness or {}}
    return CheckResult(instance, result.name, result.passed, witness)


def _lifting_structure(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]] | None:
    instance = random_lifting_instance(rng, bounds, degrees=(4, 5, 6, 7, 8))
    if instance is None:
        return None
    doc = instance.as_dict()
    key = digest(doc)
    lg = lifting_graph(instance.graph, instance.tau, instance.s, loops=LOOPS_DISCARD)
    lifting_class = classify(lg)
    level = instance.tau.level
    context = {"instance": doc, "lifting_graph": lg.as_dict()}
    results = [
        CheckResult(
            key,
            "classification",
            lifting_class.kind != LiftingClass.OTHER,
            None if lifting_class.kind != LiftingClass.OTHER else {**context, "detail": lifting_class.as_dict()},
        ),
        _check(key, parity_check(lg, lifting_class), context),
        _check(key, four_edge_structure_check(lg, level), context),
        _check(key, odd_degree_structure_check(lg, lifting_class), context),
        _check(key, independent_set_bound_check(lg), context),
        _check(key, maximal_independent_sets_check(lg, level), context),
    ]
    if instance.graph.number_of_vertices() <= MONOTONE_MAX_VERTICES:
        monotone = admissibility_monotone_check(instance.graph, instance.tau, instance.s, loops=LOOPS_DISCARD)
        results.append(_check(key, monotone, context))
    return doc, results


def _frank(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]] | None:
    instance = random_lifting_instance(rng, bounds, degrees=(2, 4, 5, 6, 7, 8))
    if instance is None:
        return None
    doc = instance.as_dict()
    key = digest(doc)
    lg = lifting_graph(instance.graph, instance.tau, instance.s, loops=LOOPS_DISCARD)
    try:
        matching = frank_matching(lg, instance.graph)
    except LiftingError as exc:
        return doc, [CheckResult(key, "frank_matching", False, {"instance": doc, "lifting_graph": lg.as_dict(), "error": str(exc)})]
    return doc, [CheckResult(key, "frank_matching", len(matching) == len(lg.nodes) // 2)]


def _dangerous_equiv(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]] | None:
    instance = random_lifting_instance(rng, bounds, degrees=(2, 3, 4, 5, 6))
    if instance is None:
        return None
    doc = instance.as_dict()
    key = digest(doc)
    lg = lifting_graph(instance.graph, instance.tau, instance.s, loops=LOOPS_DISCARD)
    dangerous = enumerate_dangerous_sets(instance.graph, instance.tau, instance.s)
    context = {"instance": doc, "lifting_graph": lg.as_dict()}
    return doc, [
        _check(key, dangerous_equivalence_check(lg, dangerous), context),
        _check(
            key,
            intersecting_dangerous_sets_check(lg, instance.tau, dangerous, instance.graph.vertices),
            context,
        ),
    ]


def _cut_identity(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]]:
    n, m = _random_size(rng, bounds)
    g = random_connected_multigraph(rng, n, m)
    A1 = sorted(int(v) for v in np.flatnonzero(rng.random(n) < 0.5))
    A2 = sorted(int(v) for v in np.flatnonzero(rng.random(n) < 0.5))
    doc = {"graph": graph_to_dict(g), "A1": A1, "A2": A2}
    key = digest(doc)
    left, right = cut_identity_sides(g, A1, A2)
    witness = None if left == right else {"instance": doc, "left": left, "right": right}
    return doc, [CheckResult(key, "cut_identity", left == right, witness)]


def _wellbalanced(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]]:
    n, m = _random_size(rng, bounds)
    g = random_connected_multigraph(rng, n, m)
    h = random_trail_orientation(g, rng)
    doc = {"graph": graph_to_dict(g, h)}
    key = digest(doc)
    result = extend_to_well_balanced(g, h)
    report = verify_well_balanced(result)
    extends = result.is_total() and result.extends(h)
    return doc, [
        CheckResult(key, "extends_partial", extends, None if extends else {"instance": doc, "result": graph_to_dict(g, result)}),
        CheckResult(
            key,
            "well_balanced",
            report.passed,
            None if report.passed else {"instance": doc, "result": graph_to_dict(g, result), "report": report.as_dict()},
        ),
    ]


def _orientation_exhaustive(rng: np.random.Generator, bounds: CorpusBounds) -> tuple[dict, list[CheckResult]]:
    k = int(rng.choice((1, 2)))
    n, m = _random_size(rng, bounds)
    if rng.random() < 0.5 and 2 * n <= bounds.max_m:
        g = random_cyclic_multigraph(rng, n, bounds.max_m, copies=k)
    else:
        g = random_connected_multigraph(rng, n, m)
    doc = {"graph": graph_to_dict(g), "k": k}
    key = digest(doc)
    feasible = violating_cut(g, 2 * k) is None
    results = []
    try:
        orientation = k_arc_orientation(g, k)
    except ConnectivityPreconditionError:
        results.append(CheckResult(key, "pipeline", not feasible, None if not feasible else {"instance": doc}))
    else:
        ok = feasible and is_k_arc_connected(orientation, k)
        results.append(
            CheckResult(key, "pipeline", ok, None if ok else {"instance": doc, "result": graph_to_dict(g, orientation)})
        )
    brute = brute_force_k_arc_orientation(g, k, max_edges=max(bounds.max_m, 1))
    agrees = (brute is not None) == feasible
    witness = None
    if not agrees:
        witness = {"instance": doc, "feasible": feasible, "brute_force": None if brute is None else graph_to_dict(g, brute)}
    results.append(CheckResult(key, "brute_force_agrees", agrees, witness))
    return doc, results


SuiteFn = Callable[[np.random.Generator, CorpusBounds], tuple[dict, list[CheckResult]] | None]

SUITES: dict[str, tuple[SuiteFn, CorpusBounds]] = {
    "lifting-structure": (_lifting_structure, CorpusBounds(count=1000, max_n=9, max_m=40)),
    "frank": (_frank, CorpusBounds(count=1000, max_n=9, max_m=40)),
    "dangerous-equiv": (_dangerous_equiv, CorpusBounds(count=300, max_n=10, max_m=40)),
    "cut-identity": (_cut_identity, CorpusBounds(count=500, max_n=10, max_m=20)),
    "wellbalanced": (_wellbalanced, CorpusBounds(count=2000, max_n=6, max_m=12)),
    "orientation-exhaustive": (_orientation_exhaustive, CorpusBounds(count=2000, max_n=6, max_m=12)),
}


def suite_bounds(
    suite: str,
    *,
    count: int | None = None,
    max_n: int | None = None,
    max_m: int | None = None,
) -> CorpusBounds:
    try:
        _fn, defaults = SUITES[suite]
    except KeyError:
        raise UnknownSuiteError(f"Unknown suite {suite!r}; expected one of {', '.join(SUITES)}.") from None
    changes = {
        name: value
        for name, value in (("count", count), ("max_n", max_n), ("max_m", max_m))
        if value is not None
    }
    for name, value in changes.items():
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}.")
    return replace(defaults, **changes)


def evaluate_instance(suite: str, bounds: CorpusBounds, index: int, seed_sequence: np.random.SeedSequence) -> InstanceOutcome:
    """Generate and check one instance; exceptions become a failed ``error`` check."""
    fn, _defaults = SUITES[suite]
    rng = np.random.default_rng(seed_sequence)
    try:
        produced = fn(rng, bounds)
    except Exception as exc:
        logger.exception("instance %d of %s raised", index, suite)
        key = digest({"suite": suite, "index": index, "entropy": str(seed_sequence.entropy), "spawn_key": list(seed_sequence.spawn_key)})
        witness = {
            "replay": {"suite": suite, "index": index, "bounds": bounds.as_dict()},
            "error": f"{type(exc).__name__}: {exc}",
        }
        return InstanceOutcome(index, key, (CheckResult(key, "error", False, witness),))
    if produced is None:
        return InstanceOutcome(index, None)
    doc, checks = produced
    return InstanceOutcome(index, digest(doc), tuple(checks))


def _evaluate_packed(args: tuple) -> InstanceOutcome:
    return evaluate_instance(*args)


def run_suite(
    suite: str,
    *,
    seed: int | None = None,
    count: int | None = None,
    max_n: int | None = None,
    max_m: int | None = None,
    workers: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> CorpusReport:
    bounds = suite_bounds(suite, count=count, max_n=max_n, max_m=max_m)
    seed = settings.DEFAULT_SEED if seed is None else seed
    workers = workers or settings.CORPUS_WORKERS
    root = np.random.SeedSequence(seed)
    draw_limit = bounds.count * MAX_DRAW_FACTOR
    logger.info("corpus %s: %d instances, seed=%d, workers=%d", suite, bounds.count, seed, workers)

    outcomes: list[InstanceOutcome] = []
    admitted: list[InstanceOutcome] = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(admitted) < bounds.count and len(outcomes) < draw_limit:
            # Batches never exceed the shortfall.
            batch = min(bounds.count - len(admitted), draw_limit - len(outcomes))
            start = len(outcomes)
            jobs = [(suite, bounds, start + offset, child) for offset, child in enumerate(root.spawn(batch))]
            if pool is not None:
                results = pool.map(_evaluate_packed, jobs, chunksize=max(1, batch // (workers * 8)))
            else:
                results = map(_evaluate_packed, jobs)
            for outcome in results:
                outcomes.append(outcome)
                if outcome.digest is not None:
                    admitted.append(outcome)
                if progress:
                    progress(len(admitted), bounds.count)
    finally:
        if pool is not None:
            pool.shutdown()
    if len(admitted) < bounds.count:
        logger.warning("corpus %s: only %d of %d instances admitted after %d draws", suite, len(admitted), bounds.count, len(outcomes))

    ordered = sorted(
        (check for outcome in admitted for check in outcome.checks),
        key=lambda check: (check.instance, check.name, check.passed),
    )
    report = CorpusReport(
        suite=suite,
        seed=seed,
        bounds=bounds,
        instances=len(admitted),
        skipped=len(outcomes) - len(admitted),
        checks=tuple(ordered),
    )
    if report.passed:
        logger.info("corpus %s passed: %d instances", suite, report.instances)
    else:
        logger.warning("corpus %s: %d failed checks", suite, len(report.failures))
    return report


def replay_instance(suite: str, seed: int, index: int, bounds: CorpusBounds) -> InstanceOutcome:
    children = np.random.SeedSequence(seed).spawn(index + 1)
    return evaluate_instance(suite, bounds, index, children[index])

