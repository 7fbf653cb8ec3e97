from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from django.conf import settings

from orientations.services.connectivity import bridges, connected_within, violating_cut
from orientations.services.multigraph import (
    EdgeId,
    GraphError,
    Multigraph,
    VertexId,
    boundary,
    crossing,
    lift,
    sorted_vertices,
    vertex_key,
)

logger = logging.getLogger(__name__)

LOOPS_FORBID = "forbid"
LOOPS_DISCARD = "discard"


class LiftingError(ValueError):
    pass


class LiftingHypothesisError(LiftingError):
    def __init__(self, violations: list[str]) -> None:
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class TargetFunction:
    """τ_A: ``level`` on pairs inside ``A``, zero elsewhere."""

    A: frozenset[VertexId]
    level: int

    @classmethod
    def for_graph(cls, g: Multigraph, A: Iterable[VertexId], level: int) -> TargetFunction:
        members = frozenset(A)
        unknown = members - g.vertices
        if unknown:
            raise LiftingError(f"Target set mentions unknown vertices {sorted_vertices(unknown)!r}.")
        if level < 0:
            raise LiftingError(f"Target level must be nonnegative, got {level}.")
        cut = violating_cut(g, level, members)
        if cut is not None:
            raise LiftingError(
                f"Target level {level} exceeds local connectivity: cut of size {cut.size} "
                f"around {sorted_vertices(cut.side)!r}."
            )
        return cls(members, level)

    def value(self, x: VertexId, y: VertexId) -> int:
        return self.level if x in self.A and y in self.A and x != y else 0

    def separates(self, D: Iterable[VertexId]) -> bool:
        inside = set(D)
        return bool(self.A & inside) and bool(self.A - inside)


@dataclass(frozen=True)
class LiftingGraph:
    s: VertexId
    nodes: tuple[EdgeId, ...]
    adjacency: frozenset[frozenset[EdgeId]]
    ends: Mapping[EdgeId, VertexId] = field(default_factory=dict)

    def adjacent(self, e: EdgeId, f: EdgeId) -> bool:
        return frozenset((e, f)) in self.adjacency

    def neighbors(self, e: EdgeId) -> list[EdgeId]:
        return [f for f in self.nodes if f != e and self.adjacent(e, f)]

    def pairs(self) -> list[tuple[EdgeId, EdgeId]]:
        return sorted(tuple(sorted(pair)) for pair in self.adjacency)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.pairs())
        return graph

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "nodes": list(self.nodes),
            "ends": {str(e): self.ends[e] for e in self.nodes if e in self.ends},
            "adjacency": [list(pair) for pair in self.pairs()],
        }


@dataclass(frozen=True)
class DangerousSet:
    D: frozenset[VertexId]
    boundary_size: int

    def as_dict(self) -> dict:
        return {"D": sorted_vertices(self.D), "boundary_size": self.boundary_size}


@dataclass(frozen=True)
class LiftingClass:
    COMPLETE_MULTIPARTITE = "complete_multipartite"
    ISOLATED_PLUS_BALANCED_BIPARTITE = "isolated_plus_balanced_bipartite"
    OTHER = "other"

    kind: str
    parts: tuple[tuple[EdgeId, ...], ...] = ()
    isolated: EdgeId | None = None
    witness: tuple[EdgeId, EdgeId] | None = None

    def as_dict(self) -> dict:
        payload: dict = {"kind": self.kind, "parts": [list(part) for part in self.parts]}
        if self.isolated is not None:
            payload["isolated"] = self.isolated
        if self.witness is not None:
            payload["witness"] = list(self.witness)
        return payload


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.passed

    def as_dict(self) -> dict:
        payload: dict = {"name": self.name, "passed": self.passed}
        if self.witness is not None:
            payload["witness"] = self.witness
        return payload


def non_s_end(g: Multigraph, s: VertexId, edge_id: EdgeId) -> VertexId:
    u, v = g.endpoints(edge_id)
    if s not in (u, v):
        raise LiftingError(f"Edge {edge_id} is not incident with {s!r}.")
    return v if u == s else u


def hypothesis_violations(g: Multigraph, tau: TargetFunction, s: VertexId) -> list[str]:
    violations = []
    if s not in g:
        return [f"{s!r} is not a vertex of the graph"]
    if s in tau.A:
        violations.append(f"{s!r} belongs to the target set")
    outside = [
        edge_id
        for edge_id, (u, v) in sorted(g.edges.items())
        if u not in tau.A and v not in tau.A
    ]
    if outside:
        violations.append(f"edges {outside[:5]!r} have both ends outside the target set")
    if g.degree(s) < 2:
        violations.append(f"{s!r} has degree {g.degree(s)} < 2")
    return violations


def is_admissible(
    g: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    e1: EdgeId,
    e2: EdgeId,
    *,
    loops: str = LOOPS_FORBID,
) -> bool:
    lifted = lift(g, s, e1, e2, discard_loop=loops == LOOPS_DISCARD)
    return connected_within(lifted, tau.A, tau.level)


def lifting_graph(
    g: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    *,
    loops: str = LOOPS_FORBID,
    nodes: Iterable[EdgeId] | None = None,
    check: bool = True,
) -> LiftingGraph:
    """Admissibility graph on the edges at ``s`` (or on ``nodes``, a subset of them)."""
    if check:
        violations = hypothesis_violations(g, tau, s)
        if violations:
            raise LiftingHypothesisError(violations)
    node_list = tuple(sorted(g.incident(s) if nodes is None else nodes))
    ends = {edge_id: non_s_end(g, s, edge_id) for edge_id in node_list}
    adjacency = set()
    for e1, e2 in itertools.combinations(node_list, 2):
        if ends[e1] == ends[e2] and loops == LOOPS_FORBID:
            continue
        if is_admissible(g, tau, s, e1, e2, loops=loops):
            adjacency.add(frozenset((e1, e2)))
    return LiftingGraph(s=s, nodes=node_list, adjacency=frozenset(adjacency), ends=ends)


def enumerate_dangerous_sets(
    g: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    *,
    max_vertices: int | None = None,
) -> list[DangerousSet]:
    """Every D ⊆ V - s separating A with |δ(D)| <= level + 1.

    Subsets are visited in Gray-code order so each step updates the boundary
    size from the single vertex that entered or left D.
    """
    bound = max_vertices or settings.DANGEROUS_SET_MAX_VERTICES
    if g.number_of_vertices() > bound:
        raise LiftingError(
            f"Dangerous-set enumeration is limited to {bound} vertices, got {g.number_of_vertices()}."
        )
    others = sorted_vertices(g.vertices - {s})
    n = len(others)
    if n == 0:
        return []
    index = {vertex: i for i, vertex in enumerate(others)}
    adjacency = np.zeros((n, n), dtype=np.int64)
    for u, v in g.edges.values():
        if u != s and v != s:
            adjacency[index[u], index[v]] += 1
            adjacency[index[v], index[u]] += 1
    degrees = np.array([g.degree(vertex) for vertex in others], dtype=np.int64)
    in_target = np.array([vertex in tau.A for vertex in others], dtype=np.int64)
    target_total = int(in_target.sum())
    limit = tau.level + 1

    mask = np.zeros(n, dtype=np.int64)
    boundary_size = 0
    target_inside = 0
    found: list[DangerousSet] = []
    for step in range(1, 1 << n):
        bit = (step & -step).bit_length() - 1
        inside = int(adjacency[bit] @ mask)
        if mask[bit]:
            mask[bit] = 0
            boundary_size += 2 * inside - int(degrees[bit])
            target_inside -= int(in_target[bit])
        else:
            mask[bit] = 1
            boundary_size += int(degrees[bit]) - 2 * inside
            target_inside += int(in_target[bit])
        if 0 < target_inside < target_total and boundary_size <= limit:
            members = frozenset(others[i] for i in np.flatnonzero(mask))
            found.append(DangerousSet(members, boundary_size))
    found.sort(key=lambda d: (len(d.D), [vertex_key(v) for v in sorted_vertices(d.D)]))
    logger.debug("dangerous sets: %d of %d subsets", len(found), (1 << n) - 1)
    return found


def _multipartite_parts(
    nodes: Iterable[EdgeId],
    lg: LiftingGraph,
) -> tuple[tuple[tuple[EdgeId, ...], ...] | None, tuple[EdgeId, EdgeId] | None]:
    node_list = sorted(nodes)
    parent = {node: node for node in node_list}

    def find(node: EdgeId) -> EdgeId:
        while parent[node] != node:
            parent[node] = parent[parent[node]]
            node = parent[node]
        return node

    for e, f in itertools.combinations(node_list, 2):
        if not lg.adjacent(e, f):
            parent[find(e)] = find(f)
    groups: dict[EdgeId, list[EdgeId]] = {}
    for node in node_list:
        groups.setdefault(find(node), []).append(node)
    parts = sorted((tuple(sorted(group)) for group in groups.values()), key=lambda part: part[0])
    for part in parts:
        for e, f in itertools.combinations(part, 2):
            if lg.adjacent(e, f):
                return None, (e, f)
    return tuple(parts), None


def classify(lg: LiftingGraph) -> LiftingClass:
    parts, witness = _multipartite_parts(lg.nodes, lg)
    if parts is not None:
        return LiftingClass(LiftingClass.COMPLETE_MULTIPARTITE, parts=parts)
    for isolated in lg.nodes:
        if lg.neighbors(isolated):
            continue
        rest = [node for node in lg.nodes if node != isolated]
        rest_parts, _ = _multipartite_parts(rest, lg)
        if rest_parts is not None and len(rest_parts) == 2 and len(rest_parts[0]) == len(rest_parts[1]):
            return LiftingClass(
                LiftingClass.ISOLATED_PLUS_BALANCED_BIPARTITE,
                parts=rest_parts,
                isolated=isolated,
            )
    logger.warning("lifting graph at %r is neither multipartite nor isolated+bipartite: %r", lg.s, witness)
    return LiftingClass(LiftingClass.OTHER, witness=witness)


def frank_matching(lg: LiftingGraph, g: Multigraph | None = None) -> list[tuple[EdgeId, EdgeId]]:
    """⌊deg(s)/2⌋ pairwise disjoint admissible pairs."""
    if len(lg.nodes) == 3:
        raise LiftingError("Disjoint admissible pairs are only guaranteed when deg(s) != 3.")
    if g is not None:
        at_bridge = sorted(bridges(g) & set(lg.nodes))
        if at_bridge:
            raise LiftingError(f"{lg.s!r} is incident with bridges {at_bridge!r}.")
    matching = nx.max_weight_matching(lg.to_networkx(), maxcardinality=True)
    pairs = sorted(tuple(sorted(pair)) for pair in matching)
    needed = len(lg.nodes) // 2
    if len(pairs) < needed:
        raise LiftingError(f"Only {len(pairs)} disjoint admissible pairs at {lg.s!r}, expected {needed}.")
    return pairs


def cut_identity_sides(g: Multigraph, A1: Iterable[VertexId], A2: Iterable[VertexId]) -> tuple[int, int]:
    """Both sides of the identity relating two crossing cuts to their four corners."""
    first, second = set(A1), set(A2)
    everything = set(g.vertices)
    both = first & second
    only_first = first - second
    only_second = second - first
    neither = everything - (first | second)
    left = 2 * (
        len(boundary(g, first))
        + len(boundary(g, second))
        - (len(crossing(g, both, neither)) + len(crossing(g, only_second, only_first)))
    )
    right = (
        len(boundary(g, both))
        + len(boundary(g, only_second))
        + len(boundary(g, only_first))
        + len(boundary(g, neither))
    )
    return left, right


def verify_cut_identity(g: Multigraph, A1: Iterable[VertexId], A2: Iterable[VertexId]) -> bool:
    left, right = cut_identity_sides(g, A1, A2)
    return left == right


def admissibility_monotone_check(
    g: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    *,
    loops: str = LOOPS_FORBID,
) -> PropertyCheck:
    """Pairs admissible after a lift were admissible before it."""
    name = "admissibility_monotone"
    if g.degree(s) < 4:
        return PropertyCheck(name, True)
    before = lifting_graph(g, tau, s, loops=loops, check=False)
    for e1, e2 in before.pairs():
        lifted = lift(g, s, e1, e2, discard_loop=loops == LOOPS_DISCARD)
        remaining = [node for node in before.nodes if node not in (e1, e2)]
        after = lifting_graph(lifted, tau, s, loops=loops, nodes=remaining, check=False)
        for f1, f2 in after.pairs():
            if not before.adjacent(f1, f2):
                return PropertyCheck(name, False, {"lifted": [e1, e2], "gained": [f1, f2]})
    return PropertyCheck(name, True)


def maximal_independent_sets(lg: LiftingGraph) -> list[frozenset[EdgeId]]:
    complement = nx.complement(lg.to_networkx())
    found = [frozenset(clique) for clique in nx.find_cliques(complement)]
    return sorted(found, key=lambda group: (-len(group), sorted(group)))


def independent_set_bound_check(lg: LiftingGraph) -> PropertyCheck:
    name = "independent_set_bound"
    bound = math.ceil(len(lg.nodes) / 2)
    largest = max(maximal_independent_sets(lg), key=len, default=frozenset())
    if len(largest) > bound:
        return PropertyCheck(name, False, {"independent_set": sorted(largest), "bound": bound})
    return PropertyCheck(name, True)


def dangerous_equivalence_check(lg: LiftingGraph, dangerous: list[DangerousSet]) -> PropertyCheck:
    """Pairwise non-admissible F (|F| >= 2) exactly when a dangerous set holds all ends of F."""
    name = "dangerous_equivalence"
    for size in range(2, len(lg.nodes) + 1):
        for group in itertools.combinations(lg.nodes, size):
            independent = all(not lg.adjacent(e, f) for e, f in itertools.combinations(group, 2))
            ends = {lg.ends[e] for e in group}
            covered = any(ends <= danger.D for danger in dangerous)
            if independent != covered:
                return PropertyCheck(
                    name,
                    False,
                    {"edges": list(group), "independent": independent, "covered": covered},
                )
    return PropertyCheck(name, True)


def maximal_independent_sets_check(lg: LiftingGraph, level: int) -> PropertyCheck:
    name = "maximal_independent_sets"
    if len(lg.nodes) < 4:
        return PropertyCheck(name, True)
    everything = frozenset(lg.nodes)
    candidates = [group for group in maximal_independent_sets(lg) if len(group) >= 2]
    for first, second in itertools.combinations(candidates, 2):
        shared = first & second
        if len(shared) > 1:
            return PropertyCheck(name, False, {"sets": [sorted(first), sorted(second)], "shared": sorted(shared)})
        if level % 2 == 0 and len(shared) == 1 and (first | second) != everything:
            return PropertyCheck(
                name,
                False,
                {"sets": [sorted(first), sorted(second)], "shared": sorted(shared), "level": level},
            )
    return PropertyCheck(name, True)


def intersecting_dangerous_sets_check(
    lg: LiftingGraph,
    tau: TargetFunction,
    dangerous: list[DangerousSet],
    everything: Iterable[VertexId],
) -> PropertyCheck:
    """r1 + r2 <= ⌊deg(s)/2⌋ + 2 for two overlapping dangerous sets leaving A outside both."""
    name = "intersecting_dangerous_sets"
    limit = len(lg.nodes) // 2 + 2
    outside_pool = frozenset(everything) - {lg.s}
    edge_sets = []
    for danger in dangerous:
        group = frozenset(e for e in lg.nodes if lg.ends[e] in danger.D)
        if group:
            edge_sets.append((danger, group))
    for (d1, f1), (d2, f2) in itertools.combinations(edge_sets, 2):
        shared = len(f1 & f2)
        if not shared or len(f1) <= shared or len(f2) <= shared:
            continue
        if not (tau.A & (outside_pool - d1.D - d2.D)):
            continue
        if len(f1) + len(f2) > limit:
            return PropertyCheck(
                name,
                False,
                {"D1": sorted_vertices(d1.D), "D2": sorted_vertices(d2.D), "r1": len(f1), "r2": len(f2)},
            )
    return PropertyCheck(name, True)


def four_edge_structure_check(lg: LiftingGraph, level: int) -> PropertyCheck:
    """With deg(s) = 4: K4, K2,2, or two disjoint edges (the last only for odd level)."""
    name = "four_edge_structure"
    if len(lg.nodes) != 4:
        return PropertyCheck(name, True)
    graph = lg.to_networkx()
    edges = graph.number_of_edges()
    degrees = sorted(d for _node, d in graph.degree())
    if edges == 6:
        return PropertyCheck(name, True)
    if edges == 4 and degrees == [2, 2, 2, 2] and nx.is_bipartite(graph):
        return PropertyCheck(name, True)
    if edges == 2 and degrees == [1, 1, 1, 1]:
        if level % 2:
            return PropertyCheck(name, True)
        return PropertyCheck(name, False, {"shape": "2K2", "level": level})
    return PropertyCheck(name, False, {"adjacency": [list(p) for p in lg.pairs()]})


def odd_degree_structure_check(lg: LiftingGraph, lifting_class: LiftingClass) -> PropertyCheck:
    """With odd deg(s) >= 5 and an independent set of size ⌈deg(s)/2⌉: balanced bipartite, possibly plus one isolated node."""
    name = "odd_degree_structure"
    degree = len(lg.nodes)
    if degree < 5 or degree % 2 == 0:
        return PropertyCheck(name, True)
    largest = max(map(len, maximal_independent_sets(lg)), default=0)
    if largest < math.ceil(degree / 2):
        return PropertyCheck(name, True)
    if lifting_class.kind == LiftingClass.ISOLATED_PLUS_BALANCED_BIPARTITE:
        return PropertyCheck(name, True)
    parts = lifting_class.parts
    if (
        lifting_class.kind == LiftingClass.COMPLETE_MULTIPARTITE
        and len(parts) == 2
        and abs(len(parts[0]) - len(parts[1])) <= 1
    ):
        return PropertyCheck(name, True)
    return PropertyCheck(name, False, lifting_class.as_dict())


def parity_check(lg: LiftingGraph, lifting_class: LiftingClass) -> PropertyCheck:
    name = "isolated_bipartite_parity"
    if lifting_class.kind == LiftingClass.ISOLATED_PLUS_BALANCED_BIPARTITE and len(lg.nodes) % 2 == 0:
        return PropertyCheck(name, False, lifting_class.as_dict())
    return PropertyCheck(name, True)


def lifting_census(
    g: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    *,
    with_dangerous: bool = True,
    max_vertices: int | None = None,
    loops: str = LOOPS_FORBID,
) -> dict:
    """Everything the lifting-graph command reports about one instance."""
    lg = lifting_graph(g, tau, s, loops=loops)
    lifting_class = classify(lg)
    payload: dict = {
        "lifting_graph": lg.as_dict(),
        "class": lifting_class.as_dict(),
    }
    try:
        payload["frank_matching"] = [list(pair) for pair in frank_matching(lg, g)]
    except LiftingError as exc:
        payload["frank_matching"] = None
        payload["frank_matching_error"] = str(exc)
    if with_dangerous:
        try:
            dangerous = enumerate_dangerous_sets(g, tau, s, max_vertices=max_vertices)
        except LiftingError as exc:
            payload["dangerous_sets"] = None
            payload["dangerous_sets_error"] = str(exc)
        else:
            payload["dangerous_sets"] = [danger.as_dict() for danger in dangerous]
    return payload


def lift_pair(g: Multigraph, s: VertexId, e1: EdgeId, e2: EdgeId, *, loops: str = LOOPS_FORBID) -> tuple[Multigraph, EdgeId | None]:
    """Lift and report the id of the new edge (None when a loop was discarded)."""
    try:
        same_end = non_s_end(g, s, e1) == non_s_end(g, s, e2)
    except GraphError as exc:
        raise LiftingError(str(exc)) from exc
    lifted = lift(g, s, e1, e2, discard_loop=loops == LOOPS_DISCARD)
    return lifted, None if same_end else g.next_edge_id
