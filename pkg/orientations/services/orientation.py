from __future__ import annotations

import itertools
import logging
from collections import deque
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from django.conf import settings

from orientations.services.connectivity import (
    all_pairs_edge_connectivity,
    arc_connectivity,
    is_k_arc_connected,
    violating_cut,
    weakest_arc_pair,
)
from orientations.services.multigraph import (
    Cut,
    EdgeId,
    GraphError,
    Multigraph,
    Orientation,
    VertexId,
    sorted_vertices,
    vertex_key,
)

logger = logging.getLogger(__name__)

TRAIL_OPEN = "open"
TRAIL_CLOSED = "closed"


class OrientationError(RuntimeError):
    pass


class ConnectivityPreconditionError(OrientationError):
    def __init__(self, k: int, cut: Cut) -> None:
        self.k = k
        self.cut = cut
        super().__init__(
            f"Graph is not {2 * k}-edge-connected: cut of size {cut.size} around "
            f"{sorted_vertices(cut.side)!r}."
        )


@dataclass(frozen=True)
class EulerTrail:
    edges: tuple[EdgeId, ...]
    kind: str
    endpoints: tuple[VertexId, VertexId]
    vertices: tuple[VertexId, ...]
    base: Multigraph = field(repr=False, compare=False)

    @property
    def is_closed(self) -> bool:
        return self.kind == TRAIL_CLOSED

    def as_dict(self) -> dict:
        return {"kind": self.kind, "edges": list(self.edges), "endpoints": list(self.endpoints)}


@dataclass(frozen=True)
class OddVertexPairing:
    pairs: tuple[tuple[VertexId, VertexId], ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict:
        return {"pairs": [list(pair) for pair in self.pairs]}


@dataclass(frozen=True)
class WellBalancedReport:
    passed: bool
    checked_pairs: int
    worst: tuple[VertexId, VertexId] | None = None
    worst_alpha: int | None = None
    worst_lambda_star: int | None = None

    def __bool__(self) -> bool:
        return self.passed

    def as_dict(self) -> dict:
        payload: dict = {"passed": self.passed, "checked_pairs": self.checked_pairs}
        if self.worst is not None:
            payload["worst_pair"] = {
                "x": self.worst[0],
                "y": self.worst[1],
                "alpha": self.worst_alpha,
                "lambda_star": self.worst_lambda_star,
            }
        return payload


def euler_trail(g: Multigraph, sub: Iterable[EdgeId]) -> EulerTrail:
    edge_ids = sorted(set(sub))
    if not edge_ids:
        raise OrientationError("An Euler trail needs at least one edge.")
    for edge_id in edge_ids:
        if not g.has_edge(edge_id):
            raise OrientationError(f"Unknown edge {edge_id}.")
    part = g.edge_subgraph(edge_ids)
    if len(part.components()) != 1:
        raise OrientationError("Edge set is not connected.")
    odd = sorted_vertices(part.odd_vertices())
    if len(odd) > 2:
        raise OrientationError(f"Edge set has {len(odd)} odd vertices; a trail allows at most 2.")
    multigraph = part.to_networkx()
    if odd:
        steps = list(nx.eulerian_path(multigraph, source=odd[0], keys=True))
    else:
        start = sorted_vertices(part.vertices)[0]
        steps = list(nx.eulerian_circuit(multigraph, source=start, keys=True))
    vertices = (steps[0][0],) + tuple(v for _u, v, _key in steps)
    return EulerTrail(
        edges=tuple(key for _u, _v, key in steps),
        kind=TRAIL_OPEN if odd else TRAIL_CLOSED,
        endpoints=(vertices[0], vertices[-1]),
        vertices=vertices,
        base=g,
    )


def orient_consistently(trail: EulerTrail) -> Orientation:
    orientation = Orientation(trail.base)
    for position, edge_id in enumerate(trail.edges):
        orientation.assign(edge_id, trail.vertices[position], trail.vertices[position + 1])
    return orientation


class _Bipartitions:
    """Every bipartition (X, V - X) with the first vertex in X, and its (★) slack."""

    def __init__(self, g: Multigraph, lambdas: dict[tuple[VertexId, VertexId], int]) -> None:
        self.order = sorted_vertices(g.vertices)
        self.index = {vertex: i for i, vertex in enumerate(self.order)}
        n = len(self.order)
        weights = np.zeros((n, n), dtype=np.int64)
        for u, v in g.edges.values():
            weights[self.index[u], self.index[v]] += 1
            weights[self.index[v], self.index[u]] += 1
        lambda_star = np.zeros((n, n), dtype=np.int64)
        for (x, y), value in lambdas.items():
            lambda_star[self.index[x], self.index[y]] = 2 * (value // 2)
        rows = np.arange((1 << (n - 1)) - 1, dtype=np.int64)
        bits = ((rows[:, None] >> np.arange(n - 1)) & 1).astype(bool)
        self.inside = np.hstack([np.ones((len(rows), 1), dtype=bool), bits])
        outside = ~self.inside
        self.cut = ((self.inside.astype(np.int64) @ weights) * outside).sum(axis=1)
        across = self.inside[:, :, None] & outside[:, None, :]
        self.demand = np.where(across, lambda_star[None, :, :], 0).max(axis=(1, 2))
        self.slack = self.cut - self.demand

    def crossing(self, x: VertexId, y: VertexId) -> np.ndarray:
        return self.inside[:, self.index[x]] != self.inside[:, self.index[y]]

    def violation(self, pairs: Iterable[tuple[VertexId, VertexId]]) -> dict | None:
        used = np.zeros(len(self.slack), dtype=np.int64)
        for x, y in pairs:
            used += self.crossing(x, y)
        bad = np.flatnonzero(used > self.slack)
        if not len(bad):
            return None
        row = int(bad[0])
        return {
            "X": [self.order[i] for i in np.flatnonzero(self.inside[row])],
            "cut": int(self.cut[row]),
            "pairing_crossing": int(used[row]),
            "lambda_star": int(self.demand[row]),
        }


def _distances(g: Multigraph, source: VertexId) -> dict[VertexId, int]:
    seen = {source: 0}
    queue = deque([source])
    while queue:
        current = queue.popleft()
        for _edge_id, other in g.neighbors(current):
            if other not in seen:
                seen[other] = seen[current] + 1
                queue.append(other)
    return seen


def _partner_orders(g: Multigraph, odd: list[VertexId]) -> dict[VertexId, list[VertexId]]:
    orders = {}
    for vertex in odd:
        distance = _distances(g, vertex)
        orders[vertex] = sorted(
            (other for other in odd if other != vertex),
            key=lambda other: (distance.get(other, len(g.vertices) + 1), vertex_key(other)),
        )
    return orders


def _pairings(
    odd: list[VertexId],
    orders: dict[VertexId, list[VertexId]],
    admit: Callable[[VertexId, VertexId], bool] | None = None,
    release: Callable[[VertexId, VertexId], None] | None = None,
) -> Iterator[tuple[tuple[VertexId, VertexId], ...]]:
    """Perfect pairings of ``odd`` in greedy order: nearest partners first, ties by vertex id."""
    chosen: list[tuple[VertexId, VertexId]] = []

    def extend(remaining: list[VertexId]) -> Iterator[tuple[tuple[VertexId, VertexId], ...]]:
        if not remaining:
            yield tuple(chosen)
            return
        first, rest = remaining[0], set(remaining[1:])
        for partner in orders[first]:
            if partner not in rest:
                continue
            if admit is not None and not admit(first, partner):
                continue
            chosen.append((first, partner))
            yield from extend([v for v in remaining[1:] if v != partner])
            chosen.pop()
            if release is not None:
                release(first, partner)

    yield from extend(odd)


def find_odd_pairing(g: Multigraph, *, max_vertices: int | None = None) -> OddVertexPairing:
    """A pairing of the odd vertices satisfying |E(X,Y)| - |P(X,Y)| >= λ*(x,y) on every cut."""
    odd = sorted_vertices(g.odd_vertices())
    if not odd:
        return OddVertexPairing()
    bound = max_vertices or settings.PAIRING_MAX_VERTICES
    if g.number_of_vertices() > bound:
        raise OrientationError(
            f"Exhaustive pairing search is limited to {bound} vertices, got {g.number_of_vertices()}."
        )
    table = _Bipartitions(g, all_pairs_edge_connectivity(g))
    slack = table.slack.copy()

    def admit(x: VertexId, y: VertexId) -> bool:
        crossing = table.crossing(x, y)
        if (slack[crossing] <= 0).any():
            return False
        slack[crossing] -= 1
        return True

    def release(x: VertexId, y: VertexId) -> None:
        slack[table.crossing(x, y)] += 1

    for pairs in _pairings(odd, _partner_orders(g, odd), admit, release):
        return OddVertexPairing(pairs)
    raise OrientationError(f"No odd-vertex pairing satisfies the cut condition on {g!r}.")


def pairing_violation(g: Multigraph, pairing: OddVertexPairing) -> dict | None:
    """First bipartition where the pairing crosses more than the cut can spare, or None."""
    paired = [v for pair in pairing.pairs for v in pair]
    if sorted_vertices(paired) != sorted_vertices(g.odd_vertices()) or len(set(paired)) != len(paired):
        return {"reason": "pairs do not partition the odd vertices"}
    if len(g.vertices) < 2:
        return None
    return _Bipartitions(g, all_pairs_edge_connectivity(g)).violation(pairing.pairs)


def _check_partial(g: Multigraph, h: Orientation) -> None:
    for edge_id, _tail, _head in h.arcs():
        if not g.has_edge(edge_id) or g.endpoints(edge_id) != h.base.endpoints(edge_id):
            raise OrientationError(f"Partial orientation assigns edge {edge_id}, which is not an edge of the graph.")
    unbalanced = {v: b for v, b in h.imbalances().items() if b}
    if not unbalanced:
        return
    if sorted(unbalanced.values()) != [-1, 1]:
        raise OrientationError(
            f"Partial orientation is not a consistently oriented Eulerian subgraph: imbalances {unbalanced!r}."
        )


def eulerian_extension(g: Multigraph, h: Orientation, pairing: OddVertexPairing) -> Orientation:
    """Orient G ∪ P consistently around ``h`` and restrict back to G."""
    augmented = g.copy()
    for x, y in pairing.pairs:
        augmented.add_edge(x, y)
    combined = Orientation(augmented, h.assignment)
    imbalance = h.imbalances()
    rest = [edge_id for edge_id in sorted(augmented.edges) if not h.is_assigned(edge_id)]
    remaining = augmented.edge_subgraph(rest)
    for component in remaining.components():
        edge_ids = [e for e in rest if augmented.endpoints(e)[0] in component]
        if not edge_ids:
            continue
        part = augmented.edge_subgraph(edge_ids)
        odd = sorted_vertices(part.odd_vertices())
        if odd:
            # The open piece must start where h leaves a deficit.
            start = next((v for v in odd if imbalance.get(v, 0) < 0), odd[0])
            steps = nx.eulerian_path(part.to_networkx(), source=start, keys=True)
        else:
            start = sorted_vertices(part.vertices)[0]
            steps = nx.eulerian_circuit(part.to_networkx(), source=start, keys=True)
        for tail, head, edge_id in steps:
            combined.assign(edge_id, tail, head)
    if any(combined.imbalances().values()):
        raise OrientationError("Augmented orientation is not balanced; the partial orientation was not consistent.")
    return Orientation(g, {edge_id: combined.assignment[edge_id] for edge_id in g.edges})


def extend_to_well_balanced(
    g: Multigraph,
    h: Orientation | None = None,
    *,
    accept: Callable[[Orientation], bool] | None = None,
    max_vertices: int | None = None,
    attempts: int | None = None,
) -> Orientation:
    """Total orientation extending ``h`` with α(x, y) >= λ*(x, y)/2 for all pairs.

    Up to the pairing bound the pairing is searched exhaustively and the result
    is well-balanced by construction. Beyond it, pairings are tried in greedy
    order and each result is checked with ``accept`` (default: the full
    well-balanced verifier).
    """
    partial = h if h is not None else Orientation(g)
    _check_partial(g, partial)
    bound = max_vertices or settings.PAIRING_MAX_VERTICES
    if g.number_of_vertices() <= bound:
        result = eulerian_extension(g, partial, find_odd_pairing(g, max_vertices=bound))
        if accept is None or accept(result):
            return result
        logger.warning("exhaustive pairing result rejected by caller check on %r; trying others", g)
    check = accept or (lambda d: verify_well_balanced(d).passed)
    limit = attempts or settings.PAIRING_ATTEMPTS
    odd = sorted_vertices(g.odd_vertices())
    for tried, pairs in enumerate(_pairings(odd, _partner_orders(g, odd)), start=1):
        result = eulerian_extension(g, partial, OddVertexPairing(pairs))
        if check(result):
            logger.debug("pairing accepted after %d attempts on %r", tried, g)
            return result
        if tried >= limit:
            break
    raise OrientationError(f"No acceptable extension found within {limit} pairings on {g!r}.")


def verify_well_balanced(d: Orientation) -> WellBalancedReport:
    if not d.is_total():
        raise OrientationError(f"Well-balanced check needs a total orientation; {len(d.unassigned())} edges unassigned.")
    lambdas = all_pairs_edge_connectivity(d.base)
    worst: tuple[int, tuple, VertexId, VertexId, int, int] | None = None
    checked = 0
    for (x, y), value in sorted(lambdas.items(), key=lambda item: (vertex_key(item[0][0]), vertex_key(item[0][1]))):
        target = 2 * (value // 2)
        alpha = arc_connectivity(d, x, y, cutoff=value) if target else 0
        checked += 1
        slack = 2 * alpha - target
        key = (slack, (vertex_key(x), vertex_key(y)))
        if worst is None or key < worst[:2]:
            worst = (slack, key[1], x, y, alpha, target)
    if worst is None:
        return WellBalancedReport(passed=True, checked_pairs=0)
    slack, _key, x, y, alpha, target = worst
    return WellBalancedReport(
        passed=slack >= 0,
        checked_pairs=checked,
        worst=(x, y),
        worst_alpha=alpha,
        worst_lambda_star=target,
    )


def k_arc_orientation(g: Multigraph, k: int) -> Orientation:
    if k < 0:
        raise OrientationError(f"k must be nonnegative, got {k}.")
    cut = violating_cut(g, 2 * k)
    if cut is not None:
        raise ConnectivityPreconditionError(k, cut)
    result = extend_to_well_balanced(g, accept=lambda d: is_k_arc_connected(d, k))
    weakest = weakest_arc_pair(result, k)
    if weakest is not None:
        x, y, value = weakest
        raise OrientationError(f"Orientation has α({x!r}, {y!r}) = {value} < {k}.")
    return result


def brute_force_k_arc_orientation(g: Multigraph, k: int, *, max_edges: int = 16) -> Orientation | None:
    """Search all 2^|E| orientations (first edge fixed, reversal is symmetric)."""
    edge_ids = sorted(g.edges)
    if len(edge_ids) > max_edges:
        raise OrientationError(f"Brute-force search is limited to {max_edges} edges, got {len(edge_ids)}.")
    if not edge_ids:
        return Orientation(g) if g.number_of_vertices() <= 1 or k == 0 else None
    degree_ok = all(g.degree(v) >= 2 * k for v in g.vertices)
    if not degree_ok:
        return None
    for choice in itertools.product((False, True), repeat=len(edge_ids) - 1):
        assignment = {}
        for edge_id, flip in zip(edge_ids, (False, *choice)):
            u, v = g.endpoints(edge_id)
            assignment[edge_id] = (v, u) if flip else (u, v)
        candidate = Orientation(g, assignment)
        if any(candidate.out_degree(v) < k or candidate.in_degree(v) < k for v in g.vertices):
            continue
        if is_k_arc_connected(candidate, k):
            return candidate
    return None


def random_trail_orientation(g: Multigraph, rng: np.random.Generator, *, max_length: int | None = None) -> Orientation:
    """Orient a random edge-simple walk; the result is a consistently oriented open or closed Eulerian subgraph."""
    orientation = Orientation(g)
    if not g.number_of_edges():
        return orientation
    order = sorted_vertices(g.vertices)
    current = order[int(rng.integers(len(order)))]
    limit = max_length if max_length is not None else g.number_of_edges()
    used: set[EdgeId] = set()
    while len(used) < limit:
        options = [edge_id for edge_id in g.incident(current) if edge_id not in used]
        if not options:
            break
        edge_id = options[int(rng.integers(len(options)))]
        used.add(edge_id)
        nxt = g.other_end(edge_id, current)
        orientation.assign(edge_id, current, nxt)
        current = nxt
        if rng.random() < 0.2:
            break
    return orientation


def balanced_cut_violation(orientation: Orientation) -> list[VertexId] | None:
    """A side X whose oriented crossing arcs are not split evenly, or None."""
    order = sorted_vertices(orientation.base.vertices)
    if len(order) < 2:
        return None
    for size in range(1, len(order)):
        for side in itertools.combinations(order[1:], size - 1):
            X = {order[0], *side}
            out = sum(1 for _e, tail, head in orientation.arcs() if tail in X and head not in X)
            back = sum(1 for _e, tail, head in orientation.arcs() if head in X and tail not in X)
            if out != back:
                return sorted_vertices(X)
    return None


def orientation_from_arcs(g: Multigraph, arcs: Iterable[tuple[EdgeId, VertexId, VertexId]]) -> Orientation:
    orientation = Orientation(g)
    for edge_id, tail, head in arcs:
        try:
            orientation.assign(edge_id, tail, head)
        except (GraphError, KeyError) as exc:
            raise OrientationError(f"Arc {edge_id} ({tail!r} -> {head!r}) does not fit the graph.") from exc
    return orientation
