from __future__ import annotations

import itertools
import logging
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import networkx as nx
from django.conf import settings
from networkx.algorithms.flow import edmonds_karp

from orientations.services.connectivity import (
    FlowPath,
    connected_within,
    is_k_edge_connected,
    min_cut_separating,
    pack_paths,
    violating_cut,
    weakest_arc_pair,
)
from orientations.services.generators import EndId, LazyGraph, Truncation, figure1
from orientations.services.lifting import (
    LOOPS_DISCARD,
    LiftingClass,
    LiftingError,
    TargetFunction,
    classify,
    is_admissible,
    lift_pair,
    lifting_graph,
)
from orientations.services.multigraph import (
    EdgeId,
    Multigraph,
    Orientation,
    VertexId,
    boundary,
    contract,
    cut_of,
    fresh_vertex,
    sorted_vertices,
    vertex_key,
)
from orientations.services.orientation import (
    ConnectivityPreconditionError,
    OrientationError,
    extend_to_well_balanced,
)

logger = logging.getLogger(__name__)


class DecompositionError(RuntimeError):
    def __init__(self, message: str, *, depth: int, depth_exhausted: bool = False) -> None:
        self.depth = depth
        self.depth_exhausted = depth_exhausted
        super().__init__(message)


class ImmersionError(RuntimeError):
    def __init__(self, message: str, *, state: dict | None = None) -> None:
        self.state = state or {}
        super().__init__(message)


class InvariantViolation(RuntimeError):
    def __init__(self, message: str, *, state: dict) -> None:
        self.state = state
        super().__init__(message)


@dataclass(frozen=True)
class BoundaryLinkedComponent:
    """A component of G - A seen through a truncation.

    ``paths[i]`` starts with ``boundary[i]`` at its outside endpoint and ends on
    the end's region at ``depth``; the paths are pairwise edge-disjoint.
    """

    vertices: frozenset[VertexId]
    boundary: tuple[EdgeId, ...]
    end: EndId
    paths: tuple[FlowPath, ...]
    depth: int
    truncation: Truncation = field(repr=False, compare=False)

    def ray(self, edge_id: EdgeId) -> FlowPath:
        return self.paths[self.boundary.index(edge_id)]

    def inner_edges(self) -> frozenset[EdgeId]:
        members = self.vertices
        return frozenset(
            edge_id
            for edge_id, (u, v) in self.truncation.graph.edges.items()
            if u in members and v in members
        )

    def as_dict(self) -> dict:
        return {
            "end": self.end,
            "depth": self.depth,
            "size": len(self.vertices),
            "boundary": list(self.boundary),
            "certificate": [list(path.edges) for path in self.paths],
        }


@dataclass(frozen=True)
class Decomposition:
    A: frozenset[VertexId]
    components: tuple[BoundaryLinkedComponent, ...]
    truncation: Truncation = field(repr=False, compare=False)

    @property
    def depth(self) -> int:
        return self.truncation.depth

    def as_dict(self) -> dict:
        return {
            "A": sorted_vertices(self.A),
            "depth": self.depth,
            "components": [component.as_dict() for component in self.components],
        }


@dataclass(frozen=True)
class ImmersionCertificate:
    H: Multigraph
    realization: Mapping[EdgeId, tuple[EdgeId, ...]]
    X: frozenset[VertexId]
    A: frozenset[VertexId]
    k: int
    truncation: Truncation = field(repr=False, compare=False)

    def violations(self) -> list[str]:
        graph = self.truncation.graph
        problems = []
        seen: Counter[EdgeId] = Counter()
        for path in self.realization.values():
            seen.update(path)
        reused = sorted(edge_id for edge_id, count in seen.items() if count > 1)
        if reused:
            problems.append(f"realization paths share edges {reused[:5]!r}")
        for edge_id, path in sorted(self.realization.items()):
            a, b = self.H.endpoints(edge_id)
            if _walk_end(graph, a, path) != b and _walk_end(graph, b, path) != a:
                problems.append(f"realization of H-edge {edge_id} does not join {a!r} and {b!r}")
        for x in sorted_vertices(self.X):
            if self.H.degree(x) != 3:
                problems.append(f"exceptional vertex {x!r} has degree {self.H.degree(x)} in H")
        if not connected_within(self.H, self.A, 2 * self.k):
            problems.append(f"H is not {2 * self.k}-edge-connected between the vertices of A")
        if not is_k_edge_connected(self.H, 3):
            problems.append("H is not 3-edge-connected")
        for edge_id, (u, v) in graph.edges.items():
            if u in self.A and v in self.A:
                if not self.H.has_edge(edge_id) or tuple(self.realization.get(edge_id, ())) != (edge_id,):
                    problems.append(f"edge {edge_id} inside A is not kept in H")
        return problems

    def as_dict(self) -> dict:
        return {
            "A": sorted_vertices(self.A),
            "X": sorted_vertices(self.X),
            "H": [[edge_id, u, v] for edge_id, (u, v) in sorted(self.H.edges.items())],
            "realization": {str(edge_id): list(path) for edge_id, path in sorted(self.realization.items())},
        }


@dataclass(frozen=True)
class ExhaustionState:
    n: int
    A: frozenset[VertexId]
    W: Multigraph
    orientation: Orientation
    prefix: tuple[VertexId, ...]
    components: tuple[frozenset[VertexId], ...] = ()
    X: frozenset[VertexId] = frozenset()
    depth: int = 0

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "A": sorted_vertices(self.A),
            "X": sorted_vertices(self.X),
            "prefix": list(self.prefix),
            "arcs": [[edge_id, tail, head] for edge_id, tail, head in self.orientation.arcs()],
        }


@dataclass(frozen=True)
class SimulationReport:
    generator: str
    k: int
    initial: ExhaustionState
    stages: tuple[ExhaustionState, ...]

    def as_dict(self) -> dict:
        return {
            "generator": self.generator,
            "k": self.k,
            "rounds": len(self.stages),
            "initial": self.initial.as_dict(),
            "stages": [stage.as_dict() for stage in self.stages],
        }


@dataclass(frozen=True)
class Figure1Report:
    depth: int
    checked: int
    failures: tuple[tuple[VertexId, ...], ...]
    witnesses: Mapping[tuple[VertexId, ...], dict] = field(repr=False)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "checked": self.checked,
            "passed": self.passed,
            "failures": [list(A) for A in self.failures],
        }


def _walk_end(graph: Multigraph, start: VertexId, path: Iterable[EdgeId]) -> VertexId | None:
    current = start
    for edge_id in path:
        u, v = graph.endpoints(edge_id)
        if current == u:
            current = v
        elif current == v:
            current = u
        else:
            return None
    return current


def truncate(g: LazyGraph, depth: int) -> Truncation:
    return g.truncate(depth)


# Decomposition into boundary-linked components.


def decompose(
    g: LazyGraph,
    A_prime: Iterable[VertexId],
    *,
    depth: int | None = None,
    depth_cap: int | None = None,
    margin: int | None = None,
) -> Decomposition:
    """A finite A ⊇ A_prime such that every component of G - A is boundary-linked.

    Works on truncations, doubling the depth until every component carries a
    frontier certificate or the cap is reached.
    """
    prime = frozenset(A_prime)
    if not prime:
        raise DecompositionError("A_prime must be nonempty.", depth=0)
    cap = depth_cap or settings.DEPTH_CAP
    margin = settings.DEPTH_MARGIN if margin is None else margin
    floor = max(g.level(v) for v in prime) + 1
    current = max(depth if depth is not None else floor - 1 + margin, floor)
    while True:
        try:
            return _decompose_at(g, prime, current)
        except DecompositionError as exc:
            if not exc.depth_exhausted or current >= cap:
                raise
            logger.info("decomposition of %s at depth %d failed (%s); doubling", g.name, current, exc)
        current = min(current * 2, cap)


def _decompose_at(g: LazyGraph, prime: frozenset[VertexId], depth: int) -> Decomposition:
    trunc = g.truncate(depth)
    graph = trunc.graph
    missing = prime - graph.vertices
    if missing:
        raise DecompositionError(f"Vertices {sorted_vertices(missing)!r} are not in {g.name}.", depth=depth)
    A = set(prime)
    claimed: set[VertexId] = set()
    found: list[BoundaryLinkedComponent] = []
    while True:
        remaining = set(graph.vertices) - A - claimed
        pieces = graph.components(remaining)
        infinite = [piece for piece in pieces if piece & trunc.frontier]
        if not infinite:
            A |= remaining
            break
        resolution = max(trunc.levels[v] for v in A) + 1
        target = None
        for end in g.oracle.ends(resolution):
            region = g.region(end, depth) & remaining
            if any(piece & region for piece in infinite):
                target = (end, frozenset(region))
                break
        if target is None:
            raise DecompositionError(
                f"No declared end of {g.name} reaches the remaining frontier at depth {depth}.",
                depth=depth,
                depth_exhausted=True,
            )
        end, region = target
        allowed = A | remaining
        edge_ids = [e for e, (u, v) in graph.edges.items() if u in allowed and v in allowed]
        cut = min_cut_separating(graph, A, region, edge_ids=edge_ids)
        B = set().union(*(piece for piece in graph.components(remaining - cut.side) if piece & region))
        linked = sorted(e for e in cut.boundary if set(graph.endpoints(e)) & B)
        if len(linked) != cut.size:
            raise DecompositionError(
                f"Minimum cut toward end {end!r} has edges outside its component.", depth=depth
            )
        component = _certify(g, trunc, frozenset(B), tuple(linked), end, region)
        found.append(component)
        claimed |= B
        A |= {path.vertices[0] for path in component.paths}
        logger.debug("end %r: boundary %d, |A| = %d", end, len(linked), len(A))
    return Decomposition(A=frozenset(A), components=tuple(found), truncation=trunc)


def _certify(
    g: LazyGraph,
    trunc: Truncation,
    B: frozenset[VertexId],
    linked: tuple[EdgeId, ...],
    end: EndId,
    region: frozenset[VertexId],
) -> BoundaryLinkedComponent:
    graph = trunc.graph
    inside_end = {}
    starts: Counter[VertexId] = Counter()
    for edge_id in linked:
        u, v = graph.endpoints(edge_id)
        inner, outer = (u, v) if u in B else (v, u)
        inside_end[edge_id] = (inner, outer)
        starts[inner] += 1
    inner_edges = [e for e, (u, v) in graph.edges.items() if u in B and v in B]
    packed = pack_paths(graph, dict(starts), region & B, edge_ids=inner_edges)
    if len(packed) < len(linked):
        raise DecompositionError(
            f"Only {len(packed)} of {len(linked)} frontier paths toward end {end!r}.",
            depth=trunc.depth,
            depth_exhausted=True,
        )
    by_start: dict[VertexId, list[FlowPath]] = defaultdict(list)
    for path in packed:
        by_start[path.start].append(path)
    rays = []
    for edge_id in linked:
        inner, outer = inside_end[edge_id]
        path = by_start[inner].pop(0)
        rays.append(FlowPath((outer,) + path.vertices, (edge_id,) + path.edges))
    return BoundaryLinkedComponent(
        vertices=B,
        boundary=linked,
        end=end,
        paths=tuple(rays),
        depth=trunc.depth,
        truncation=trunc,
    )


# Ray graphs and connecting paths.


def _ray_vertices(component: BoundaryLinkedComponent, edge_id: EdgeId, allowed: set[VertexId]) -> list[VertexId]:
    return [v for v in component.ray(edge_id).vertices[1:] if v in allowed]


def _joining_count(
    component: BoundaryLinkedComponent,
    first: EdgeId,
    second: EdgeId,
    active: Iterable[EdgeId],
    blocked: set[EdgeId],
    allowed: set[VertexId],
    cutoff: int,
) -> int:
    """Vertex-disjoint paths from one ray to another, meeting no active ray elsewhere."""
    graph = component.truncation.graph
    active = list(active)
    mine = set(_ray_vertices(component, first, allowed))
    theirs = set(_ray_vertices(component, second, allowed))
    others = set().union(*(
        _ray_vertices(component, e, allowed) for e in active if e not in (first, second)
    )) - mine - theirs
    ray_edges = set().union(*(component.ray(e).edges[1:] for e in active))
    usable = allowed - others
    network = nx.DiGraph()
    source, sink = ("__join_source__",), ("__join_sink__",)
    for v in usable:
        network.add_edge((v, "in"), (v, "out"), capacity=1)
    for v in mine:
        network.add_edge(source, (v, "in"), capacity=1)
    for v in theirs:
        network.add_edge((v, "out"), sink, capacity=1)
    for edge_id in component.inner_edges():
        if edge_id in blocked or edge_id in ray_edges:
            continue
        u, w = graph.endpoints(edge_id)
        if u not in usable or w not in usable:
            continue
        for a, b in ((u, w), (w, u)):
            if b in mine or a in theirs:
                continue
            network.add_edge((a, "out"), (b, "in"), capacity=1)
    if source not in network or sink not in network:
        return 0
    return int(nx.maximum_flow_value(network, source, sink, flow_func=edmonds_karp, cutoff=cutoff))


def _connecting_path(
    component: BoundaryLinkedComponent,
    first: EdgeId,
    second: EdgeId,
    active: Iterable[EdgeId],
    blocked: set[EdgeId],
) -> tuple[VertexId, VertexId, list[EdgeId]] | None:
    """Shortest path from the first ray to the second with no other ray vertex inside it."""
    graph = component.truncation.graph
    allowed = set(component.vertices)
    active = list(active)
    mine = _ray_vertices(component, first, allowed)
    theirs_order = _ray_vertices(component, second, allowed)
    theirs = set(theirs_order)
    shared = [v for v in mine if v in theirs]
    if shared:
        best = min(shared, key=lambda v: mine.index(v) + theirs_order.index(v))
        return best, best, []
    others = set().union(*(
        _ray_vertices(component, e, allowed) for e in active if e not in (first, second)
    )) - set(mine) - theirs
    ray_edges = set().union(*(component.ray(e).edges[1:] for e in active))
    inner = component.inner_edges()
    parent: dict[VertexId, tuple[VertexId, EdgeId] | None] = {v: None for v in mine}
    queue = deque(mine)
    while queue:
        current = queue.popleft()
        for edge_id, other in graph.neighbors(current):
            if edge_id not in inner or edge_id in blocked or edge_id in ray_edges:
                continue
            if other in parent or other in others or other not in allowed:
                continue
            parent[other] = (current, edge_id)
            if other in theirs:
                edges = []
                cursor = other
                while parent[cursor] is not None:
                    previous, step = parent[cursor]
                    edges.append(step)
                    cursor = previous
                return cursor, other, edges[::-1]
            queue.append(other)
    return None


def ray_graph(
    component: BoundaryLinkedComponent,
    depth: int | None = None,
    *,
    threshold: int | None = None,
) -> Multigraph:
    """Graph on boundary edges; two are adjacent when their rays are joined
    by ``threshold`` disjoint paths inside the component.

    A disconnected result is retried at the certificate depth and raises
    ``DecompositionError`` if it is still disconnected there.
    """
    limit = component.depth if depth is None else depth
    if limit > component.depth:
        raise DecompositionError(
            f"Certificate only reaches depth {component.depth}, asked for {limit}.",
            depth=component.depth,
            depth_exhausted=True,
        )
    needed = threshold or settings.RAY_GRAPH_THRESHOLD
    nodes = sorted(component.boundary)
    while True:
        allowed = {v for v in component.vertices if component.truncation.levels[v] <= limit}
        M = Multigraph(nodes)
        for first, second in itertools.combinations(nodes, 2):
            if _joining_count(component, first, second, nodes, set(), allowed, needed) >= needed:
                M.add_edge(first, second)
        if len(nodes) < 2 or nx.is_connected(M.to_networkx()):
            return M
        if limit >= component.depth:
            raise DecompositionError(
                f"Ray graph of the component at end {component.end!r} is disconnected at depth {limit}.",
                depth=limit,
                depth_exhausted=True,
            )
        logger.info("ray graph at end %r disconnected at depth %d; retrying at %d", component.end, limit, component.depth)
        limit = component.depth


def _adjacent_in_ray_graph(
    component: BoundaryLinkedComponent,
    first: EdgeId,
    second: EdgeId,
    active: list[EdgeId],
    blocked: set[EdgeId],
    threshold: int,
) -> bool:
    if threshold <= 1:
        return _connecting_path(component, first, second, active, blocked) is not None
    allowed = set(component.vertices)
    return _joining_count(component, first, second, active, blocked, allowed, threshold) >= threshold


# Immersion.


def _shortcut(graph: Multigraph, start: VertexId, walk: Iterable[EdgeId]) -> tuple[list[VertexId], list[EdgeId]]:
    vertices = [start]
    kept: list[EdgeId] = []
    position = {start: 0}
    for edge_id in walk:
        nxt = graph.other_end(edge_id, vertices[-1])
        if nxt in position:
            cut_at = position[nxt]
            for dropped in vertices[cut_at + 1:]:
                del position[dropped]
            del vertices[cut_at + 1:]
            del kept[cut_at:]
            continue
        position[nxt] = len(vertices)
        vertices.append(nxt)
        kept.append(edge_id)
    return vertices, kept


def _realize_pair(
    component: BoundaryLinkedComponent,
    first: EdgeId,
    second: EdgeId,
    active: list[EdgeId],
    used: set[EdgeId],
) -> tuple[EdgeId, ...]:
    found = _connecting_path(component, first, second, active, used)
    if found is None:
        raise ImmersionError(f"Rays of boundary edges {first} and {second} are no longer joined.")
    junction_first, junction_second, connecting = found
    ray_first, ray_second = component.ray(first), component.ray(second)
    p = ray_first.vertices.index(junction_first)
    q = ray_second.vertices.index(junction_second)
    walk = list(ray_first.edges[:p]) + connecting + list(reversed(ray_second.edges[:q]))
    graph = component.truncation.graph
    vertices, edges = _shortcut(graph, ray_first.vertices[0], walk)
    if vertices[-1] != ray_second.vertices[0] or edges[0] != first or edges[-1] != second:
        raise ImmersionError(f"Could not realize the lift of {first} and {second} as a path.")
    used.update(edges)
    return tuple(edges)


def _attach_vertex(
    component: BoundaryLinkedComponent,
    triple: tuple[EdgeId, EdgeId, EdgeId],
    active: list[EdgeId],
    used: set[EdgeId],
) -> tuple[VertexId, dict[EdgeId, tuple[EdgeId, ...]]]:
    """A vertex with three edge-disjoint paths leaving the component through ``triple``."""
    graph = component.truncation.graph
    protected = set().union(*(component.ray(e).edges[1:] for e in active if e not in triple))
    allowed = [e for e in component.inner_edges() if e not in used and e not in protected] + list(triple)
    outside = {component.ray(e).vertices[0] for e in triple}
    on_rays = []
    for edge_id in triple:
        on_rays.extend(v for v in component.ray(edge_id).vertices[1:] if v not in on_rays)
    rest = sorted(
        component.vertices - set(on_rays),
        key=lambda v: (component.truncation.levels[v], vertex_key(v)),
    )
    for x in itertools.chain(on_rays, rest):
        paths = pack_paths(graph, {x: 3}, outside, edge_ids=allowed)
        if len(paths) < 3:
            continue
        by_exit = {path.edges[-1]: path for path in paths if path.edges}
        if set(by_exit) != set(triple):
            continue
        attached = {edge_id: tuple(reversed(by_exit[edge_id].edges)) for edge_id in triple}
        for path in attached.values():
            used.update(path)
        return x, attached
    raise ImmersionError(f"No vertex carries three disjoint paths to boundary edges {list(triple)!r}.")


def _lift_at(
    G: Multigraph,
    tau: TargetFunction,
    s: VertexId,
    component: BoundaryLinkedComponent,
    used: set[EdgeId],
    realization: dict[EdgeId, tuple[EdgeId, ...]],
    threshold: int,
) -> tuple[Multigraph, VertexId | None, dict[EdgeId, tuple[EdgeId, ...]]]:
    """Lift every edge at ``s`` it can; returns the graph and an attached vertex when three remain."""
    frozen: tuple[EdgeId, ...] = ()
    attached: tuple[VertexId, dict[EdgeId, tuple[EdgeId, ...]]] | None = None
    refused: set[frozenset[EdgeId]] = set()
    while True:
        live = [e for e in G.incident(s) if e not in frozen]
        if not live:
            break
        if len(live) == 3 and not frozen:
            attached = _attach_vertex(component, tuple(live), live, used)
            frozen = tuple(live)
            logger.debug("component %r: three edges left, attached %r", component.end, attached[0])
            break
        if len(live) < 3 and len(live) % 2:
            raise ImmersionError(f"Dummy vertex {s!r} is left with a single edge.")
        pair = None
        for first, second in itertools.combinations(live, 2):
            key = frozenset((first, second))
            if key in refused:
                continue
            if not _adjacent_in_ray_graph(component, first, second, live, used, threshold):
                continue
            if is_admissible(G, tau, s, first, second, loops=LOOPS_DISCARD):
                pair = (first, second)
                break
            # Non-admissible pairs stay non-admissible after further lifts.
            refused.add(key)
        if pair is not None:
            first, second = pair
            G, new_edge = lift_pair(G, s, first, second, loops=LOOPS_DISCARD)
            if new_edge is not None:
                realization[new_edge] = _realize_pair(component, first, second, live, used)
            continue
        if frozen or len(live) % 2 == 0:
            raise ImmersionError(
                f"No admissible pair at {s!r} is joined in the ray graph ({len(live)} edges left).",
                state={"s": s, "live": live, "used": sorted(used)},
            )
        lifting = lifting_graph(G, tau, s, loops=LOOPS_DISCARD, nodes=live, check=False)
        shape = classify(lifting)
        if shape.kind != LiftingClass.ISOLATED_PLUS_BALANCED_BIPARTITE:
            raise ImmersionError(
                f"Stuck at {s!r} with lifting graph of kind {shape.kind}.",
                state={"s": s, "lifting_graph": lifting.as_dict()},
            )
        star = shape.isolated
        partners = [
            next((e for e in part if _adjacent_in_ray_graph(component, star, e, live, used, threshold)), None)
            for part in shape.parts
        ]
        if None in partners:
            raise ImmersionError(f"Isolated edge {star} has no ray-graph neighbour in both classes.")
        triple = (star, partners[0], partners[1])
        attached = _attach_vertex(component, triple, live, used)
        frozen = triple
        logger.debug("component %r: reserved %r for edges %r", component.end, attached[0], triple)
    if attached is None:
        return G, None, {}
    return G, attached[0], attached[1]


def build_immersion(
    g: LazyGraph,
    decomposition: Decomposition,
    k: int,
    *,
    threshold: int | None = None,
) -> ImmersionCertificate:
    if k < 2:
        raise ImmersionError(f"Immersions are built for k >= 2, got {k}.")
    trunc = decomposition.truncation
    graph = trunc.graph
    A = decomposition.A
    G = graph.subgraph(A)
    realization: dict[EdgeId, tuple[EdgeId, ...]] = {edge_id: (edge_id,) for edge_id in G.edges}
    dummies = []
    for index, component in enumerate(decomposition.components):
        s = fresh_vertex(graph, "dummy")
        while s in G:
            s = (s[0], s[1] + 1)
        G.add_vertex(s)
        dummies.append(s)
        for edge_id, path in zip(component.boundary, component.paths):
            G.add_edge(path.vertices[0], s, edge_id=edge_id)
    try:
        tau = TargetFunction.for_graph(G, A, 2 * k)
    except LiftingError as exc:
        raise ImmersionError(f"{g.name} is not {2 * k}-edge-connected on A: {exc}") from exc
    used: set[EdgeId] = set()
    exceptional = []
    needed = threshold or settings.RAY_GRAPH_THRESHOLD
    for s, component in zip(dummies, decomposition.components):
        G, x, attached = _lift_at(G, tau, s, component, used, realization, needed)
        if x is not None:
            G.add_vertex(x)
            for edge_id in sorted(attached):
                a = component.ray(edge_id).vertices[0]
                G.remove_edge(edge_id)
                G.add_edge(a, x, edge_id=edge_id)
                realization[edge_id] = attached[edge_id]
            exceptional.append(x)
        G.remove_vertex(s)
    return ImmersionCertificate(
        H=G,
        realization=realization,
        X=frozenset(exceptional),
        A=A,
        k=k,
        truncation=trunc,
    )


# Exhaustion.


def initial_state(g: LazyGraph, *, depth_cap: int | None = None) -> ExhaustionState:
    """Stage 0: a directed cycle through the first vertex."""
    root = g.vertex_at(0)
    cap = depth_cap or settings.DEPTH_CAP
    depth = g.level(root) + settings.DEPTH_MARGIN
    while True:
        trunc = g.truncate(depth)
        graph = trunc.graph
        for first in graph.incident(root):
            other = graph.other_end(first, root)
            rest = [e for e in graph.edges if e != first]
            back = pack_paths(graph, {other: 1}, {root}, edge_ids=rest)
            if back:
                W = graph.edge_subgraph((first,) + back[0].edges)
                orientation = Orientation(W)
                orientation.assign(first, root, other)
                current = other
                for edge_id in back[0].edges:
                    nxt = graph.other_end(edge_id, current)
                    orientation.assign(edge_id, current, nxt)
                    current = nxt
                return ExhaustionState(n=0, A=frozenset({root}), W=W, orientation=orientation, prefix=(root,), depth=depth)
        if depth >= cap:
            raise DecompositionError(f"No cycle through {root!r} up to depth {cap}.", depth=cap, depth_exhausted=True)
        depth = min(depth * 2, cap)


def ear_step(g: LazyGraph, st: ExhaustionState, *, depth_cap: int | None = None) -> ExhaustionState:
    """k = 1: attach the next vertex by two edge-disjoint paths, one oriented each way."""
    target = g.vertex_at(st.n + 1)
    W = st.W.copy()
    orientation = Orientation(W, st.orientation.assignment)
    depth = st.depth
    if target not in W:
        cap = depth_cap or settings.DEPTH_CAP
        depth = max(g.level(v) for v in W.vertices | {target}) + settings.DEPTH_MARGIN
        while True:
            trunc = g.truncate(depth)
            free = [e for e in trunc.graph.edges if not W.has_edge(e)]
            paths = pack_paths(trunc.graph, {target: 2}, W.vertices, edge_ids=free)
            if len(paths) == 2:
                break
            if depth >= cap:
                raise DecompositionError(
                    f"No ear from {target!r} up to depth {cap}.", depth=cap, depth_exhausted=True
                )
            depth = min(depth * 2, cap)
        for number, path in enumerate(paths):
            for position, edge_id in enumerate(path.edges):
                u, v = path.vertices[position], path.vertices[position + 1]
                for vertex in (u, v):
                    W.add_vertex(vertex)
                W.add_edge(*trunc.graph.endpoints(edge_id), edge_id=edge_id)
                orientation = Orientation(W, orientation.assignment)
                if number == 0:
                    orientation.assign(edge_id, u, v)
                else:
                    orientation.assign(edge_id, v, u)
    new = ExhaustionState(
        n=st.n + 1,
        A=frozenset(W.vertices),
        W=W,
        orientation=orientation,
        prefix=st.prefix + (target,),
        depth=depth,
    )
    _raise_on_violations(new, 1, st)
    return new


def _orient_immersion(H: Multigraph, st: ExhaustionState, X: frozenset[VertexId], k: int) -> Orientation:
    previous = st.A
    arcs: dict[EdgeId, tuple[VertexId, VertexId]] = {}
    for edge_id, (a, b) in H.edges.items():
        if a in previous and b in previous:
            arcs[edge_id] = st.orientation.assignment.get(edge_id, (a, b))
    contracted, hub = contract(H, previous, into=fresh_vertex(H, "contracted"))
    outside = contracted.vertices - {hub}
    for piece in contracted.components(outside):
        members = piece | {hub}
        part = contracted.subgraph(members)
        mapped = {}
        for edge_id in part.edges:
            if st.orientation.is_assigned(edge_id):
                tail, head = st.orientation.assignment[edge_id]
                mapped[edge_id] = (hub if tail in previous else tail, hub if head in previous else head)
        h = Orientation(part, mapped)
        keep = sorted_vertices(members - X)
        xs = members & X

        def accept(d: Orientation, keep=keep, xs=xs) -> bool:
            if any(d.in_degree(x) < 1 or d.out_degree(x) < 1 for x in xs):
                return False
            return weakest_arc_pair(d, k, keep) is None

        oriented = extend_to_well_balanced(part, h, accept=accept)
        for edge_id, tail, head in oriented.arcs():
            a, b = H.endpoints(edge_id)
            inner = a if a in previous else b
            arcs[edge_id] = (inner if tail == hub else tail, inner if head == hub else head)
    return Orientation(H, arcs)


def _pull_back(certificate: ImmersionCertificate, oriented: Orientation) -> tuple[Multigraph, Orientation]:
    graph = certificate.truncation.graph
    W = Multigraph()
    arcs: dict[EdgeId, tuple[VertexId, VertexId]] = {}
    for edge_id, tail, _head in oriented.arcs():
        path = list(certificate.realization[edge_id])
        if tail not in graph.endpoints(path[0]):
            path.reverse()
        current = tail
        for step in path:
            u, v = graph.endpoints(step)
            W.add_vertex(u)
            W.add_vertex(v)
            W.add_edge(u, v, edge_id=step)
            nxt = graph.other_end(step, current)
            arcs[step] = (current, nxt)
            current = nxt
    return W, Orientation(W, arcs)


def state_violations(st: ExhaustionState, k: int, previous: ExhaustionState | None = None) -> list[str]:
    problems = []
    if not set(st.prefix) <= st.A:
        problems.append("A does not contain the enumerated vertices")
    if not st.A <= st.W.vertices:
        problems.append(f"A has vertices outside W: {sorted_vertices(st.A - st.W.vertices)[:5]!r}")
    if not st.orientation.is_total():
        problems.append("orientation of W is not total")
    if k >= 2:
        imbalance = st.orientation.imbalances()
        for group in st.components:
            unbalanced = {v: imbalance[v] for v in group if v in imbalance and imbalance[v]}
            if len(unbalanced) > 1 or any(abs(value) != 1 for value in unbalanced.values()):
                problems.append(f"component has unbalanced vertices {unbalanced!r}")
        covered = set().union(*st.components) if st.components else set()
        stray = [v for v in st.W.vertices - st.A - covered if imbalance[v]]
        if stray:
            problems.append(f"unbalanced vertices outside every component: {stray[:5]!r}")
    if st.orientation.is_total():
        weakest = weakest_arc_pair(st.orientation, k, st.A)
        if weakest is not None:
            x, y, value = weakest
            problems.append(f"only {value} arc-disjoint paths from {x!r} to {y!r}")
    if previous is not None:
        if not previous.A <= st.A:
            problems.append("A shrank")
        if not set(previous.W.edges) <= set(st.W.edges):
            problems.append("W shrank")
        if not st.orientation.extends(previous.orientation):
            problems.append("orientation of the previous stage was changed")
    return problems


def _raise_on_violations(st: ExhaustionState, k: int, previous: ExhaustionState | None = None) -> None:
    problems = state_violations(st, k, previous)
    if problems:
        raise InvariantViolation("; ".join(problems), state={"stage": st.as_dict(), "violations": problems})


def inductive_step(
    g: LazyGraph,
    st: ExhaustionState,
    k: int,
    *,
    depth_cap: int | None = None,
) -> ExhaustionState:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}.")
    if k == 1:
        return ear_step(g, st, depth_cap=depth_cap)
    cap = depth_cap or settings.DEPTH_CAP
    target = g.vertex_at(st.n + 1)
    prime = st.W.vertices | {target}
    depth = None
    while True:
        decomposition = decompose(g, prime, depth=depth, depth_cap=cap)
        try:
            certificate = build_immersion(g, decomposition, k)
            break
        except ImmersionError as exc:
            if decomposition.depth >= cap:
                raise
            depth = min(decomposition.depth * 2, cap)
            logger.info("immersion on %s failed at depth %d (%s); retrying at %d", g.name, decomposition.depth, exc, depth)
    problems = certificate.violations()
    if problems:
        raise InvariantViolation(
            "; ".join(problems),
            state={"stage": st.as_dict(), "immersion": certificate.as_dict(), "violations": problems},
        )
    try:
        oriented = _orient_immersion(certificate.H, st, certificate.X, k)
    except OrientationError as exc:
        raise InvariantViolation(
            str(exc), state={"stage": st.as_dict(), "immersion": certificate.as_dict()}
        ) from exc
    weakest = weakest_arc_pair(oriented, k, decomposition.A)
    if weakest is not None:
        x, y, value = weakest
        raise InvariantViolation(
            f"Oriented immersion has only {value} arc-disjoint paths from {x!r} to {y!r}.",
            state={"stage": st.as_dict(), "immersion": certificate.as_dict()},
        )
    W, orientation = _pull_back(certificate, oriented)
    new = ExhaustionState(
        n=st.n + 1,
        A=decomposition.A,
        W=W,
        orientation=orientation,
        prefix=st.prefix + (target,),
        components=tuple(component.vertices for component in decomposition.components),
        X=certificate.X,
        depth=decomposition.depth,
    )
    _raise_on_violations(new, k, st)
    logger.info(
        "%s stage %d: |A| = %d, |E(W)| = %d, |X| = %d, depth %d",
        g.name, new.n, len(new.A), new.W.number_of_edges(), len(new.X), new.depth,
    )
    return new


def _witness_cut(g: LazyGraph, k: int):
    trunc = g.truncate(settings.DEPTH_MARGIN + 2)
    inner = trunc.vertices_up_to(trunc.depth - 1)
    cut = violating_cut(trunc.graph, 2 * k, inner)
    return cut if cut is not None else cut_of(trunc.graph, {g.root})


def run_simulation(
    g: LazyGraph,
    k: int,
    rounds: int,
    *,
    depth_cap: int | None = None,
) -> SimulationReport:
    if rounds < 0 or rounds > settings.MAX_ROUNDS:
        raise ValueError(f"rounds must be between 0 and {settings.MAX_ROUNDS}, got {rounds}.")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}.")
    if g.edge_connectivity < 2 * k:
        raise ConnectivityPreconditionError(k, _witness_cut(g, k))
    state = initial_state(g, depth_cap=depth_cap)
    _raise_on_violations(state, k)
    initial = state
    stages = []
    for _round in range(rounds):
        state = inductive_step(g, state, k, depth_cap=depth_cap)
        stages.append(state)
    return SimulationReport(generator=g.name, k=k, initial=initial, stages=tuple(stages))


def figure1_fixed_set_check(
    depth: int,
    *,
    max_level: int = 2,
    sizes: Iterable[int] = (2, 3),
) -> Figure1Report:
    """For each small A near the roots, find a frontier component with at least
    four boundary edges that packs at most three paths into any single end region."""
    g = figure1()
    trunc = g.truncate(depth)
    graph = trunc.graph
    candidates = sorted_vertices(trunc.vertices_up_to(max_level))
    resolution = max_level + 1
    failures = []
    witnesses = {}
    checked = 0
    for size in sizes:
        for A in itertools.combinations(candidates, size):
            checked += 1
            witness = None
            for piece in graph.components(graph.vertices - set(A)):
                if not piece & trunc.frontier:
                    continue
                edges = boundary(graph, piece)
                if len(edges) < 4:
                    continue
                starts: Counter[VertexId] = Counter()
                for edge_id in edges:
                    u, v = graph.endpoints(edge_id)
                    starts[u if u in piece else v] += 1
                inner = [e for e, (u, v) in graph.edges.items() if u in piece and v in piece]
                best = 0
                for end in g.oracle.classify_component(piece, depth, resolution):
                    packed = pack_paths(graph, dict(starts), g.region(end, depth) & piece, edge_ids=inner)
                    best = max(best, len(packed))
                    if best > 3:
                        break
                if best <= 3:
                    witness = {"boundary": len(edges), "capacity": best, "component_size": len(piece)}
                    break
            if witness is None:
                failures.append(A)
            else:
                witnesses[A] = witness
    return Figure1Report(depth=depth, checked=checked, failures=tuple(failures), witnesses=witnesses)
