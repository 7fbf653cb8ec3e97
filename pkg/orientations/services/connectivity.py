from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from orientations.services.multigraph import (
    Cut,
    EdgeId,
    Multigraph,
    Orientation,
    VertexId,
    boundary,
    sorted_vertices,
    vertex_key,
)

_SUPER_SOURCE = ("__arcorient_source__",)
_SUPER_SINK = ("__arcorient_sink__",)


class ConnectivityError(ValueError):
    pass


@dataclass(frozen=True)
class FlowPath:
    vertices: tuple[VertexId, ...]
    edges: tuple[EdgeId, ...]

    @property
    def start(self) -> VertexId:
        return self.vertices[0]

    @property
    def end(self) -> VertexId:
        return self.vertices[-1]


@dataclass(frozen=True)
class FlowCertificate:
    source: VertexId
    sink: VertexId
    value: int
    paths: tuple[FlowPath, ...]
    min_cut: Cut

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "sink": self.sink,
            "value": self.value,
            "paths": [list(path.edges) for path in self.paths],
            "min_cut": self.min_cut.as_dict(),
        }


@dataclass
class _Network:
    digraph: nx.DiGraph
    arc_edges: dict[tuple[VertexId, VertexId], list[EdgeId]]
    directed: bool


def _undirected_network(g: Multigraph, edge_ids: Iterable[EdgeId] | None = None) -> _Network:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(sorted_vertices(g.vertices))
    arc_edges: dict[tuple[VertexId, VertexId], list[EdgeId]] = defaultdict(list)
    for edge_id in sorted(g.edges if edge_ids is None else edge_ids):
        u, v = g.endpoints(edge_id)
        arc_edges[(u, v)].append(edge_id)
        arc_edges[(v, u)].append(edge_id)
    for (a, b), ids in arc_edges.items():
        digraph.add_edge(a, b, capacity=len(ids))
    return _Network(digraph, dict(arc_edges), directed=False)


def _directed_network(d: Orientation) -> _Network:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(sorted_vertices(d.base.vertices))
    arc_edges: dict[tuple[VertexId, VertexId], list[EdgeId]] = defaultdict(list)
    for edge_id, tail, head in d.arcs():
        arc_edges[(tail, head)].append(edge_id)
    for (a, b), ids in arc_edges.items():
        digraph.add_edge(a, b, capacity=len(ids))
    return _Network(digraph, dict(arc_edges), directed=True)


def _run_flow(network: _Network, source, sink, cutoff: int | None = None) -> tuple[int, dict]:
    kwargs = {"flow_func": edmonds_karp}
    if cutoff is not None:
        kwargs["cutoff"] = cutoff
    value, flow = nx.maximum_flow(network.digraph, source, sink, **kwargs)
    return int(value), flow


def _flow_value(network: _Network, source, sink, cutoff: int | None = None) -> int:
    kwargs = {"flow_func": edmonds_karp}
    if cutoff is not None:
        kwargs["cutoff"] = cutoff
    return int(nx.maximum_flow_value(network.digraph, source, sink, **kwargs))


def _residual(network: _Network, flow: dict, a, b) -> float:
    digraph = network.digraph
    capacity = 0.0
    if digraph.has_edge(a, b):
        capacity = digraph[a][b].get("capacity", math.inf) - flow[a].get(b, 0)
    if digraph.has_edge(b, a):
        capacity += flow[b].get(a, 0)
    return capacity


def _residual_reachable(network: _Network, flow: dict, start) -> set:
    digraph = network.digraph
    seen = {start}
    stack = [start]
    while stack:
        current = stack.pop()
        for other in list(digraph.successors(current)) + list(digraph.predecessors(current)):
            if other not in seen and _residual(network, flow, current, other) > 0:
                seen.add(other)
                stack.append(other)
    return seen


def _residual_coreachable(network: _Network, flow: dict, target) -> set:
    digraph = network.digraph
    seen = {target}
    stack = [target]
    while stack:
        current = stack.pop()
        for other in list(digraph.successors(current)) + list(digraph.predecessors(current)):
            if other not in seen and _residual(network, flow, other, current) > 0:
                seen.add(other)
                stack.append(other)
    return seen


def _decompose(network: _Network, flow: dict, source, sink, value: int) -> list[FlowPath]:
    net: dict[tuple, int] = {}
    for a, targets in flow.items():
        for b, amount in targets.items():
            if amount > 0:
                net[(a, b)] = int(amount)
    if not network.directed:
        for (a, b), amount in list(net.items()):
            back = net.get((b, a), 0)
            if amount and back:
                cancel = min(amount, back)
                net[(a, b)] -= cancel
                net[(b, a)] -= cancel

    units: dict = defaultdict(list)
    for a, b in sorted(net, key=lambda arc: (vertex_key(arc[0]), vertex_key(arc[1])), reverse=True):
        units[a].extend([b] * net[(a, b)])
    pool = {arc: list(ids) for arc, ids in network.arc_edges.items()}

    paths: list[FlowPath] = []
    for _ in range(value):
        walk = [source]
        edges: list[EdgeId | None] = []
        position = {source: 0}
        while walk[-1] != sink:
            current = walk[-1]
            nxt = units[current].pop()
            ids = pool.get((current, nxt))
            edge_id = ids.pop(0) if ids else None
            if nxt in position:
                cut_at = position[nxt]
                for dropped in walk[cut_at + 1:]:
                    del position[dropped]
                del walk[cut_at + 1:]
                del edges[cut_at:]
                continue
            position[nxt] = len(walk)
            walk.append(nxt)
            edges.append(edge_id)
        vertices = tuple(v for v in walk if v not in (_SUPER_SOURCE, _SUPER_SINK))
        paths.append(FlowPath(vertices, tuple(e for e in edges if e is not None)))
    return paths


def _require_pair(g: Multigraph, x: VertexId, y: VertexId) -> None:
    if x == y:
        raise ConnectivityError(f"Connectivity needs two distinct vertices, got {x!r} twice.")
    for vertex in (x, y):
        if vertex not in g:
            raise ConnectivityError(f"Unknown vertex {vertex!r}.")


def edge_connectivity(g: Multigraph, x: VertexId, y: VertexId) -> FlowCertificate:
    """λ(x, y) with edge-disjoint paths and the minimum cut whose side is inclusion-minimal."""
    _require_pair(g, x, y)
    network = _undirected_network(g)
    value, flow = _run_flow(network, x, y)
    paths = _decompose(network, flow, x, y, value)
    side = frozenset(_residual_reachable(network, flow, x))
    edges = boundary(g, side)
    if len(edges) != value:
        raise ConnectivityError(f"Cut of size {len(edges)} does not match flow value {value}.")
    return FlowCertificate(x, y, value, tuple(paths), Cut(side=side, boundary=edges, crossing=edges))


def local_edge_connectivity(
    g: Multigraph,
    x: VertexId,
    y: VertexId,
    *,
    cutoff: int | None = None,
    edge_ids: Iterable[EdgeId] | None = None,
) -> int:
    _require_pair(g, x, y)
    return _flow_value(_undirected_network(g, edge_ids), x, y, cutoff)


def lambda_star(g: Multigraph, x: VertexId, y: VertexId) -> int:
    return 2 * (local_edge_connectivity(g, x, y) // 2)


def _require_total(d: Orientation) -> None:
    if not d.is_total():
        raise ConnectivityError(
            f"Arc connectivity needs a total orientation; {len(d.unassigned())} edges are unassigned."
        )


def arc_connectivity(d: Orientation, x: VertexId, y: VertexId, *, cutoff: int | None = None) -> int:
    _require_total(d)
    _require_pair(d.base, x, y)
    return _flow_value(_directed_network(d), x, y, cutoff)


def arc_certificate(d: Orientation, x: VertexId, y: VertexId) -> FlowCertificate:
    _require_total(d)
    _require_pair(d.base, x, y)
    network = _directed_network(d)
    value, flow = _run_flow(network, x, y)
    paths = _decompose(network, flow, x, y, value)
    side = frozenset(_residual_reachable(network, flow, x))
    leaving = frozenset(
        edge_id for edge_id, tail, head in d.arcs() if tail in side and head not in side
    )
    return FlowCertificate(x, y, value, tuple(paths), Cut(side=side, boundary=boundary(d.base, side), crossing=leaving))


def violating_cut(
    g: Multigraph,
    k: int,
    vertices: Iterable[VertexId] | None = None,
) -> Cut | None:
    """A cut of size < k separating two of ``vertices`` (default: all), or None."""
    members = sorted_vertices(g.vertices if vertices is None else vertices)
    if len(members) < 2 or k <= 0:
        return None
    network = _undirected_network(g)
    root = members[0]
    for other in members[1:]:
        if _flow_value(network, root, other, k) < k:
            return edge_connectivity(g, root, other).min_cut
    return None


def is_k_edge_connected(g: Multigraph, k: int) -> bool:
    # λ(x, z) >= min(λ(x, y), λ(y, z)), so a star of flows from one root decides it.
    return violating_cut(g, k) is None


def connected_within(g: Multigraph, vertices: Iterable[VertexId], k: int) -> bool:
    return violating_cut(g, k, vertices) is None


def weakest_arc_pair(
    d: Orientation,
    k: int,
    vertices: Iterable[VertexId] | None = None,
) -> tuple[VertexId, VertexId, int] | None:
    """An ordered pair among ``vertices`` with α < k, with its α, or None."""
    _require_total(d)
    members = sorted_vertices(d.base.vertices if vertices is None else vertices)
    if len(members) < 2 or k <= 0:
        return None
    network = _directed_network(d)
    root = members[0]
    for other in members[1:]:
        for x, y in ((root, other), (other, root)):
            value = _flow_value(network, x, y, k)
            if value < k:
                return x, y, value
    return None


def is_k_arc_connected(d: Orientation, k: int) -> bool:
    return weakest_arc_pair(d, k) is None


def bridges(g: Multigraph) -> frozenset[EdgeId]:
    found = set()
    for u, v in nx.bridges(g.to_networkx()):
        found.add(g.edges_between(u, v)[0])
    return frozenset(found)


def _super_network(
    g: Multigraph,
    sources: Mapping[VertexId, int | None],
    sinks: Iterable[VertexId],
    edge_ids: Iterable[EdgeId] | None,
) -> _Network:
    network = _undirected_network(g, edge_ids)
    digraph = network.digraph
    for vertex, capacity in sources.items():
        if capacity is None:
            digraph.add_edge(_SUPER_SOURCE, vertex)
        else:
            digraph.add_edge(_SUPER_SOURCE, vertex, capacity=capacity)
    for vertex in sinks:
        digraph.add_edge(vertex, _SUPER_SINK)
    return network


def min_cut_separating(
    g: Multigraph,
    source_set: Iterable[VertexId],
    sink_set: Iterable[VertexId],
    *,
    edge_ids: Iterable[EdgeId] | None = None,
    minimal: str = "source",
) -> Cut:
    """Minimum edge cut with ``source_set`` inside the side and ``sink_set`` outside.

    ``minimal="source"`` returns the side reachable from the sources in the
    residual graph; ``minimal="sink"`` returns the largest side instead.
    """
    sources, sinks = set(source_set), set(sink_set)
    if not sources or not sinks:
        raise ConnectivityError("Both vertex sets must be nonempty.")
    if sources & sinks:
        raise ConnectivityError(f"Vertex sets intersect in {sorted_vertices(sources & sinks)!r}.")
    unknown = (sources | sinks) - g.vertices
    if unknown:
        raise ConnectivityError(f"Unknown vertices {sorted_vertices(unknown)!r}.")
    network = _super_network(g, {v: None for v in sources}, sinks, edge_ids)
    _value, flow = _run_flow(network, _SUPER_SOURCE, _SUPER_SINK)
    if minimal == "source":
        side = _residual_reachable(network, flow, _SUPER_SOURCE)
    elif minimal == "sink":
        side = set(network.digraph.nodes) - _residual_coreachable(network, flow, _SUPER_SINK)
    else:
        raise ConnectivityError(f"Unknown tie-break {minimal!r}.")
    side.discard(_SUPER_SOURCE)
    side.discard(_SUPER_SINK)
    allowed = set(g.edges if edge_ids is None else edge_ids)
    edges = frozenset(e for e in boundary(g, side) if e in allowed)
    return Cut(side=frozenset(side), boundary=edges, crossing=edges)


def pack_paths(
    g: Multigraph,
    sources: Mapping[VertexId, int | None],
    sinks: Iterable[VertexId],
    *,
    edge_ids: Iterable[EdgeId] | None = None,
) -> list[FlowPath]:
    """Maximum family of edge-disjoint paths from ``sources`` into ``sinks``.

    ``sources`` maps a start vertex to how many paths may start there
    (None for unbounded).
    """
    sink_set = set(sinks)
    if not sources or not sink_set:
        return []
    unbounded = [v for v, capacity in sources.items() if capacity is None and v in sink_set]
    if unbounded:
        raise ConnectivityError(f"Unbounded sources are also sinks: {sorted_vertices(unbounded)!r}.")
    network = _super_network(g, sources, sink_set, edge_ids)
    value, flow = _run_flow(network, _SUPER_SOURCE, _SUPER_SINK)
    return _decompose(network, flow, _SUPER_SOURCE, _SUPER_SINK, value)


def _capacity_graph(g: Multigraph, vertices: Iterable[VertexId]) -> nx.Graph:
    members = set(vertices)
    graph = nx.Graph()
    graph.add_nodes_from(sorted_vertices(members))
    for u, v in g.edges.values():
        if u in members and v in members:
            if graph.has_edge(u, v):
                graph[u][v]["capacity"] += 1
            else:
                graph.add_edge(u, v, capacity=1)
    return graph


def all_pairs_edge_connectivity(g: Multigraph) -> dict[tuple[VertexId, VertexId], int]:
    """λ for every ordered pair, read off a Gomory-Hu tree per component."""
    table: dict[tuple[VertexId, VertexId], int] = {}
    components = g.components()
    for first, second in ((a, b) for a in components for b in components if a is not b):
        for x in first:
            for y in second:
                table[(x, y)] = 0
    for component in components:
        if len(component) < 2:
            continue
        tree = nx.gomory_hu_tree(_capacity_graph(g, component), flow_func=edmonds_karp)
        for root in component:
            bottleneck = {root: math.inf}
            stack = [root]
            while stack:
                current = stack.pop()
                for other in tree.neighbors(current):
                    if other not in bottleneck:
                        bottleneck[other] = min(bottleneck[current], tree[current][other]["weight"])
                        stack.append(other)
            for other, value in bottleneck.items():
                if other != root:
                    table[(root, other)] = int(value)
    return table
