from __future__ import annotations

from collections.abc import Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import networkx as nx

VertexId = Hashable
EdgeId = int


class GraphError(ValueError):
    """Raised when an edit would break a multigraph invariant."""


class LoopError(GraphError):
    pass


class UnknownVertexError(GraphError):
    pass


class UnknownEdgeError(GraphError):
    pass


def vertex_key(vertex: VertexId) -> tuple:
    """Total order over the vertex ids used in this package (ints, strings, tuples)."""
    if isinstance(vertex, bool):
        return (0, int(vertex), "")
    if isinstance(vertex, int):
        return (0, vertex, "")
    if isinstance(vertex, str):
        return (1, 0, vertex)
    if isinstance(vertex, tuple):
        return (2, 0, "", tuple(vertex_key(part) for part in vertex))
    return (3, 0, repr(vertex))


def sorted_vertices(vertices: Iterable[VertexId]) -> list[VertexId]:
    return sorted(vertices, key=vertex_key)


class Multigraph:
    """Finite loopless multigraph whose edges keep their integer ids across edits."""

    def __init__(
        self,
        vertices: Iterable[VertexId] = (),
        edges: Mapping[EdgeId, tuple[VertexId, VertexId]] | None = None,
        *,
        labels: Mapping[VertexId, str] | None = None,
        next_edge_id: int = 0,
    ) -> None:
        self._vertices: set[VertexId] = set()
        self._edges: dict[EdgeId, tuple[VertexId, VertexId]] = {}
        self._incidence: dict[VertexId, set[EdgeId]] = {}
        self._next_edge_id = 0
        self.labels: dict[VertexId, str] = {}
        for vertex in vertices:
            self.add_vertex(vertex)
        for edge_id, (u, v) in sorted((edges or {}).items()):
            self.add_edge(u, v, edge_id=edge_id)
        for vertex, label in (labels or {}).items():
            if vertex in self._vertices:
                self.labels[vertex] = label
        self._next_edge_id = max(self._next_edge_id, next_edge_id)

    def __repr__(self) -> str:
        return f"Multigraph(|V|={len(self._vertices)}, |E|={len(self._edges)})"

    def __contains__(self, vertex: VertexId) -> bool:
        return vertex in self._vertices

    @property
    def vertices(self) -> frozenset[VertexId]:
        return frozenset(self._vertices)

    @property
    def edges(self) -> Mapping[EdgeId, tuple[VertexId, VertexId]]:
        return MappingProxyType(self._edges)

    @property
    def next_edge_id(self) -> int:
        return self._next_edge_id

    def number_of_vertices(self) -> int:
        return len(self._vertices)

    def number_of_edges(self) -> int:
        return len(self._edges)

    def has_vertex(self, vertex: VertexId) -> bool:
        return vertex in self._vertices

    def has_edge(self, edge_id: EdgeId) -> bool:
        return edge_id in self._edges

    def add_vertex(self, vertex: VertexId, label: str | None = None) -> None:
        if vertex not in self._vertices:
            self._vertices.add(vertex)
            self._incidence[vertex] = set()
        if label is not None:
            self.labels[vertex] = label

    def add_edge(self, u: VertexId, v: VertexId, *, edge_id: EdgeId | None = None) -> EdgeId:
        if u == v:
            raise LoopError(f"Refusing to add a loop at {u!r}.")
        for endpoint in (u, v):
            if endpoint not in self._vertices:
                raise UnknownVertexError(f"Unknown vertex {endpoint!r}.")
        if edge_id is None:
            edge_id = self._next_edge_id
        elif edge_id in self._edges:
            raise GraphError(f"Edge id {edge_id} is already in use.")
        self._edges[edge_id] = (u, v)
        self._incidence[u].add(edge_id)
        self._incidence[v].add(edge_id)
        self._next_edge_id = max(self._next_edge_id, edge_id + 1)
        return edge_id

    def remove_edge(self, edge_id: EdgeId) -> tuple[VertexId, VertexId]:
        u, v = self.endpoints(edge_id)
        del self._edges[edge_id]
        self._incidence[u].discard(edge_id)
        self._incidence[v].discard(edge_id)
        return u, v

    def remove_vertex(self, vertex: VertexId) -> None:
        if vertex not in self._vertices:
            raise UnknownVertexError(f"Unknown vertex {vertex!r}.")
        for edge_id in list(self._incidence[vertex]):
            self.remove_edge(edge_id)
        self._vertices.discard(vertex)
        del self._incidence[vertex]
        self.labels.pop(vertex, None)

    def endpoints(self, edge_id: EdgeId) -> tuple[VertexId, VertexId]:
        try:
            return self._edges[edge_id]
        except KeyError as exc:
            raise UnknownEdgeError(f"Unknown edge {edge_id}.") from exc

    def other_end(self, edge_id: EdgeId, vertex: VertexId) -> VertexId:
        u, v = self.endpoints(edge_id)
        if vertex == u:
            return v
        if vertex == v:
            return u
        raise GraphError(f"Edge {edge_id} is not incident with {vertex!r}.")

    def incident(self, vertex: VertexId) -> list[EdgeId]:
        if vertex not in self._vertices:
            raise UnknownVertexError(f"Unknown vertex {vertex!r}.")
        return sorted(self._incidence[vertex])

    def degree(self, vertex: VertexId) -> int:
        if vertex not in self._vertices:
            raise UnknownVertexError(f"Unknown vertex {vertex!r}.")
        return len(self._incidence[vertex])

    def neighbors(self, vertex: VertexId) -> list[tuple[EdgeId, VertexId]]:
        return [(edge_id, self.other_end(edge_id, vertex)) for edge_id in self.incident(vertex)]

    def edges_between(self, u: VertexId, v: VertexId) -> list[EdgeId]:
        return sorted(edge_id for edge_id in self._incidence.get(u, ()) if v in self._edges[edge_id])

    def odd_vertices(self) -> list[VertexId]:
        return sorted_vertices(v for v in self._vertices if len(self._incidence[v]) % 2)

    def copy(self) -> Multigraph:
        return Multigraph(
            self._vertices,
            self._edges,
            labels=self.labels,
            next_edge_id=self._next_edge_id,
        )

    def subgraph(self, vertices: Iterable[VertexId]) -> Multigraph:
        keep = set(vertices) & self._vertices
        return Multigraph(
            keep,
            {eid: (u, v) for eid, (u, v) in self._edges.items() if u in keep and v in keep},
            labels={v: label for v, label in self.labels.items() if v in keep},
            next_edge_id=self._next_edge_id,
        )

    def edge_subgraph(self, edge_ids: Iterable[EdgeId], *, vertices: Iterable[VertexId] = ()) -> Multigraph:
        edges = {edge_id: self.endpoints(edge_id) for edge_id in edge_ids}
        keep = set(vertices)
        for u, v in edges.values():
            keep.update((u, v))
        return Multigraph(
            keep,
            edges,
            labels={v: label for v, label in self.labels.items() if v in keep},
            next_edge_id=self._next_edge_id,
        )

    def components(self, vertices: Iterable[VertexId] | None = None) -> list[frozenset[VertexId]]:
        """Connected components of the subgraph induced by ``vertices`` (default: all)."""
        allowed = self._vertices if vertices is None else set(vertices) & self._vertices
        seen: set[VertexId] = set()
        found: list[frozenset[VertexId]] = []
        for start in sorted_vertices(allowed):
            if start in seen:
                continue
            component = {start}
            stack = [start]
            while stack:
                current = stack.pop()
                for edge_id in self._incidence[current]:
                    other = self.other_end(edge_id, current)
                    if other in allowed and other not in component:
                        component.add(other)
                        stack.append(other)
            seen |= component
            found.append(frozenset(component))
        return found

    def to_networkx(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(sorted_vertices(self._vertices))
        for edge_id in sorted(self._edges):
            u, v = self._edges[edge_id]
            graph.add_edge(u, v, key=edge_id)
        return graph


@dataclass(frozen=True)
class Cut:
    side: frozenset[VertexId]
    boundary: frozenset[EdgeId]
    crossing: frozenset[EdgeId] = field(default_factory=frozenset)

    @property
    def size(self) -> int:
        return len(self.boundary)

    def as_dict(self) -> dict:
        return {
            "side": sorted_vertices(self.side),
            "boundary": sorted(self.boundary),
            "size": self.size,
        }


class Orientation:
    """Partial assignment of a direction to edges of ``base``."""

    def __init__(
        self,
        base: Multigraph,
        assignment: Mapping[EdgeId, tuple[VertexId, VertexId]] | None = None,
    ) -> None:
        self.base = base
        self._assignment: dict[EdgeId, tuple[VertexId, VertexId]] = {}
        for edge_id, (tail, head) in (assignment or {}).items():
            self.assign(edge_id, tail, head)

    def __repr__(self) -> str:
        return f"Orientation({len(self._assignment)}/{self.base.number_of_edges()} arcs)"

    @property
    def assignment(self) -> Mapping[EdgeId, tuple[VertexId, VertexId]]:
        return MappingProxyType(self._assignment)

    def assign(self, edge_id: EdgeId, tail: VertexId, head: VertexId) -> None:
        u, v = self.base.endpoints(edge_id)
        if (tail, head) not in {(u, v), (v, u)}:
            raise GraphError(f"({tail!r}, {head!r}) is not an orientation of edge {edge_id}.")
        self._assignment[edge_id] = (tail, head)

    def orient_from(self, edge_id: EdgeId, tail: VertexId) -> None:
        self.assign(edge_id, tail, self.base.other_end(edge_id, tail))

    def is_assigned(self, edge_id: EdgeId) -> bool:
        return edge_id in self._assignment

    def is_total(self) -> bool:
        return len(self._assignment) == self.base.number_of_edges() and all(
            edge_id in self._assignment for edge_id in self.base.edges
        )

    def unassigned(self) -> list[EdgeId]:
        return sorted(edge_id for edge_id in self.base.edges if edge_id not in self._assignment)

    def tail(self, edge_id: EdgeId) -> VertexId:
        return self._assignment[edge_id][0]

    def head(self, edge_id: EdgeId) -> VertexId:
        return self._assignment[edge_id][1]

    def arcs(self) -> Iterator[tuple[EdgeId, VertexId, VertexId]]:
        for edge_id in sorted(self._assignment):
            tail, head = self._assignment[edge_id]
            yield edge_id, tail, head

    def out_degree(self, vertex: VertexId) -> int:
        return sum(1 for tail, _head in self._assignment.values() if tail == vertex)

    def in_degree(self, vertex: VertexId) -> int:
        return sum(1 for _tail, head in self._assignment.values() if head == vertex)

    def imbalances(self) -> dict[VertexId, int]:
        """out-degree minus in-degree over assigned arcs, for every base vertex."""
        balance = {vertex: 0 for vertex in self.base.vertices}
        for tail, head in self._assignment.values():
            balance[tail] += 1
            balance[head] -= 1
        return balance

    def restricted_to(self, edge_ids: Iterable[EdgeId]) -> Orientation:
        keep = set(edge_ids)
        base = self.base.edge_subgraph(keep)
        return Orientation(base, {eid: arc for eid, arc in self._assignment.items() if eid in keep})

    def extends(self, other: Orientation) -> bool:
        return all(self._assignment.get(edge_id) == arc for edge_id, arc in other.assignment.items())

    def copy(self) -> Orientation:
        return Orientation(self.base, self._assignment)

    def to_networkx(self) -> nx.MultiDiGraph:
        digraph = nx.MultiDiGraph()
        digraph.add_nodes_from(sorted_vertices(self.base.vertices))
        for edge_id, tail, head in self.arcs():
            digraph.add_edge(tail, head, key=edge_id)
        return digraph


def add_edge(g: Multigraph, u: VertexId, v: VertexId) -> EdgeId:
    return g.add_edge(u, v)


def lift(
    g: Multigraph,
    s: VertexId,
    e1: EdgeId,
    e2: EdgeId,
    *,
    discard_loop: bool = False,
) -> Multigraph:
    """Replace the edges ``s-x`` and ``s-y`` by one new edge ``x-y``.

    The new edge takes ``g.next_edge_id``. When ``x == y`` the lift would create a
    loop; that is an error unless ``discard_loop`` is set, in which case both
    edges are simply deleted.
    """
    if e1 == e2:
        raise GraphError("Cannot lift an edge with itself.")
    x = _non_s_end(g, s, e1)
    y = _non_s_end(g, s, e2)
    if x == y and not discard_loop:
        raise LoopError(f"Edges {e1} and {e2} share the end {x!r}; lifting them would create a loop.")
    lifted = g.copy()
    lifted.remove_edge(e1)
    lifted.remove_edge(e2)
    if x != y:
        lifted.add_edge(x, y, edge_id=g.next_edge_id)
    return lifted


def _non_s_end(g: Multigraph, s: VertexId, edge_id: EdgeId) -> VertexId:
    u, v = g.endpoints(edge_id)
    if s not in (u, v):
        raise GraphError(f"Edge {edge_id} is not incident with {s!r}.")
    return v if u == s else u


def fresh_vertex(g: Multigraph, base: str = "block") -> VertexId:
    index = 0
    while (base, index) in g:
        index += 1
    return (base, index)


def contract(
    g: Multigraph,
    block: Iterable[VertexId],
    *,
    into: VertexId | None = None,
) -> tuple[Multigraph, VertexId]:
    """Replace ``block`` by one vertex; crossing edges keep their ids, inner edges go."""
    members = set(block)
    if not members:
        raise GraphError("Cannot contract an empty block.")
    missing = members - g.vertices
    if missing:
        raise UnknownVertexError(f"Unknown vertices {sorted_vertices(missing)!r}.")
    target = into if into is not None else fresh_vertex(g)
    if target in g and target not in members:
        raise GraphError(f"Contraction target {target!r} already exists outside the block.")
    contracted = Multigraph(
        (v for v in g.vertices if v not in members),
        labels={v: label for v, label in g.labels.items() if v not in members},
        next_edge_id=g.next_edge_id,
    )
    contracted.add_vertex(target)
    for edge_id in sorted(g.edges):
        u, v = g.edges[edge_id]
        u_in, v_in = u in members, v in members
        if u_in and v_in:
            continue
        contracted.add_edge(target if u_in else u, target if v_in else v, edge_id=edge_id)
    return contracted, target


def boundary(g: Multigraph, X: Iterable[VertexId]) -> frozenset[EdgeId]:
    side = set(X)
    return frozenset(
        edge_id for edge_id, (u, v) in g.edges.items() if (u in side) != (v in side)
    )


def crossing(g: Multigraph, X: Iterable[VertexId], Y: Iterable[VertexId]) -> frozenset[EdgeId]:
    """E(X, Y): edges with one end in X and the other in Y."""
    left, right = set(X), set(Y)
    return frozenset(
        edge_id
        for edge_id, (u, v) in g.edges.items()
        if (u in left and v in right) or (u in right and v in left)
    )


def cut_of(g: Multigraph, X: Iterable[VertexId]) -> Cut:
    side = frozenset(X)
    edges = boundary(g, side)
    return Cut(side=side, boundary=edges, crossing=edges)
