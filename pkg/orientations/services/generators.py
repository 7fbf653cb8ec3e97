from __future__ import annotations

import itertools
import logging
from collections import deque
from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass, field

from orientations.services.multigraph import EdgeId, Multigraph, VertexId, sorted_vertices, vertex_key

logger = logging.getLogger(__name__)

EndId = Hashable


class UnknownGeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class Truncation:
    graph: Multigraph
    frontier: frozenset[VertexId]
    depth: int
    levels: Mapping[VertexId, int] = field(repr=False)

    def vertices_up_to(self, level: int) -> frozenset[VertexId]:
        return frozenset(v for v, lvl in self.levels.items() if lvl <= level)


@dataclass(frozen=True)
class EndOracle:
    """Declared ends of a generator.

    ``region(end, depth)`` is the set of level-``depth`` vertices the end's
    canonical ray passes through; depth-bounded certificates aim there.
    """

    ends_fn: Callable[[int], list[EndId]]
    region_fn: Callable[[EndId, int], frozenset[VertexId]]

    def ends(self, resolution: int) -> list[EndId]:
        return self.ends_fn(max(resolution, 0))

    def region(self, end: EndId, depth: int) -> frozenset[VertexId]:
        return self.region_fn(end, depth)

    def classify_component(self, component: Iterable[VertexId], depth: int, resolution: int) -> list[EndId]:
        members = set(component)
        return [end for end in self.ends(resolution) if self.region(end, depth) & members]


class LazyGraph:
    """Locally finite graph given by a neighbour function, with stable edge ids.

    Each base adjacency is repeated ``multiplicity`` times. Edge ids are handed
    out the first time an edge is seen and never change afterwards.
    """

    def __init__(
        self,
        name: str,
        root: VertexId,
        adjacent: Callable[[VertexId], list[VertexId]],
        level: Callable[[VertexId], int],
        oracle: EndOracle,
        *,
        multiplicity: int = 1,
        base_connectivity: int,
        label: Callable[[VertexId], str] | None = None,
    ) -> None:
        if multiplicity < 1:
            raise ValueError(f"multiplicity must be positive, got {multiplicity}.")
        self.name = name
        self.root = root
        self._adjacent = adjacent
        self._level = level
        self.oracle = oracle
        self.multiplicity = multiplicity
        self.edge_connectivity = base_connectivity * multiplicity
        self._label = label
        self._edge_ids: dict[tuple, EdgeId] = {}
        self._endpoints: dict[EdgeId, tuple[VertexId, VertexId]] = {}
        self._enumeration: list[VertexId] = []
        self._enumerated_depth = -1

    def __repr__(self) -> str:
        return f"LazyGraph({self.name!r})"

    def level(self, vertex: VertexId) -> int:
        return self._level(vertex)

    def label(self, vertex: VertexId) -> str | None:
        return self._label(vertex) if self._label else None

    def _edge_id(self, u: VertexId, v: VertexId, copy: int) -> EdgeId:
        a, b = sorted((u, v), key=vertex_key)
        key = (a, b, copy)
        edge_id = self._edge_ids.get(key)
        if edge_id is None:
            edge_id = len(self._edge_ids)
            self._edge_ids[key] = edge_id
            self._endpoints[edge_id] = (a, b)
        return edge_id

    def neighbors(self, vertex: VertexId) -> list[tuple[EdgeId, VertexId]]:
        found = []
        for other in sorted_vertices(self._adjacent(vertex)):
            for copy in range(self.multiplicity):
                found.append((self._edge_id(vertex, other, copy), other))
        return found

    def endpoints(self, edge_id: EdgeId) -> tuple[VertexId, VertexId]:
        return self._endpoints[edge_id]

    @property
    def edge_id_ceiling(self) -> int:
        return len(self._edge_ids)

    def truncate(self, depth: int) -> Truncation:
        """Every vertex of level <= ``depth`` with the edges among them."""
        if depth < 0:
            raise ValueError(f"depth must be nonnegative, got {depth}.")
        levels = {self.root: self.level(self.root)}
        queue = deque([self.root])
        edges: dict[EdgeId, tuple[VertexId, VertexId]] = {}
        while queue:
            current = queue.popleft()
            for edge_id, other in self.neighbors(current):
                other_level = self.level(other)
                if other_level > depth:
                    continue
                edges[edge_id] = self._endpoints[edge_id]
                if other not in levels:
                    levels[other] = other_level
                    queue.append(other)
        labels = {v: self.label(v) for v in levels} if self._label else None
        graph = Multigraph(levels, edges, labels=labels, next_edge_id=self.edge_id_ceiling)
        frontier = frozenset(v for v, lvl in levels.items() if lvl == depth)
        return Truncation(graph=graph, frontier=frontier, depth=depth, levels=levels)

    def vertex_at(self, index: int) -> VertexId:
        """The ``index``-th vertex in (level, id) order."""
        depth = max(self._enumerated_depth, 0)
        while len(self._enumeration) <= index:
            ball = self.truncate(depth)
            self._enumeration = sorted(ball.levels, key=lambda v: (ball.levels[v], vertex_key(v)))
            self._enumerated_depth = depth
            depth += 1
        return self._enumeration[index]

    def region(self, end: EndId, depth: int) -> frozenset[VertexId]:
        return self.oracle.region(end, depth)


# Grid Z^2.

def _grid_adjacent(v: VertexId) -> list[VertexId]:
    x, y = v
    return [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]


def _grid_level(v: VertexId) -> int:
    return abs(v[0]) + abs(v[1])


def _grid_sphere(depth: int) -> frozenset[VertexId]:
    if depth == 0:
        return frozenset({(0, 0)})
    sphere = set()
    for x in range(-depth, depth + 1):
        rest = depth - abs(x)
        sphere.add((x, rest))
        sphere.add((x, -rest))
    return frozenset(sphere)


def grid(multiplicity: int = 1) -> LazyGraph:
    oracle = EndOracle(
        ends_fn=lambda _resolution: ["infinity"],
        region_fn=lambda _end, depth: _grid_sphere(depth),
    )
    return LazyGraph(
        _generator_name("grid", multiplicity),
        (0, 0),
        _grid_adjacent,
        _grid_level,
        oracle,
        multiplicity=multiplicity,
        base_connectivity=4,
    )


# Ladder N x {0, 1}.

def _ladder_adjacent(v: VertexId) -> list[VertexId]:
    rung, side = v
    found = [(rung + 1, side), (rung, 1 - side)]
    if rung > 0:
        found.append((rung - 1, side))
    return found


def ladder(multiplicity: int = 1) -> LazyGraph:
    oracle = EndOracle(
        ends_fn=lambda _resolution: ["infinity"],
        region_fn=lambda _end, depth: frozenset({(depth, 0), (depth, 1)}),
    )
    return LazyGraph(
        _generator_name("ladder", multiplicity),
        (0, 0),
        _ladder_adjacent,
        lambda v: v[0],
        oracle,
        multiplicity=multiplicity,
        base_connectivity=2,
    )


# Double ray Z.

def double_ray(multiplicity: int = 1) -> LazyGraph:
    oracle = EndOracle(
        ends_fn=lambda _resolution: ["+", "-"],
        region_fn=lambda end, depth: frozenset({depth if end == "+" else -depth}),
    )
    return LazyGraph(
        _generator_name("double-ray", multiplicity),
        0,
        lambda v: [v - 1, v + 1],
        abs,
        oracle,
        multiplicity=multiplicity,
        base_connectivity=1,
    )


# Two binary trees joined by rungs (t,0)(t,1) and cross edges (t0,0)(t1,1).
# The end through prefix p stands for the branch p000...

def _figure1_adjacent(v: VertexId) -> list[VertexId]:
    address, copy = v
    found = [(address + (0,), copy), (address + (1,), copy), (address, 1 - copy)]
    if address:
        found.append((address[:-1], copy))
        if copy == 0 and address[-1] == 0:
            found.append((address[:-1] + (1,), 1))
        if copy == 1 and address[-1] == 1:
            found.append((address[:-1] + (0,), 0))
    return found


def _figure1_address(end: EndId, depth: int) -> tuple[int, ...]:
    prefix = tuple(end)[:depth]
    return prefix + (0,) * (depth - len(prefix))


def _figure1_region(end: EndId, depth: int) -> frozenset[VertexId]:
    address = _figure1_address(end, depth)
    return frozenset({(address, 0), (address, 1)})


def _figure1_label(v: VertexId) -> str:
    address, copy = v
    return f"{''.join(map(str, address)) or 'r'}.{copy}"


def figure1(multiplicity: int = 1) -> LazyGraph:
    oracle = EndOracle(
        ends_fn=lambda resolution: list(itertools.product((0, 1), repeat=resolution)),
        region_fn=_figure1_region,
    )
    return LazyGraph(
        _generator_name("figure1", multiplicity),
        ((), 0),
        _figure1_adjacent,
        lambda v: len(v[0]),
        oracle,
        multiplicity=multiplicity,
        base_connectivity=3,
        label=_figure1_label,
    )


# Comb: a spine ray with an infinite tooth at every spine vertex.

def _comb_adjacent(v: VertexId) -> list[VertexId]:
    kind, position, height = v
    if kind == "spine":
        found = [("spine", position + 1, 0), ("tooth", position, 1)]
        if position > 0:
            found.append(("spine", position - 1, 0))
        return found
    below = ("spine", position, 0) if height == 1 else ("tooth", position, height - 1)
    return [below, ("tooth", position, height + 1)]


def _comb_region(end: EndId, depth: int) -> frozenset[VertexId]:
    if end == "spine":
        return frozenset({("spine", depth, 0)})
    _kind, position = end
    if depth <= position:
        return frozenset({("spine", depth, 0)})
    return frozenset({("tooth", position, depth - position)})


def comb(multiplicity: int = 1) -> LazyGraph:
    oracle = EndOracle(
        ends_fn=lambda resolution: ["spine"] + [("tooth", i) for i in range(resolution)],
        region_fn=_comb_region,
    )
    return LazyGraph(
        _generator_name("comb", multiplicity),
        ("spine", 0, 0),
        _comb_adjacent,
        lambda v: v[1] + v[2],
        oracle,
        multiplicity=multiplicity,
        base_connectivity=1,
    )


def _generator_name(base: str, multiplicity: int) -> str:
    prefix = {1: "", 2: "doubled-", 4: "quadrupled-"}.get(multiplicity, f"x{multiplicity}-")
    return f"{prefix}{base}"


GENERATORS: dict[str, Callable[[], LazyGraph]] = {
    "grid": lambda: grid(),
    "ladder": lambda: ladder(),
    "double-ray": lambda: double_ray(),
    "figure1": lambda: figure1(),
    "comb": lambda: comb(),
    "doubled-grid": lambda: grid(2),
    "doubled-ladder": lambda: ladder(2),
    "doubled-double-ray": lambda: double_ray(2),
    "doubled-figure1": lambda: figure1(2),
    "quadrupled-double-ray": lambda: double_ray(4),
    "quadrupled-comb": lambda: comb(4),
}


def get_generator(name: str) -> LazyGraph:
    try:
        factory = GENERATORS[name]
    except KeyError:
        raise UnknownGeneratorError(name) from None
    return factory()
