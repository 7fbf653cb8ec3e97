from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np

import dot_theme

from orientations.services.multigraph import (
    EdgeId,
    GraphError,
    Multigraph,
    Orientation,
    VertexId,
    sorted_vertices,
)

SCHEMA_VERSION = 1


class GraphFormatError(ValueError):
    pass


def vertex_to_json(vertex: VertexId) -> Any:
    if isinstance(vertex, tuple):
        return [vertex_to_json(part) for part in vertex]
    return vertex


def vertex_from_json(raw: Any) -> VertexId:
    if isinstance(raw, list):
        return tuple(vertex_from_json(part) for part in raw)
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise GraphFormatError(f"Vertex ids must be integers, strings or arrays, got {raw!r}.")
    return raw


def parse_vertex(token: str) -> VertexId:
    """A vertex id from the command line: JSON when it parses, the raw string otherwise."""
    try:
        raw = json.loads(token)
    except json.JSONDecodeError:
        return token
    return vertex_from_json(raw)


def graph_to_dict(g: Multigraph, orientation: Orientation | None = None) -> dict:
    assigned = orientation.assignment if orientation is not None else {}
    edges = []
    directed = []
    for edge_id in sorted(g.edges):
        if edge_id in assigned:
            tail, head = assigned[edge_id]
            directed.append({"id": edge_id, "tail": vertex_to_json(tail), "head": vertex_to_json(head)})
        else:
            u, v = g.edges[edge_id]
            edges.append({"id": edge_id, "u": vertex_to_json(u), "v": vertex_to_json(v)})
    data = {
        "schema": SCHEMA_VERSION,
        "vertices": [vertex_to_json(v) for v in sorted_vertices(g.vertices)],
        "edges": edges,
        "directed_edges": directed,
    }
    if g.labels:
        data["labels"] = [
            [vertex_to_json(v), g.labels[v]] for v in sorted_vertices(g.labels)
        ]
    return data


def graph_from_dict(data: Any) -> tuple[Multigraph, Orientation | None]:
    """Parse a schema-1 graph document.

    Returns the graph and, when ``directed_edges`` is non-empty, the partial
    orientation it describes.
    """
    if not isinstance(data, dict):
        raise GraphFormatError("A graph document must be a JSON object.")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise GraphFormatError(f"Unsupported graph schema {schema!r}; expected {SCHEMA_VERSION}.")
    if "vertices" not in data:
        raise GraphFormatError("Missing 'vertices'.")
    g = Multigraph(vertex_from_json(raw) for raw in _list(data, "vertices"))
    arcs: list[tuple[EdgeId, VertexId, VertexId]] = []
    try:
        for item in _list(data, "edges"):
            edge_id, u, v = _edge_fields(item, "u", "v")
            g.add_edge(u, v, edge_id=edge_id)
        for item in _list(data, "directed_edges"):
            edge_id, tail, head = _edge_fields(item, "tail", "head")
            g.add_edge(tail, head, edge_id=edge_id)
            arcs.append((edge_id, tail, head))
        for pair in _list(data, "labels"):
            if not isinstance(pair, list) or len(pair) != 2 or not isinstance(pair[1], str):
                raise GraphFormatError(f"Malformed label entry {pair!r}.")
            vertex = vertex_from_json(pair[0])
            if vertex not in g:
                raise GraphFormatError(f"Label for unknown vertex {pair[0]!r}.")
            g.labels[vertex] = pair[1]
    except GraphError as exc:
        raise GraphFormatError(str(exc)) from exc
    if not arcs:
        return g, None
    orientation = Orientation(g)
    for edge_id, tail, head in arcs:
        orientation.assign(edge_id, tail, head)
    return g, orientation


def _list(data: dict, key: str) -> list:
    value = data.get(key, [])
    if not isinstance(value, list):
        raise GraphFormatError(f"'{key}' must be an array.")
    return value


def _edge_fields(item: Any, first: str, second: str) -> tuple[EdgeId, VertexId, VertexId]:
    if not isinstance(item, dict):
        raise GraphFormatError(f"Edge entries must be objects, got {item!r}.")
    missing = [key for key in ("id", first, second) if key not in item]
    if missing:
        raise GraphFormatError(f"Edge entry {item!r} is missing {', '.join(missing)}.")
    edge_id = item["id"]
    if isinstance(edge_id, bool) or not isinstance(edge_id, int) or edge_id < 0:
        raise GraphFormatError(f"Edge ids must be nonnegative integers, got {edge_id!r}.")
    return edge_id, vertex_from_json(item[first]), vertex_from_json(item[second])


def load_document(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphFormatError(f"Cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path} is not valid JSON: {exc}") from exc


def graph_document(data: Any) -> Any:
    """The graph inside a command output or failure witness, or ``data`` itself."""
    if isinstance(data, dict) and "vertices" not in data:
        for key in ("result", "graph", "instance", "witness"):
            if isinstance(data.get(key), dict):
                return graph_document(data[key])
    return data


def load_graph(path: str | Path) -> tuple[Multigraph, Orientation | None]:
    return graph_from_dict(graph_document(load_document(path)))


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return [vertex_to_json(v) for v in sorted_vertices(value)]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Any, *, indent: int | None = 2) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    separators = (",", ": ") if indent is not None else (",", ":")
    text = json.dumps(data, sort_keys=True, indent=indent, separators=separators, default=_jsonable)
    return text + "\n"


def write_json(path: str | Path, data: Any) -> Path:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps(data), encoding="utf-8")
    return target


def digest(data: Any) -> str:
    return hashlib.sha256(dumps(data, indent=None).encode("utf-8")).hexdigest()


def graph_digest(g: Multigraph) -> str:
    return digest(graph_to_dict(g))


# Graphviz output.


def _dot_id(vertex: VertexId) -> str:
    return json.dumps(json.dumps(vertex_to_json(vertex), separators=(",", ":")))


def _dot_label(g: Multigraph, vertex: VertexId) -> str:
    if vertex in g.labels:
        return g.labels[vertex]
    if isinstance(vertex, tuple):
        return ",".join(str(part) for part in vertex)
    return str(vertex)


def to_dot(
    g: Multigraph,
    orientation: Orientation | None = None,
    *,
    name: str = "arcorient",
    vertex_roles: dict[VertexId, str] | None = None,
    edge_roles: dict[EdgeId, str] | None = None,
    legend: Iterable[str] = (),
) -> str:
    """Render ``g`` as DOT, oriented edges as arcs, colours from ``dot_theme``."""
    vertex_roles = vertex_roles or {}
    edge_roles = edge_roles or {}
    assigned = orientation.assignment if orientation is not None else {}
    kind = "digraph" if orientation is not None else "graph"
    connector = "->" if orientation is not None else "--"
    lines = [f"{kind} {json.dumps(name)} {{", "  node [shape=circle, style=filled];"]
    for vertex in sorted_vertices(g.vertices):
        role = vertex_roles.get(vertex, dot_theme.VERTEX)
        label = json.dumps(_dot_label(g, vertex))
        lines.append(f"  {_dot_id(vertex)} [label={label}, {dot_theme.vertex_attributes(role)}];")
    for edge_id in sorted(g.edges):
        if edge_id in assigned:
            tail, head = assigned[edge_id]
            role = edge_roles.get(edge_id, dot_theme.ARC)
            extra = ""
        else:
            tail, head = g.edges[edge_id]
            role = edge_roles.get(edge_id, dot_theme.EDGE)
            extra = ", dir=none" if orientation is not None else ""
        lines.append(
            f"  {_dot_id(tail)} {connector} {_dot_id(head)} "
            f"[label=\"{edge_id}\", {dot_theme.edge_attributes(role)}{extra}];"
        )
    roles = list(legend)
    if roles:
        lines.append(dot_theme.legend_dot(roles))
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(path: str | Path, text: str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    return target
