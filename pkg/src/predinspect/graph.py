"""Directed labelled scene graphs with posed, boxed vertices.

Vertices carry a world pose (position + rotation) and an axis-aligned bounding
box centred on the position.  Edges are directed and labelled; parallel edges
are allowed only when their labels differ.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    pass


class OverlappingInstances(GraphError):
    pass


class ParseError(GraphError):
    pass


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(p)):
            raise GraphError("pose position must be finite")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise GraphError("pose rotation must be orthonormal with det +1")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def at(cls, position, rotation=None) -> "Pose":
        return cls(np.asarray(position, dtype=float), np.eye(3) if rotation is None else rotation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.position
        return m


@dataclass(frozen=True)
class Vertex:
    id: int
    label: str
    pose: Pose
    half_extents: np.ndarray

    def __post_init__(self):
        he = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(he < 0) or not np.all(np.isfinite(he)):
            raise GraphError(f"vertex {self.id}: half extents must be finite and >= 0")
        if not self.label:
            raise GraphError(f"vertex {self.id}: empty label")
        object.__setattr__(self, "half_extents", he)
        object.__setattr__(self, "id", int(self.id))

    @property
    def position(self) -> np.ndarray:
        return self.pose.position

    @property
    def rotation(self) -> np.ndarray:
        return self.pose.rotation

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.pose.position - self.half_extents, self.pose.position + self.half_extents

    def with_id(self, new_id: int) -> "Vertex":
        return Vertex(new_id, self.label, self.pose, self.half_extents)


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    label: str


class SceneGraph:
    """A directed, labelled graph of posed objects.

    Construction goes through :meth:`add_vertex` / :meth:`add_edge`; once
    handed to the mining or matching code the graph is treated as read-only.
    """

    def __init__(self):
        self._vertices: dict[int, Vertex] = {}
        self._edges: dict[Edge, None] = {}
        self._out: dict[int, list[Edge]] = {}
        self._in: dict[int, list[Edge]] = {}

    # -- construction ---------------------------------------------------

    def add_vertex(self, vid, label, position, rotation=None, half_extents=(0.0, 0.0, 0.0)) -> Vertex:
        v = Vertex(vid, label, Pose.at(position, rotation), np.asarray(half_extents, dtype=float))
        return self.insert_vertex(v)

    def insert_vertex(self, v: Vertex) -> Vertex:
        if v.id in self._vertices:
            raise GraphError(f"duplicate vertex id {v.id}")
        self._vertices[v.id] = v
        self._out[v.id] = []
        self._in[v.id] = []
        return v

    def add_edge(self, src: int, dst: int, label: str, *, merge: bool = False) -> Edge | None:
        src, dst = int(src), int(dst)
        if src == dst:
            raise GraphError(f"self loop on vertex {src}")
        if src not in self._vertices or dst not in self._vertices:
            raise GraphError(f"edge {src}->{dst} references an unknown vertex")
        e = Edge(src, dst, label)
        if e in self._edges:
            if merge:
                return None
            raise GraphError(f"duplicate edge {src}->{dst} [{label}]")
        self._edges[e] = None
        self._out[src].append(e)
        self._in[dst].append(e)
        return e

    def replace_vertex(self, v: Vertex) -> None:
        """Swap in a new pose/box for an existing vertex id, keeping its edges."""
        if v.id not in self._vertices:
            raise GraphError(f"unknown vertex id {v.id}")
        self._vertices[v.id] = v

    def remove_edge(self, e: Edge) -> None:
        del self._edges[e]
        self._out[e.src].remove(e)
        self._in[e.dst].remove(e)

    def remove_vertex(self, vid: int) -> None:
        for e in list(self._out[vid]) + list(self._in[vid]):
            if e in self._edges:
                self.remove_edge(e)
        del self._vertices[vid], self._out[vid], self._in[vid]

    # -- queries --------------------------------------------------------

    @property
    def vertices(self) -> dict[int, Vertex]:
        return self._vertices

    @property
    def edges(self) -> list[Edge]:
        return list(self._edges)

    def vertex(self, vid: int) -> Vertex:
        return self._vertices[vid]

    def has_edge(self, e: Edge) -> bool:
        return e in self._edges

    def out_edges(self, vid: int) -> list[Edge]:
        return self._out[vid]

    def in_edges(self, vid: int) -> list[Edge]:
        return self._in[vid]

    def incident(self, vid: int) -> list[Edge]:
        return self._out[vid] + self._in[vid]

    def degree(self, vid: int) -> int:
        return len(self._out[vid]) + len(self._in[vid])

    def neighbors(self, vid: int) -> set[int]:
        return {e.dst for e in self._out[vid]} | {e.src for e in self._in[vid]}

    def num_vertices(self) -> int:
        return len(self._vertices)

    def num_edges(self) -> int:
        return len(self._edges)

    def __len__(self) -> int:
        return len(self._vertices)

    def labels(self) -> list[str]:
        return [v.label for v in self._vertices.values()]

    def next_id(self) -> int:
        return max(self._vertices, default=-1) + 1

    def subgraph(self, vertex_ids, edges=None) -> "SceneGraph":
        """Induced subgraph, or the given edge subset when ``edges`` is passed."""
        vids = set(vertex_ids)
        sg = SceneGraph()
        for vid in sorted(vids):
            sg.insert_vertex(self._vertices[vid])
        if edges is None:
            edges = [e for e in self._edges if e.src in vids and e.dst in vids]
        for e in sorted(edges):
            sg.add_edge(e.src, e.dst, e.label)
        return sg

    def copy(self) -> "SceneGraph":
        return self.subgraph(self._vertices, self._edges)

    def connected_components(self) -> list[set[int]]:
        seen: set[int] = set()
        comps = []
        for start in sorted(self._vertices):
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                u = stack.pop()
                for w in self.neighbors(u):
                    if w not in comp:
                        comp.add(w)
                        stack.append(w)
            seen |= comp
            comps.append(comp)
        return comps

    def same_as(self, other: "SceneGraph", atol: float = 1e-9) -> bool:
        if set(self._vertices) != set(other._vertices) or set(self._edges) != set(other._edges):
            return False
        for vid, v in self._vertices.items():
            w = other._vertices[vid]
            if v.label != w.label:
                return False
            if not (np.allclose(v.position, w.position, atol=atol)
                    and np.allclose(v.rotation, w.rotation, atol=atol)
                    and np.allclose(v.half_extents, w.half_extents, atol=atol)):
                return False
        return True

    def __repr__(self):
        return f"SceneGraph(|V|={self.num_vertices()}, |E|={self.num_edges()})"


def description_length(g: SceneGraph) -> int:
    return g.num_vertices() + g.num_edges()


@dataclass
class Instance:
    """One occurrence of a substructure inside a host graph."""

    vertex_ids: frozenset
    edges: frozenset
    # pattern vertex id -> host vertex id; None when the instance is its own pattern
    mapping: dict | None = None

    def __post_init__(self):
        self.vertex_ids = frozenset(self.vertex_ids)
        self.edges = frozenset(self.edges)
        for e in self.edges:
            if e.src not in self.vertex_ids or e.dst not in self.vertex_ids:
                raise GraphError("instance edge leaves the instance")

    def overlaps(self, other: "Instance") -> bool:
        return not self.vertex_ids.isdisjoint(other.vertex_ids)

    def size(self) -> int:
        return len(self.vertex_ids) + len(self.edges)

    def key(self) -> tuple:
        return (tuple(sorted(self.vertex_ids)), tuple(sorted(self.edges)))

    def as_graph(self, host: SceneGraph) -> SceneGraph:
        return host.subgraph(self.vertex_ids, self.edges)


@dataclass
class Substructure:
    pattern: SceneGraph
    instances: list
    compression: float = float("inf")

    def __post_init__(self):
        if not self.instances:
            raise GraphError("substructure needs at least one instance")

    def __repr__(self):
        labels = sorted(self.pattern.labels())
        return (f"Substructure({labels}, |E|={self.pattern.num_edges()}, "
                f"instances={len(self.instances)}, gamma={self.compression:.4f})")


@dataclass
class Level:
    graph: SceneGraph
    substructure: Substructure
    pattern_label: str


@dataclass
class Hierarchy:
    base: SceneGraph
    levels: list = field(default_factory=list)

    def __len__(self):
        return len(self.levels)

    def top_graph(self) -> SceneGraph:
        if not self.levels:
            return self.base
        return compress(self.levels[-1].graph, self.levels[-1].substructure,
                        self.levels[-1].pattern_label)


def covering_box(vertices) -> tuple[np.ndarray, np.ndarray]:
    """Centroid of positions and the smallest box centred there that holds every bbox."""
    pos = np.array([v.position for v in vertices])
    centroid = pos.mean(axis=0)
    lo = np.min([v.position - v.half_extents for v in vertices], axis=0)
    hi = np.max([v.position + v.half_extents for v in vertices], axis=0)
    half = np.maximum(hi - centroid, centroid - lo)
    return centroid, half


def compress(g: SceneGraph, s: Substructure, label: str = "SUB") -> SceneGraph:
    """Replace every instance of ``s`` in ``g`` with one vertex labelled ``label``.

    Edges crossing an instance boundary are re-attached to the replacement
    vertex; duplicates produced by the re-attachment are merged and edges left
    inside a single instance are absorbed.
    """
    owner: dict[int, int] = {}
    for idx, inst in enumerate(s.instances):
        for vid in inst.vertex_ids:
            if vid in owner:
                raise OverlappingInstances(f"vertex {vid} belongs to instances {owner[vid]} and {idx}")
            owner[vid] = idx

    out = SceneGraph()
    for vid in sorted(g.vertices):
        if vid not in owner:
            out.insert_vertex(g.vertex(vid))
    base = g.next_id()
    new_ids = []
    for idx, inst in enumerate(s.instances):
        members = [g.vertex(v) for v in sorted(inst.vertex_ids)]
        centroid, half = covering_box(members)
        nid = base + idx
        out.add_vertex(nid, label, centroid, np.eye(3), half)
        new_ids.append(nid)

    def remap(vid):
        return new_ids[owner[vid]] if vid in owner else vid

    for e in sorted(g.edges):
        a, b = remap(e.src), remap(e.dst)
        if a == b:
            continue
        out.add_edge(a, b, e.label, merge=True)
    return out


def graph_from_edges(labels: dict, edges, positions: dict | None = None) -> SceneGraph:
    """Small-graph helper: ``labels`` maps id -> label, ``edges`` holds (src, dst[, label])."""
    g = SceneGraph()
    for vid, lab in labels.items():
        pos = (0.0, 0.0, 0.0) if positions is None else positions[vid]
        g.add_vertex(vid, lab, pos)
    for e in edges:
        src, dst = e[0], e[1]
        g.add_edge(src, dst, e[2] if len(e) > 2 else "rel")
    return g


def unique_id_blocks(*graphs: SceneGraph):
    """Id offsets that make several graphs' vertex ids disjoint."""
    offset = 0
    for g in graphs:
        yield offset
        offset += g.next_id()


def pairwise(iterable):
    return itertools.combinations(iterable, 2)


# -- serialisation -----------------------------------------------------------

def graph_to_dict(g: SceneGraph) -> dict:
    verts = []
    for vid in sorted(g.vertices):
        v = g.vertex(vid)
        verts.append({
            "id": v.id,
            "label": v.label,
            "position": [float(x) for x in v.position],
            "rotation": [float(x) for x in v.rotation.reshape(-1)],
            "half_extents": [float(x) for x in v.half_extents],
        })
    edges = [{"src": e.src, "dst": e.dst, "label": e.label} for e in sorted(g.edges)]
    return {"vertices": verts, "edges": edges}


def _field(obj, key, where, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    val = obj[key]
    if kind == "int":
        if isinstance(val, bool) or not isinstance(val, int):
            raise ParseError(f"{where}.{key}: expected integer, got {val!r}")
    elif kind == "str":
        if not isinstance(val, str) or not val:
            raise ParseError(f"{where}.{key}: expected non-empty string")
    else:
        n = kind
        if (not isinstance(val, list) or len(val) != n
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)):
            raise ParseError(f"{where}.{key}: expected {n} numbers")
    return val


def graph_from_dict(d) -> SceneGraph:
    if not isinstance(d, dict):
        raise ParseError("top level: expected an object")
    for key in ("vertices", "edges"):
        if key not in d:
            raise ParseError(f"top level: missing field '{key}'")
        if not isinstance(d[key], list):
            raise ParseError(f"{key}: expected a list")
    g = SceneGraph()
    for i, rec in enumerate(d["vertices"]):
        where = f"vertices[{i}]"
        vid = _field(rec, "id", where, "int")
        label = _field(rec, "label", where, "str")
        pos = _field(rec, "position", where, 3)
        rot = _field(rec, "rotation", where, 9)
        half = _field(rec, "half_extents", where, 3)
        try:
            g.add_vertex(vid, label, pos, np.reshape(rot, (3, 3)), half)
        except GraphError as exc:
            raise ParseError(f"{where}: {exc}") from exc
    for i, rec in enumerate(d["edges"]):
        where = f"edges[{i}]"
        src = _field(rec, "src", where, "int")
        dst = _field(rec, "dst", where, "int")
        label = _field(rec, "label", where, "str")
        try:
            g.add_edge(src, dst, label)
        except GraphError as exc:
            raise ParseError(f"{where}: {exc}") from exc
    return g


def save_graph(g: SceneGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_dict(g), fh, indent=1)
        fh.write("\n")


def load_graph(path) -> SceneGraph:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return graph_from_dict(d)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc
