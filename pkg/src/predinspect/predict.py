"""Predict unseen parts of a scene graph from mined patterns.

Entry vertices (e.g. manholes) are duplicated into complementary vertices so
that an instance records both the entry it was reached through and the one
leading onwards.  A complementary vertex that ends up in no instance is a
loose anchor: aligning a pattern's entry vertex onto it places a copy of the
pattern in unexplored space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Hierarchy, SceneGraph, Vertex
from .matching import RigidTransform
from .mining import expand_to_base

COMPLEMENT_EDGE = "complement"
DEFAULT_ENTRY_CLASSES = ("manhole",)
_EPS = 1e-9


# -- boxes -------------------------------------------------------------------

def _axis_overlaps(b1, b2):
    """Per-axis overlap factors, or None when the boxes do not intersect.

    Flat boxes (zero extent on an axis) are planes: a plane intersects a solid
    box only strictly inside it, two planes only when coplanar, and that axis
    then drops out of the measure.
    """
    lo1, hi1 = np.asarray(b1[0], float), np.asarray(b1[1], float)
    lo2, hi2 = np.asarray(b2[0], float), np.asarray(b2[1], float)
    axes = []
    for a in range(3):
        flat1 = hi1[a] - lo1[a] <= _EPS
        flat2 = hi2[a] - lo2[a] <= _EPS
        if flat1 and flat2:
            if abs(lo1[a] - lo2[a]) > _EPS:
                return None
        elif flat1:
            if not lo2[a] + _EPS < lo1[a] < hi2[a] - _EPS:
                return None
        elif flat2:
            if not lo1[a] + _EPS < lo2[a] < hi1[a] - _EPS:
                return None
        else:
            length = min(hi1[a], hi2[a]) - max(lo1[a], lo2[a])
            if length <= _EPS:
                return None
            axes.append((a, length))
    return axes


def intersection_measure(b1, b2) -> tuple[float, float, float]:
    """(intersection, measure of b1, measure of b2) over the axes where both boxes have extent."""
    axes = _axis_overlaps(b1, b2)
    if axes is None:
        return 0.0, 0.0, 0.0
    inter = m1 = m2 = 1.0
    for a, length in axes:
        inter *= length
        m1 *= float(b1[1][a] - b1[0][a])
        m2 *= float(b2[1][a] - b2[0][a])
    return inter, m1, m2


def boxes_intersect(b1, b2) -> bool:
    return _axis_overlaps(b1, b2) is not None


def overlap_test(b1, b2, kappa: float) -> bool:
    """True iff the intersection covers at least ``kappa`` of the smaller box."""
    if _axis_overlaps(b1, b2) is None:
        return False
    inter, m1, m2 = intersection_measure(b1, b2)
    small = min(m1, m2)
    if small <= 0:
        return True
    return inter >= kappa * small - 1e-12


def transformed_box(tf: RigidTransform, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box around the transformed corners of (lo, hi)."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    pts = tf.apply(corners)
    return pts.min(axis=0), pts.max(axis=0)


# -- graph modification --------------------------------------------------------

@dataclass
class ModifiedGraph:
    graph: SceneGraph
    # instance vertex sets after the three modification steps
    instances: list
    # original entry vertex -> its complementary vertex
    complement: dict = field(default_factory=dict)

    def __post_init__(self):
        self.original_of = {c: e for e, c in self.complement.items()}

    def is_complementary(self, vid) -> bool:
        return vid in self.original_of

    def partner(self, vid):
        if vid in self.complement:
            return self.complement[vid]
        return self.original_of.get(vid)

    def owner(self, vid):
        for i, inst in enumerate(self.instances):
            if vid in inst:
                return i
        return None

    def loose_entries(self, entry_classes) -> list:
        inside = set().union(*self.instances) if self.instances else set()
        return sorted(v for v, vx in self.graph.vertices.items()
                      if vx.label in entry_classes and v not in inside)


def _rehome(g: SceneGraph, old: int, new: int, keep) -> None:
    """Move every edge between ``old`` and a vertex selected by ``keep`` onto ``new``."""
    for e in list(g.incident(old)):
        other = e.dst if e.src == old else e.src
        if other == new or not keep(other):
            continue
        g.remove_edge(e)
        if e.src == old:
            g.add_edge(new, other, e.label, merge=True)
        else:
            g.add_edge(other, new, e.label, merge=True)


def modify_graph(level_graph: SceneGraph, substructure, entry_classes=DEFAULT_ENTRY_CLASSES) -> ModifiedGraph:
    entry_classes = set(entry_classes)
    g = level_graph.copy()
    insts = [set(inst.vertex_ids) for inst in substructure.instances]
    owner = {v: i for i, inst in enumerate(insts) for v in inst}
    complement: dict = {}
    nxt = [g.next_id()]

    def duplicate(vid):
        v = g.vertex(vid)
        c = nxt[0]
        nxt[0] += 1
        g.insert_vertex(Vertex(c, v.label, v.pose, v.half_extents))
        complement[vid] = c
        return c

    def is_entry(vid):
        return g.vertex(vid).label in entry_classes

    originals = set(complement)

    # step 1: entry vertices inside an instance get an outside twin holding external edges
    for vid in sorted(owner):
        if not is_entry(vid):
            continue
        i = owner[vid]
        c = duplicate(vid)
        _rehome(g, vid, c, lambda o, i=i: owner.get(o) != i)
        g.add_edge(vid, c, COMPLEMENT_EDGE)
    originals = set(complement)
    comps = set(complement.values())

    # step 2: an external entry vertex touching an instance gets an inside twin
    for vid in sorted(level_graph.vertices):
        if vid in owner or not is_entry(vid) or vid in complement:
            continue
        touching = sorted({owner[o] for o in g.neighbors(vid) if o in owner and o not in comps})
        for i in touching:
            c = duplicate(vid) if vid not in complement else complement[vid]
            if c in owner:
                break
            _rehome(g, vid, c, lambda o, i=i: owner.get(o) == i)
            g.add_edge(vid, c, COMPLEMENT_EDGE, merge=True)
            insts[i].add(c)
            owner[c] = i
            break
    originals |= set(complement)
    comps = set(complement.values())

    # step 3: an instance reaching an outside twin through a non-entry vertex absorbs it
    for c in sorted(comps):
        if c in owner:
            continue
        partner = next(e for e, cc in complement.items() if cc == c)
        for o in sorted(g.neighbors(c)):
            i = owner.get(o)
            if i is None or o == partner:
                continue
            insts[i].add(c)
            owner[c] = i
            break
    return ModifiedGraph(g, insts, complement)


# -- prediction -----------------------------------------------------------------

@dataclass
class PredictedVertex:
    label: str
    position: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray
    # id of the base-graph vertex this copy was made from
    source: int

    def bbox(self):
        return self.position - self.half_extents, self.position + self.half_extents

    def as_dict(self) -> dict:
        return {"label": self.label, "position": [float(x) for x in self.position],
                "rotation": [float(x) for x in self.rotation.reshape(-1)],
                "half_extents": [float(x) for x in self.half_extents], "source": int(self.source)}


@dataclass
class PredictionCandidate:
    anchor: int
    pattern_entry: int
    transform: RigidTransform
    overlap_score: int
    predicted_vertices: list
    level: int = 0
    # level-graph vertices confirmed by same-label overlaps
    confirmed: list = field(default_factory=list)
    # base-graph id of the anchor (anchors may be twins created by modify_graph)
    anchor_base: int | None = None

    def by_label(self, label: str) -> list:
        return [p for p in self.predicted_vertices if p.label == label]

    def as_dict(self) -> dict:
        return {"anchor": self.anchor, "anchor_base": self.anchor_base, "pattern_entry": self.pattern_entry,
                "level": self.level, "overlap_score": self.overlap_score,
                "transform": [[float(x) for x in row] for row in self.transform.matrix()],
                "confirmed": [int(c) for c in self.confirmed],
                "predicted_vertices": [p.as_dict() for p in self.predicted_vertices]}


def anchor_transform(pattern_vertex: Vertex, anchor_vertex: Vertex) -> RigidTransform:
    """Rigid transform putting the pattern entry's pose exactly onto the anchor's pose."""
    r = anchor_vertex.rotation @ pattern_vertex.rotation.T
    return RigidTransform(r, anchor_vertex.position - r @ pattern_vertex.position)


def _representative(mg: ModifiedGraph, entry_classes) -> int | None:
    best, best_n = None, 0
    for i, inst in enumerate(mg.instances):
        n = sum(1 for v in inst if mg.graph.vertex(v).label in entry_classes)
        if n > best_n:
            best, best_n = i, n
    return best


def _base_ids(h: Hierarchy, level: int, mg: ModifiedGraph, vid: int) -> set:
    if mg.is_complementary(vid):
        vid = mg.partner(vid)
    return expand_to_base(h, level, [vid])


def _score(mg: ModifiedGraph, inside: set, members, tf, pattern_entry, anchor, kappa):
    """Overlap score of a placed pattern, or None when the placement is rejected."""
    g = mg.graph
    skip = {anchor, mg.partner(anchor)}
    score, confirmed = 0, []
    for v in members:
        if v == pattern_entry:
            continue
        box = transformed_box(tf, *g.vertex(v).bbox())
        for w, wx in g.vertices.items():
            if w in skip or not boxes_intersect(box, wx.bbox()):
                continue
            if w in inside or wx.label != g.vertex(v).label:
                return None
            if overlap_test(box, wx.bbox(), kappa):
                score += 1
                confirmed.append(v)
                break
    return score, confirmed


def predict(h: Hierarchy, entry_classes=DEFAULT_ENTRY_CLASSES, phi: float = 1.0,
            kappa: float = 0.5) -> list:
    """Candidate placements of mined patterns at loose entry vertices, best first."""
    if not 0 < phi <= 1:
        raise ValueError("phi must be in (0, 1]")
    entry_classes = set(entry_classes)
    cands = []
    for li, lvl in enumerate(h.levels):
        s = lvl.substructure
        if not any(lvl.graph.vertex(v).label in entry_classes for inst in s.instances for v in inst.vertex_ids):
            continue
        mg = modify_graph(lvl.graph, s, entry_classes)
        rep = _representative(mg, entry_classes)
        if rep is None:
            continue
        members = sorted(mg.instances[rep])
        inside = set().union(*mg.instances)
        entries = [v for v in members if mg.graph.vertex(v).label in entry_classes]
        for anchor in mg.loose_entries(entry_classes):
            best = None
            for pe in entries:
                tf = anchor_transform(mg.graph.vertex(pe), mg.graph.vertex(anchor))
                res = _score(mg, inside, members, tf, pe, anchor, kappa)
                if res is None:
                    continue
                score, confirmed = res
                if best is None or score > best[0]:
                    best = (score, pe, tf, confirmed)
            if best is None:
                continue
            score, pe, tf, confirmed = best
            predicted = []
            for v in members:
                if v == pe or v in confirmed:
                    continue
                for b in sorted(_base_ids(h, li, mg, v)):
                    bv = h.base.vertex(b)
                    predicted.append(PredictedVertex(bv.label, tf.apply(bv.position),
                                                     tf.rotation @ bv.rotation, bv.half_extents.copy(), b))
            base = sorted(b for b in _base_ids(h, li, mg, anchor) if h.base.vertex(b).label in entry_classes)
            cands.append(PredictionCandidate(anchor, pe, tf, score, predicted, li, confirmed,
                                             base[0] if len(base) == 1 else None))
    cands.sort(key=lambda c: (-c.overlap_score, c.level, c.anchor))
    if not cands:
        return []
    n_keep = max(1, math.ceil(phi * len(cands)))
    cutoff = cands[n_keep - 1].overlap_score
    return [c for c in cands if c.overlap_score >= cutoff]


__all__ = ["ModifiedGraph", "PredictionCandidate", "PredictedVertex", "modify_graph", "predict",
           "overlap_test", "intersection_measure", "boxes_intersect", "transformed_box",
           "anchor_transform", "DEFAULT_ENTRY_CLASSES", "COMPLEMENT_EDGE"]
