"""Beam-searched substructure discovery scored by description length.

``extend_substruct`` supports two regrouping strategies:

* ``modified``: one candidate set per parent instance.  The first subgraph
  of the first non-empty set seeds a group and every other set contributes its
  cheapest member within threshold.
* ``legacy``: all extensions in one flat list; the seed collects every later
  non-overlapping extension that matches within threshold (first fit).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .graph import (Edge, Hierarchy, Instance, Level, SceneGraph, Substructure, compress,
                    description_length)
from .matching import MatchConfig, label_lower_bound, match_cost

log = logging.getLogger(__name__)

MODIFIED = "modified"
LEGACY = "legacy"


class NoPattern(Exception):
    pass


@dataclass
class MiningParams:
    beam_width: int = 3
    iteration_limit: int = 30
    match_config: MatchConfig = field(default_factory=MatchConfig)
    mode: str = MODIFIED
    # search limits per match; exhausted searches fall back to the incumbent
    node_budget: int = 1000
    leaf_budget: int = 40

    def __post_init__(self):
        if self.beam_width < 1 or self.iteration_limit < 1:
            raise ValueError("beam width and iteration limit must be >= 1")
        if self.mode not in (MODIFIED, LEGACY):
            raise ValueError(f"unknown regrouping mode {self.mode!r}")

    @property
    def t_thr(self) -> float:
        return self.match_config.t_thr


class _MatchCache:
    """Memoises match costs between host subgraphs keyed by their (vertex, edge) sets."""

    def __init__(self, g: SceneGraph, params: MiningParams):
        self.g = g
        self.params = params
        self.cfg = params.match_config
        self._graphs: dict = {}
        self._costs: dict = {}

    def graph(self, inst: Instance) -> SceneGraph:
        k = inst.key()
        sg = self._graphs.get(k)
        if sg is None:
            sg = inst.as_graph(self.g)
            self._graphs[k] = sg
        return sg

    def accept(self, a: Instance, b: Instance) -> tuple[bool, float]:
        ka, kb = a.key(), b.key()
        key = (ka, kb) if ka <= kb else (kb, ka)
        hit = self._costs.get(key)
        if hit is not None:
            return hit
        ga, gb = self.graph(a), self.graph(b)
        thr = self.cfg.threshold_for(ga, gb)
        if label_lower_bound(ga, gb, self.cfg) > thr:
            res = (False, math.inf)
        else:
            m = match_cost(ga, gb, self.cfg, cap=thr, node_budget=self.params.node_budget,
                           leaf_budget=self.params.leaf_budget)
            res = (m.total_cost <= thr + 1e-9, m.total_cost)
        self._costs[key] = res
        return res


def disjoint(instances) -> list:
    """Keep instances in order, dropping any that share a vertex with an earlier one."""
    used: set = set()
    out = []
    for inst in instances:
        if used.isdisjoint(inst.vertex_ids):
            out.append(inst)
            used |= inst.vertex_ids
    return out


def residual_edges(g: SceneGraph, s: Substructure) -> int:
    """Edges joining two vertices of one instance without being instance edges.

    compress() cannot keep them (they would be self loops on the replacement
    vertex) but the compressed description still has to encode them.
    """
    n = 0
    for inst in s.instances:
        for vid in inst.vertex_ids:
            n += sum(1 for e in g.out_edges(vid) if e.dst in inst.vertex_ids and e not in inst.edges)
    return n


def evaluate(g: SceneGraph, s: Substructure) -> float:
    """Compression value: (DL(pattern) + DL(compressed graph)) / DL(graph)."""
    dl = description_length(g)
    if dl == 0:
        return math.inf
    gc = compress(g, s)
    return (description_length(s.pattern) + description_length(gc) + residual_edges(g, s)) / dl


def _extend(g: SceneGraph, inst: Instance) -> list:
    out = []
    seen = set()
    for vid in sorted(inst.vertex_ids):
        for e in sorted(g.incident(vid)):
            if e in inst.edges:
                continue
            new = Instance(inst.vertex_ids | {e.src, e.dst}, inst.edges | {e})
            k = new.key()
            if k not in seen:
                seen.add(k)
                out.append(new)
    return out


def _substructure(g: SceneGraph, group: list) -> Substructure:
    inst = disjoint(group)
    pattern = inst[0].as_graph(g)
    return Substructure(pattern, inst)


def extend_substruct(g: SceneGraph, s: Substructure, params: MiningParams,
                     mode: str | None = None, cache: _MatchCache | None = None) -> list:
    mode = mode or params.mode
    cache = cache or _MatchCache(g, params)
    sets = [_extend(g, inst) for inst in s.instances]
    groups: list = []
    if mode == MODIFIED:
        # parents stay available as match-only members so an instance that lacks
        # the extension can still join the group inexactly
        parents = list(s.instances)
        pending = [list(x) for x in sets]
        for i in range(len(pending)):
            while pending[i]:
                seed = pending[i].pop(0)
                group = [seed]
                for j in range(len(pending)):
                    if j == i:
                        continue
                    best, best_cost, best_is_parent = None, math.inf, False
                    for cand in pending[j]:
                        ok, c = cache.accept(seed, cand)
                        if ok and c < best_cost:
                            best, best_cost, best_is_parent = cand, c, False
                    if parents[j] is not None:
                        ok, c = cache.accept(seed, parents[j])
                        if ok and c < best_cost:
                            best, best_cost, best_is_parent = parents[j], c, True
                    if best is None:
                        continue
                    group.append(best)
                    if best_is_parent:
                        parents[j] = None
                    else:
                        pending[j].remove(best)
                groups.append(group)
    elif mode == LEGACY:
        flat = [x for xs in sets for x in xs]
        while flat:
            seed = flat.pop(0)
            group = [seed]
            used = set(seed.vertex_ids)
            rest = []
            for cand in flat:
                if not used.isdisjoint(cand.vertex_ids):
                    rest.append(cand)
                    continue
                ok, _ = cache.accept(seed, cand)
                if ok:
                    group.append(cand)
                    used |= cand.vertex_ids
                else:
                    rest.append(cand)
            flat = rest
            groups.append(group)
    else:
        raise ValueError(f"unknown regrouping mode {mode!r}")
    return [_substructure(g, grp) for grp in groups]


def _instance_key(s: Substructure) -> tuple:
    return tuple(sorted(i.key() for i in s.instances))


def seeds(g: SceneGraph) -> list:
    """One single-vertex substructure per label that occurs at least twice."""
    by_label: dict = {}
    for vid in sorted(g.vertices):
        by_label.setdefault(g.vertex(vid).label, []).append(vid)
    out = []
    for label in sorted(by_label):
        ids = by_label[label]
        if len(ids) < 2:
            continue
        insts = [Instance({v}, set()) for v in ids]
        out.append(Substructure(insts[0].as_graph(g), insts))
    return out


def _rank_key(s: Substructure):
    return (s.compression, -description_length(s.pattern), _instance_key(s))


def discover(g: SceneGraph, params: MiningParams | None = None, mode: str | None = None) -> Substructure:
    params = params or MiningParams()
    mode = mode or params.mode
    if g.num_vertices() == 0:
        raise NoPattern("empty graph")
    cache = _MatchCache(g, params)
    q = seeds(g)
    for s in q:
        s.compression = evaluate(g, s)
    q.sort(key=_rank_key)
    if not q:
        raise NoPattern("no label occurs more than once")
    best = q[0]
    limit = params.iteration_limit
    while q and limit > 0:
        q_new: list = []
        seen: set = set()
        for s in q:
            for ext in extend_substruct(g, s, params, mode, cache):
                k = _instance_key(ext)
                if k in seen or len(ext.instances) < 1:
                    continue
                seen.add(k)
                ext.compression = evaluate(g, ext)
                q_new.append(ext)
            q_new.sort(key=_rank_key)
            del q_new[params.beam_width:]
            limit -= 1
            if limit <= 0:
                break
        if q_new and q_new[0].compression < best.compression:
            best = q_new[0]
        q = q_new
    if best.compression >= 1.0:
        raise NoPattern(f"best compression {best.compression:.4f} >= 1")
    log.debug("discovered %s", best)
    return best


def build_hierarchy(g: SceneGraph, params: MiningParams | None = None, max_levels: int = 2,
                    mode: str | None = None) -> Hierarchy:
    """Repeat discover + compress up to ``max_levels`` times."""
    if max_levels < 1:
        raise ValueError("max_levels must be >= 1")
    params = params or MiningParams()
    h = Hierarchy(g)
    cur = g
    for lvl in range(max_levels):
        if cur.num_vertices() == 0:
            break
        try:
            s = discover(cur, params, mode)
        except NoPattern:
            break
        label = f"pattern_{lvl + 1}"
        h.levels.append(Level(cur, s, label))
        cur = compress(cur, s, label)
    return h


def expand_to_base(h: Hierarchy, level: int, vertex_ids) -> set:
    """Base-graph vertex ids covered by ``vertex_ids`` of level ``level``'s graph."""
    out = set()
    for vid in vertex_ids:
        out |= _expand(h, level, vid)
    return out


def _expand(h: Hierarchy, level: int, vid: int) -> set:
    if level == 0:
        return {vid}
    prev = h.levels[level - 1]
    if vid in prev.graph.vertices:
        return _expand(h, level - 1, vid)
    # compressed vertex: ids are assigned after the previous graph's ids in instance order
    idx = vid - prev.graph.next_id()
    inst = prev.substructure.instances[idx]
    return expand_to_base(h, level - 1, inst.vertex_ids)


def instance_edges(g: SceneGraph, vertex_ids) -> frozenset:
    vids = set(vertex_ids)
    return frozenset(e for e in g.edges if e.src in vids and e.dst in vids)


def summarize(h: Hierarchy) -> list:
    out = []
    for i, lvl in enumerate(h.levels):
        s = lvl.substructure
        labels: dict = {}
        for lab in s.pattern.labels():
            labels[lab] = labels.get(lab, 0) + 1
        out.append({
            "level": i + 1,
            "label": lvl.pattern_label,
            "pattern_labels": dict(sorted(labels.items())),
            "pattern_edges": s.pattern.num_edges(),
            "instances": len(s.instances),
            "compression": s.compression,
        })
    return out


def hierarchy_to_dict(h: Hierarchy) -> dict:
    """JSON-ready hierarchy: per level the pattern graph and instance vertex ids (own and base)."""
    from .graph import graph_to_dict

    levels = []
    for i, (summary, lvl) in enumerate(zip(summarize(h), h.levels)):
        s = lvl.substructure
        summary = dict(summary)
        summary["pattern"] = graph_to_dict(s.pattern)
        summary["instance_ids"] = [sorted(int(v) for v in inst.vertex_ids) for inst in s.instances]
        summary["instance_base_ids"] = [sorted(int(v) for v in expand_to_base(h, i, inst.vertex_ids))
                                        for inst in s.instances]
        levels.append(summary)
    return {"base_vertices": h.base.num_vertices(), "base_edges": h.base.num_edges(), "levels": levels}


__all__ = ["hierarchy_to_dict", "MiningParams", "NoPattern", "evaluate", "extend_substruct", "discover",
           "build_hierarchy", "expand_to_base", "summarize", "disjoint", "seeds", "Edge",
           "MODIFIED", "LEGACY"]
