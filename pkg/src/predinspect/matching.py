"""Inexact graph matching with pose and degree-scaled transformation costs.

A mapping sends every vertex of the larger graph ``g1`` either to a distinct
vertex of ``g2`` or to the null vertex (``None``).  Its cost is

    C_tot = C_P + C_R

where C_P penalises residual vertex displacement after rigid alignment and
C_R sums edit costs, each scaled by 1 + eta/eta_max with eta the larger
degree of the pair it is charged to.

Charging rules (fixed so that totals are reproducible):

* vertices/edges present only in ``g1`` are additions, only in ``g2`` deletions;
* an unmapped ``g2`` vertex forms its own pair ``(None, w)``;
* an edge difference between two pairs is charged to the pair that contains a
  null side, otherwise to the pair whose ``g1`` vertex (or, for two unmapped
  ``g2`` vertices, ``g2`` vertex) has the higher id;
* parallel edges between the same ordered pair are compared as label
  multisets: equal labels are free, then substitutions, then add/delete.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .graph import SceneGraph, description_length


@dataclass(frozen=True)
class MatchConfig:
    cost_vertex_add: float = 1.0
    cost_vertex_del: float = 1.0
    cost_edge_add: float = 1.0
    cost_edge_del: float = 1.0
    cost_vertex_label_sub: float = 4.0
    cost_edge_label_sub: float = 1.0
    gamma_p: float = 1.0
    d_min: float = 0.5
    d_max: float = 4.0
    t_thr: float = 0.2

    def __post_init__(self):
        costs = (self.cost_vertex_add, self.cost_vertex_del, self.cost_edge_add,
                 self.cost_edge_del, self.cost_vertex_label_sub, self.cost_edge_label_sub)
        if any(not math.isfinite(c) or c < 0 for c in costs):
            raise ValueError("transformation costs must be finite and non-negative")
        if self.gamma_p < 0:
            raise ValueError("gamma_p must be >= 0")
        if not 0 <= self.d_min < self.d_max:
            raise ValueError("need 0 <= d_min < d_max")

    @classmethod
    def from_dict(cls, d: dict) -> "MatchConfig":
        return cls(**{k: float(v) for k, v in d.items()})

    def threshold_for(self, g1: SceneGraph, g2: SceneGraph) -> float:
        """Absolute acceptance threshold: ``t_thr`` is a fraction of the larger graph size."""
        return self.t_thr * max(description_length(g1), description_length(g2))


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass
class Mapping:
    # (g1 vertex id, g2 vertex id or None), in the internal orientation |V1| >= |V2|
    pairs: list
    total_cost: float
    pose_cost: float
    transform_cost: float
    # True when the caller's arguments were swapped to reach that orientation
    swapped: bool = False
    exact: bool = True

    def as_dict(self) -> dict:
        return dict(self.pairs)

    def caller_pairs(self) -> list:
        """Pairs expressed as (caller g1 id or None, caller g2 id or None)."""
        if not self.swapped:
            return list(self.pairs)
        return [(b, a) for a, b in self.pairs]


def rigid_align(p1, p2, correspondences=None) -> RigidTransform:
    """Least-squares rigid transform T with T(p2[j]) ~ p1[i] for (i, j) in correspondences.

    Uses centroid subtraction and an SVD of the cross covariance with the
    reflection fix.  A single point, or a set of coincident points, gives a
    pure translation.
    """
    p1 = np.asarray(p1, dtype=float).reshape(-1, 3)
    p2 = np.asarray(p2, dtype=float).reshape(-1, 3)
    if correspondences is not None:
        idx = np.asarray(list(correspondences), dtype=int).reshape(-1, 2)
        a, b = p1[idx[:, 0]], p2[idx[:, 1]]
    else:
        a, b = p1, p2
    if len(a) == 0:
        raise ValueError("rigid_align needs at least one correspondence")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    qa, qb = a - ca, b - cb
    scale = max(np.abs(qa).max(), np.abs(qb).max())
    if len(a) == 1 or scale < 1e-12:
        return RigidTransform(np.eye(3), ca - cb)
    h = qb.T @ qa
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, ca - r @ cb)


def clamp_distance(d, d_min, d_max):
    d = np.asarray(d, dtype=float)
    return np.where(d <= d_min, 0.0, np.minimum(d, d_max))


def pose_cost(mapping, g1: SceneGraph, g2: SceneGraph, cfg: MatchConfig) -> float:
    """Clamped residual displacement after aligning the mapped ``g2`` points onto ``g1``."""
    pairs = [(a, b) for a, b in _pairs(mapping) if a is not None and b is not None]
    if not pairs:
        return 0.0
    p1 = np.array([g1.vertex(a).position for a, _ in pairs])
    p2 = np.array([g2.vertex(b).position for _, b in pairs])
    tf = rigid_align(p1, p2)
    d = np.linalg.norm(p1 - tf.apply(p2), axis=1)
    return float(cfg.gamma_p * np.sum(clamp_distance(d, cfg.d_min, cfg.d_max)) / cfg.d_max)


def _pairs(mapping):
    if isinstance(mapping, Mapping):
        return mapping.pairs
    if isinstance(mapping, dict):
        return list(mapping.items())
    return list(mapping)


def _edge_diff_cost(l1: Counter, l2: Counter, cfg: MatchConfig) -> float:
    common = sum((l1 & l2).values())
    r1 = sum(l1.values()) - common
    r2 = sum(l2.values()) - common
    s = min(r1, r2)
    return s * cfg.cost_edge_label_sub + (r1 - s) * cfg.cost_edge_add + (r2 - s) * cfg.cost_edge_del


def _label_pairs(g: SceneGraph) -> dict:
    out: dict = {}
    for e in g.edges:
        out.setdefault((e.src, e.dst), Counter())[e.label] += 1
    return out


def max_degree(g1: SceneGraph, g2: SceneGraph) -> int:
    return max([g1.degree(v) for v in g1.vertices] + [g2.degree(v) for v in g2.vertices] + [0])


def transform_cost(mapping, g1: SceneGraph, g2: SceneGraph, cfg: MatchConfig) -> float:
    """Degree-scaled sum of vertex/edge add, delete and label-substitution costs."""
    f = dict(_pairs(mapping))
    if set(f) != set(g1.vertices):
        raise ValueError("mapping must cover every g1 vertex")
    image = {w for w in f.values() if w is not None}
    if len(image) != sum(w is not None for w in f.values()):
        raise ValueError("mapping is not injective")
    eta_max = max_degree(g1, g2)

    def gamma(eta):
        return 1.0 if eta_max == 0 else 1.0 + eta / eta_max

    # pair key: ("1", g1 id) for g1 vertices, ("2", g2 id) for unmapped g2 vertices
    pair_gamma = {}
    for a, w in f.items():
        eta = g1.degree(a) if w is None else max(g1.degree(a), g2.degree(w))
        pair_gamma[("1", a)] = gamma(eta)
    unmapped = [w for w in g2.vertices if w not in image]
    for w in unmapped:
        pair_gamma[("2", w)] = gamma(g2.degree(w))
    inv = {w: a for a, w in f.items() if w is not None}

    def pair_of_g2(w):
        return ("1", inv[w]) if w in inv else ("2", w)

    def is_null(key):
        return key[0] == "2" or f[key[1]] is None

    def charge_to(k1, k2):
        n1, n2 = is_null(k1), is_null(k2)
        if n1 != n2:
            return k1 if n1 else k2
        if k1[0] != k2[0]:
            # one unmapped g2 vertex and one lambda-mapped g1 vertex cannot share an edge
            return k1 if k1[0] == "2" else k2
        return max(k1, k2, key=lambda k: k[1])

    per_pair = {k: 0.0 for k in pair_gamma}
    for a, w in f.items():
        if w is None:
            per_pair[("1", a)] += cfg.cost_vertex_add
        elif g1.vertex(a).label != g2.vertex(w).label:
            per_pair[("1", a)] += cfg.cost_vertex_label_sub
    for w in unmapped:
        per_pair[("2", w)] += cfg.cost_vertex_del

    e1 = _label_pairs(g1)
    e2 = _label_pairs(g2)
    seen2 = set()
    for (a, b), labs in e1.items():
        fa, fb = f[a], f[b]
        other = Counter()
        if fa is not None and fb is not None:
            other = e2.get((fa, fb), Counter())
            seen2.add((fa, fb))
        c = _edge_diff_cost(labs, other, cfg)
        if c:
            per_pair[charge_to(("1", a), ("1", b))] += c
    for (x, y), labs in e2.items():
        if (x, y) in seen2:
            continue
        kx, ky = pair_of_g2(x), pair_of_g2(y)
        c = _edge_diff_cost(Counter(), labs, cfg)
        per_pair[charge_to(kx, ky)] += c
    return float(sum(pair_gamma[k] * v for k, v in per_pair.items()))


def _canonical_key(g: SceneGraph) -> tuple:
    vs = tuple((vid, v.label, tuple(np.round(v.position, 9))) for vid, v in sorted(g.vertices.items()))
    es = tuple(sorted((e.src, e.dst, e.label) for e in g.edges))
    return vs, es


def oriented(g1: SceneGraph, g2: SceneGraph) -> tuple[SceneGraph, SceneGraph, bool]:
    """Order the pair so the first graph has at least as many vertices."""
    n1, n2 = g1.num_vertices(), g2.num_vertices()
    if n1 < n2 or (n1 == n2 and _canonical_key(g1) > _canonical_key(g2)):
        return g2, g1, True
    return g1, g2, False


class _Search:
    """Depth-first branch-and-bound over partial mappings of g1 onto g2 ∪ {None}."""

    def __init__(self, g1, g2, cfg, cap, node_budget, leaf_budget=None):
        self.g1, self.g2, self.cfg = g1, g2, cfg
        self.cap = math.inf if cap is None else cap
        self.node_budget = node_budget
        self.leaf_budget = leaf_budget
        self.nodes = 0
        self.leaves = 0
        self.exhausted = False

        self.ids1 = self._order(g1)
        self.ids2 = sorted(g2.vertices)
        self.idx2 = {w: j for j, w in enumerate(self.ids2)}
        n1, n2 = len(self.ids1), len(self.ids2)
        self.lab1 = [g1.vertex(a).label for a in self.ids1]
        self.lab2 = [g2.vertex(w).label for w in self.ids2]
        self.deg1 = [g1.degree(a) for a in self.ids1]
        self.deg2 = [g2.degree(w) for w in self.ids2]
        eta_max = max(self.deg1 + self.deg2 + [0])
        self.eta_max = eta_max
        self.pos1 = np.array([g1.vertex(a).position for a in self.ids1])
        self.pos2 = np.array([g2.vertex(w).position for w in self.ids2]) if n2 else np.zeros((0, 3))
        self.rank1 = {a: i for i, a in enumerate(self.ids1)}

        e1 = _label_pairs(g1)
        e2 = _label_pairs(g2)
        self.e1 = {(self.rank1[a], self.rank1[b]): c for (a, b), c in e1.items()}
        self.e2 = {(self.idx2[x], self.idx2[y]): c for (x, y), c in e2.items()}
        # incident ordered pairs per vertex for quick lookups
        self.adj1 = [[] for _ in range(n1)]
        for (i, j) in self.e1:
            self.adj1[i].append((i, j))
            self.adj1[j].append((i, j))
        self.adj2 = [[] for _ in range(n2)]
        for (x, y) in self.e2:
            self.adj2[x].append((x, y))
            self.adj2[y].append((x, y))
        # g1 edge labels with an endpoint at or after position k in the order
        self.open_edge_labels1 = []
        for k in range(n1 + 1):
            c = Counter()
            for (i, j), labs in self.e1.items():
                if max(i, j) >= k:
                    c.update(labs)
            self.open_edge_labels1.append(c)
        # g2 vertices with identical labelled neighbourhoods are interchangeable for C_R
        sig = {}
        self.cls2 = []
        for x, w in enumerate(self.ids2):
            out = tuple(sorted((y, tuple(sorted(c.elements()))) for (a, y), c in self.e2.items() if a == x))
            inn = tuple(sorted((a, tuple(sorted(c.elements()))) for (a, y), c in self.e2.items() if y == x))
            self.cls2.append(sig.setdefault((self.lab2[x], out, inn), len(sig)))
        self.gamma_lo = self.gamma(min(self.deg1 + self.deg2, default=0))
        self.guide = self._initial_alignment()

    def gamma(self, eta):
        return 1.0 if self.eta_max == 0 else 1.0 + eta / self.eta_max

    @staticmethod
    def _order(g):
        # breadth-first from the highest-degree vertex so edges are charged early
        remaining = set(g.vertices)
        order = []
        while remaining:
            start = min(remaining, key=lambda v: (-g.degree(v), v))
            queue = [start]
            remaining.discard(start)
            while queue:
                u = queue.pop(0)
                order.append(u)
                for w in sorted(g.neighbors(u), key=lambda v: (-g.degree(v), v)):
                    if w in remaining:
                        remaining.discard(w)
                        queue.append(w)
        return order

    def _initial_alignment(self):
        # distance ranking hint: g2 positions moved onto g1 by centroid translation
        if len(self.ids2) == 0:
            return self.pos2
        return self.pos2 + (self.pos1.mean(axis=0) - self.pos2.mean(axis=0))

    def step_cost(self, k, j, assign):
        """Incremental C_R of assigning the k-th g1 vertex to g2 index j (None for null)."""
        cfg = self.cfg
        gk = self.gamma(self.deg1[k] if j is None else max(self.deg1[k], self.deg2[j]))
        if j is None:
            cost = cfg.cost_vertex_add * gk
        else:
            cost = cfg.cost_vertex_label_sub * gk if self.lab1[k] != self.lab2[j] else 0.0
        id_k = self.ids1[k]
        # ordered pairs with an earlier vertex, in both directions
        for m in range(k):
            for (a, b) in ((k, m), (m, k)):
                l1 = self.e1.get((a, b))
                ja, jb = assign[a] if a != k else j, assign[b] if b != k else j
                l2 = None
                if ja is not None and jb is not None:
                    l2 = self.e2.get((ja, jb))
                if l1 is None and l2 is None:
                    continue
                c = _edge_diff_cost(l1 or Counter(), l2 or Counter(), cfg)
                if not c:
                    continue
                jm = assign[m]
                null_k, null_m = j is None, jm is None
                if null_k != null_m:
                    tgt = k if null_k else m
                else:
                    tgt = k if id_k > self.ids1[m] else m
                jt = j if tgt == k else jm
                g = self.gamma(self.deg1[tgt] if jt is None else max(self.deg1[tgt], self.deg2[jt]))
                cost += c * g
        return cost

    def leaf_cost(self, assign):
        """C_R contributed by g2 vertices left unmapped."""
        cfg = self.cfg
        used = {j for j in assign if j is not None}
        cost = 0.0
        for x in range(len(self.ids2)):
            if x in used:
                continue
            cost += cfg.cost_vertex_del * self.gamma(self.deg2[x])
        for (x, y), labs in self.e2.items():
            ux, uy = x in used, y in used
            if ux and uy:
                continue
            if not ux and not uy:
                tgt = x if self.ids2[x] > self.ids2[y] else y
            else:
                tgt = y if ux else x
            cost += _edge_diff_cost(Counter(), labs, cfg) * self.gamma(self.deg2[tgt])
        return cost

    def lower_bound(self, k, used):
        cfg = self.cfg
        rem1 = Counter(self.lab1[k:])
        rem2 = Counter(self.lab2[j] for j in range(len(self.ids2)) if j not in used)
        lb_v = _histogram_bound(rem1, rem2, cfg.cost_vertex_label_sub, cfg.cost_vertex_add,
                                cfg.cost_vertex_del)
        # edges not yet charged on either side
        r2 = Counter()
        for (x, y), c in self.e2.items():
            if x not in used or y not in used:
                r2.update(c)
        lb_e = _histogram_bound(self.open_edge_labels1[k], r2, cfg.cost_edge_label_sub,
                                cfg.cost_edge_add, cfg.cost_edge_del)
        # every charge lands on some pair whose scale is at least gamma(min degree)
        return (lb_v + lb_e) * self.gamma_lo

    def full_cost(self, assign):
        pairs = [(self.ids1[k], None if j is None else self.ids2[j]) for k, j in enumerate(assign)]
        pc = pose_cost(pairs, self.g1, self.g2, self.cfg)
        tc = transform_cost(pairs, self.g1, self.g2, self.cfg)
        return pairs, pc, tc

    def children(self, k, assign, used, by_class=False):
        opts = []
        seen = set()
        for j in range(len(self.ids2)):
            if j in used:
                continue
            if by_class:
                if self.cls2[j] in seen:
                    continue
                seen.add(self.cls2[j])
            c = self.step_cost(k, j, assign)
            d = float(np.linalg.norm(self.pos1[k] - self.guide[j]))
            opts.append((c, d, j))
        c = self.step_cost(k, None, assign)
        opts.append((c, math.inf, None))
        opts.sort(key=lambda t: (t[0], t[1], -1 if t[2] is None else t[2]))
        return opts

    def greedy(self, assign, used, acc):
        assign = list(assign)
        used = set(used)
        for k in range(len(assign), len(self.ids1)):
            c, _, j = self.children(k, assign, used)[0]
            assign.append(j)
            if j is not None:
                used.add(j)
            acc += c
        return assign

    def _seed_incumbent(self, rounds=3):
        """Greedy completions re-ranked by an ICP-style alignment; returns the best."""
        best = None
        for _ in range(rounds):
            assign = self.greedy([], set(), 0.0)
            pairs, pc, tc = self.full_cost(assign)
            if best is None or pc + tc < best[0] - 1e-12:
                best = [pc + tc, pairs, pc, tc]
            matched = [(k, j) for k, j in enumerate(assign) if j is not None]
            if not matched:
                break
            tf = rigid_align(self.pos1[[k for k, _ in matched]], self.pos2[[j for _, j in matched]])
            guide = tf.apply(self.pos2)
            if np.allclose(guide, self.guide):
                break
            self.guide = guide
        return best

    def _min_relational(self):
        """Exact minimum of C_R alone, branching once per class of interchangeable g2 vertices."""
        n1 = len(self.ids1)
        assign: list = []
        used: set = set()
        best = [math.inf, None]
        nodes = [0]
        budget = None if self.node_budget is None else 4 * self.node_budget
        exhausted = [False]

        def dfs(k, acc):
            nodes[0] += 1
            if budget is not None and nodes[0] > budget:
                exhausted[0] = True
                return
            if k == n1:
                total = acc + self.leaf_cost(assign)
                if total < best[0] - 1e-12:
                    best[:] = [total, list(assign)]
                return
            for c, _, j in self.children(k, assign, used, by_class=True):
                g = acc + c
                if g + self.lower_bound(k + 1, used | ({j} if j is not None else set())) >= best[0] - 1e-12:
                    continue
                assign.append(j)
                if j is not None:
                    used.add(j)
                dfs(k + 1, g)
                assign.pop()
                if j is not None:
                    used.discard(j)
                if exhausted[0]:
                    return

        dfs(0, 0.0)
        return best[0], best[1], not exhausted[0]

    def run(self):
        n1 = len(self.ids1)
        best = self._seed_incumbent()
        root_lb = self.lower_bound(0, set())
        if best[0] <= root_lb + 1e-12:
            return best
        cr_min, cr_assign, cr_exact = self._min_relational()
        if cr_assign is not None:
            pairs, pc, tc = self.full_cost(cr_assign)
            if pc + tc < best[0] - 1e-12:
                best = [pc + tc, pairs, pc, tc]
        if cr_exact:
            # C_P >= 0, so the relational minimum bounds the total from below
            if cr_min > self.cap or best[0] <= cr_min + 1e-12:
                return best

        assign: list = []
        used: set = set()

        def dfs(k, acc):
            if self.node_budget is not None and self.nodes >= self.node_budget:
                self.exhausted = True
                return
            self.nodes += 1
            if k == n1:
                total_r = acc + self.leaf_cost(assign)
                if total_r >= best[0] or total_r > self.cap:
                    return
                pairs, pc, tc = self.full_cost(assign)
                tot = pc + tc
                if tot < best[0] - 1e-12:
                    best[:] = [tot, pairs, pc, tc]
                self.leaves += 1
                if self.leaf_budget is not None and self.leaves >= self.leaf_budget:
                    self.exhausted = True
                return
            for c, _, j in self.children(k, assign, used):
                g = acc + c
                bound = g + self.lower_bound(k + 1, used | ({j} if j is not None else set()))
                if bound >= best[0] - 1e-12 or bound > self.cap:
                    continue
                assign.append(j)
                if j is not None:
                    used.add(j)
                dfs(k + 1, g)
                assign.pop()
                if j is not None:
                    used.discard(j)
                if self.exhausted:
                    return

        dfs(0, 0.0)
        self.exhausted = self.exhausted or not cr_exact
        return best


def match_cost(g1: SceneGraph, g2: SceneGraph, cfg: MatchConfig | None = None,
               cap: float | None = None, node_budget: int | None = None,
               leaf_budget: int | None = None) -> Mapping:
    """Minimum-cost mapping between ``g1`` and ``g2``.

    With ``cap`` and ``node_budget`` left as ``None`` the search is exact.
    Branches whose bound exceeds ``cap`` are dropped; if nothing under the cap
    survives the greedy completion found first is returned instead.
    """
    cfg = cfg or MatchConfig()
    a, b, swapped = oriented(g1, g2)
    if a.num_vertices() == 0:
        tc = transform_cost([], a, b, cfg)
        return Mapping([], tc, 0.0, tc, swapped)
    search = _Search(a, b, cfg, cap, node_budget, leaf_budget)
    tot, pairs, pc, tc = search.run()
    return Mapping(pairs, tot, pc, tc, swapped, exact=not search.exhausted and cap is None)


def _histogram_bound(r1: Counter, r2: Counter, sub: float, add: float, dele: float) -> float:
    common = sum((r1 & r2).values())
    a = sum(r1.values()) - common
    b = sum(r2.values()) - common
    s = min(a, b)
    return min(a * add + b * dele, s * sub + (a - s) * add + (b - s) * dele)


def label_lower_bound(g1: SceneGraph, g2: SceneGraph, cfg: MatchConfig) -> float:
    """Cheap admissible bound on C_R from vertex and edge label histograms."""
    g1, g2, _ = oriented(g1, g2)
    lb_v = _histogram_bound(Counter(g1.labels()), Counter(g2.labels()),
                            cfg.cost_vertex_label_sub, cfg.cost_vertex_add, cfg.cost_vertex_del)
    lb_e = _histogram_bound(Counter(e.label for e in g1.edges), Counter(e.label for e in g2.edges),
                            cfg.cost_edge_label_sub, cfg.cost_edge_add, cfg.cost_edge_del)
    degs = [g1.degree(v) for v in g1.vertices] + [g2.degree(v) for v in g2.vertices]
    eta_max = max(degs, default=0)
    gamma_lo = 1.0 if eta_max == 0 else 1.0 + min(degs) / eta_max
    return (lb_v + lb_e) * gamma_lo


def within_threshold(g1: SceneGraph, g2: SceneGraph, cfg: MatchConfig,
                     node_budget: int | None = 20000) -> tuple[bool, float]:
    """Match and compare against the size-relative threshold; returns (accepted, cost)."""
    thr = cfg.threshold_for(g1, g2)
    if label_lower_bound(g1, g2, cfg) > thr:
        return False, math.inf
    m = match_cost(g1, g2, cfg, cap=thr, node_budget=node_budget)
    return m.total_cost <= thr + 1e-9, m.total_cost
