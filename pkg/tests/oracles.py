"""Independent reference computations used to freeze expected values.

Nothing here imports the package's matching internals; the costs are
re-derived directly from the edit-operation definitions.
"""

import itertools
import math

import numpy as np


def kabsch(a, b):
    """Rotation/translation taking b onto a (least squares)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ca, cb = a.mean(0), b.mean(0)
    if len(a) == 1 or max(np.abs(a - ca).max(), np.abs(b - cb).max()) < 1e-12:
        return np.eye(3), ca - cb
    u, _, vt = np.linalg.svd((b - cb).T @ (a - ca))
    s = np.eye(3)
    if np.linalg.det(vt.T @ u.T) < 0:
        s[2, 2] = -1
    r = vt.T @ s @ u.T
    return r, ca - r @ cb


def graph_arrays(g):
    ids = sorted(g.vertices)
    labels = {v: g.vertex(v).label for v in ids}
    pos = {v: np.array(g.vertex(v).position) for v in ids}
    edges = [(e.src, e.dst, e.label) for e in g.edges]
    deg = {v: 0 for v in ids}
    for s, d, _ in edges:
        deg[s] += 1
        deg[d] += 1
    return ids, labels, pos, edges, deg


def oracle_cost(f, g1, g2, cfg):
    """Total cost of a complete mapping f: g1 id -> g2 id or None."""
    ids1, lab1, pos1, edg1, deg1 = graph_arrays(g1)
    ids2, lab2, pos2, edg2, deg2 = graph_arrays(g2)
    eta_max = max(list(deg1.values()) + list(deg2.values()) + [0])
    gam = (lambda eta: 1.0) if eta_max == 0 else (lambda eta: 1.0 + eta / eta_max)
    image = {w for w in f.values() if w is not None}
    finv = {w: v for v, w in f.items() if w is not None}

    # owner of each vertex: ('a', v) for g1 vertices, ('b', w) for unmapped g2 vertices
    def owner2(w):
        return ("a", finv[w]) if w in finv else ("b", w)

    def null(o):
        return o[0] == "b" or f[o[1]] is None

    def gam_of(o):
        if o[0] == "b":
            return gam(deg2[o[1]])
        v = o[1]
        return gam(deg1[v] if f[v] is None else max(deg1[v], deg2[f[v]]))

    def target(o1, o2):
        if null(o1) and not null(o2):
            return o1
        if null(o2) and not null(o1):
            return o2
        if o1[0] != o2[0]:
            return o1 if o1[0] == "b" else o2
        return o1 if o1[1] > o2[1] else o2

    total = 0.0
    for v in ids1:
        if f[v] is None:
            total += cfg.cost_vertex_add * gam_of(("a", v))
        elif lab1[v] != lab2[f[v]]:
            total += cfg.cost_vertex_label_sub * gam_of(("a", v))
    for w in ids2:
        if w not in image:
            total += cfg.cost_vertex_del * gam_of(("b", w))

    # group edges by ordered endpoint owners
    groups = {}
    for s, d, lab in edg1:
        groups.setdefault((("a", s), ("a", d)), ([], []))[0].append(lab)
    for s, d, lab in edg2:
        groups.setdefault((owner2(s), owner2(d)), ([], []))[1].append(lab)
    for (o1, o2), (l1, l2) in groups.items():
        l1, l2 = sorted(l1), sorted(l2)
        # g1 labels only compare with g2 labels if both owners are mapped g1 vertices
        both_mapped = o1[0] == "a" and o2[0] == "a" and f[o1[1]] is not None and f[o2[1]] is not None
        if not both_mapped:
            c = len(l1) * cfg.cost_edge_add + len(l2) * cfg.cost_edge_del
        else:
            rem2 = list(l2)
            unmatched1 = []
            for lab in l1:
                if lab in rem2:
                    rem2.remove(lab)
                else:
                    unmatched1.append(lab)
            s = min(len(unmatched1), len(rem2))
            c = (s * cfg.cost_edge_label_sub + (len(unmatched1) - s) * cfg.cost_edge_add
                 + (len(rem2) - s) * cfg.cost_edge_del)
        if c:
            total += c * gam_of(target(o1, o2))

    pairs = [(v, f[v]) for v in ids1 if f[v] is not None]
    if pairs:
        a = np.array([pos1[v] for v, _ in pairs])
        b = np.array([pos2[w] for _, w in pairs])
        r, t = kabsch(a, b)
        d = np.linalg.norm(a - (b @ r.T + t), axis=1)
        d = np.where(d <= cfg.d_min, 0.0, np.minimum(d, cfg.d_max))
        total += cfg.gamma_p * d.sum() / cfg.d_max
    return total


def all_mappings(ids1, ids2):
    """Every injective partial map ids1 -> ids2 ∪ {None}."""
    n = len(ids1)
    for k in range(0, min(n, len(ids2)) + 1):
        for chosen in itertools.combinations(range(n), k):
            for targets in itertools.permutations(ids2, k):
                f = {v: None for v in ids1}
                for i, w in zip(chosen, targets):
                    f[ids1[i]] = w
                yield f


def brute_force_min(g1, g2, cfg):
    """Minimum over all mappings, with g1 taken as the larger graph (caller orients)."""
    best = math.inf
    for f in all_mappings(sorted(g1.vertices), sorted(g2.vertices)):
        best = min(best, oracle_cost(f, g1, g2, cfg))
    return best


def open_tour_length(order, dist):
    return sum(dist[order[i], order[i + 1]] for i in range(len(order) - 1))


def brute_force_open_tour(dist):
    """Optimal open tour starting at node 0 visiting all nodes."""
    n = len(dist)
    best = math.inf
    for perm in itertools.permutations(range(1, n)):
        best = min(best, open_tour_length((0,) + perm, dist))
    return best


def held_karp_open(cost, start=0):
    """Exact shortest open path from ``start`` through every node (dynamic programming)."""
    c = np.asarray(cost, float)
    n = len(c)
    others = [i for i in range(n) if i != start]
    if not others:
        return 0.0
    idx = {v: k for k, v in enumerate(others)}
    best = {(1 << idx[v], v): c[start, v] for v in others}
    for size in range(2, len(others) + 1):
        for sub in itertools.combinations(others, size):
            mask = sum(1 << idx[v] for v in sub)
            for v in sub:
                prev = mask & ~(1 << idx[v])
                best[(mask, v)] = min(best[(prev, u)] + c[u, v] for u in sub if u != v)
    full = (1 << len(others)) - 1
    return min(best[(full, v)] for v in others)
