"""Open travelling-salesman tours from a fixed start: nearest neighbour, then 2-opt and or-opt."""

from __future__ import annotations

import numpy as np


def tour_length(cost, order) -> float:
    c = np.asarray(cost, float)
    return float(sum(c[a, b] for a, b in zip(order[:-1], order[1:])))


def nearest_neighbor(cost, start: int = 0) -> list:
    c = np.asarray(cost, float)
    n = len(c)
    order = [start]
    left = set(range(n)) - {start}
    while left:
        cur = order[-1]
        nxt = min(left, key=lambda j: (c[cur, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def two_opt(cost, order) -> list:
    """Segment reversals on an open path with a fixed first node; the tail end is free."""
    c = np.asarray(cost, float)
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                a, b = order[i - 1], order[i]
                d, e = order[j], order[j + 1] if j + 1 < n else None
                before = c[a, b] + (c[d, e] if e is not None else 0.0)
                after = c[a, d] + (c[b, e] if e is not None else 0.0)
                if after < before - 1e-12:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    improved = True
    return order


def or_opt(cost, order, max_seg: int = 3) -> list:
    """Move short segments (optionally reversed) elsewhere in the path while that helps."""
    c = np.asarray(cost, float)
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for L in range(1, max_seg + 1):
            for i in range(1, n - L + 1):
                seg = order[i:i + L]
                prev, nxt = order[i - 1], order[i + L] if i + L < n else None
                removed = c[prev, seg[0]] + (c[seg[-1], nxt] - c[prev, nxt] if nxt is not None else 0.0)
                rest = order[:i] + order[i + L:]
                best = (-1e-12, None)
                for k in range(1, len(rest) + 1):
                    if k == i:
                        continue
                    p, q = rest[k - 1], rest[k] if k < len(rest) else None
                    for s in (seg, seg[::-1]):
                        added = c[p, s[0]] + (c[s[-1], q] - c[p, q] if q is not None else 0.0)
                        d = added - removed
                        if d < best[0]:
                            best = (d, (k, s))
                if best[1] is not None:
                    k, s = best[1]
                    order = rest[:k] + list(s) + rest[k:]
                    improved = True
    return order


def _polish(c, order):
    while True:
        before = tour_length(c, order)
        order = or_opt(c, two_opt(c, order))
        if tour_length(c, order) >= before - 1e-12:
            return order


def open_tour(cost, start: int = 0, restarts: int = 8, seed: int = 0) -> list:
    """Visiting order over all nodes of ``cost`` beginning at ``start``.

    The nearest-neighbour tour is polished first; ``restarts`` seeded random
    orders are polished too and the shortest result wins.
    """
    c = np.asarray(cost, float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost must be a square matrix")
    if len(c) <= 2:
        return [start] + [i for i in range(len(c)) if i != start]
    best = _polish(c, nearest_neighbor(c, start))
    best_len = tour_length(c, best)
    rng = np.random.default_rng(seed)
    rest = [i for i in range(len(c)) if i != start]
    for _ in range(restarts):
        cand = _polish(c, [start] + list(rng.permutation(rest)))
        val = tour_length(c, cand)
        if val < best_len - 1e-12:
            best, best_len = cand, val
    return best


__all__ = ["open_tour", "tour_length", "nearest_neighbor", "two_opt", "or_opt"]
