"""Sampled roadmaps on the known-free map: local exploration graphs and point-to-point paths."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from ..world import VoxelWorld

log = logging.getLogger(__name__)


class NoGraph(RuntimeError):
    """Sampling found no collision-free vertex connected to the robot."""


def sample_free(world: VoxelWorld, lo, hi, n: int, rng: np.random.Generator,
                clearance: np.ndarray | None = None, max_rounds: int = 30) -> np.ndarray:
    """Up to ``n`` uniform samples in the box [lo, hi] whose voxel has enough clearance."""
    cl = world.planning_clearance() if clearance is None else clearance
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    if np.any(hi <= lo):
        return np.zeros((0, 3))
    need = world.min_clearance() - 1e-9
    out = []
    got = 0
    for _ in range(max_rounds):
        p = rng.uniform(lo, hi, size=(max(2 * n, 64), 3))
        idx = np.floor(p / world.res).astype(int)
        ok = np.all((idx >= 0) & (idx < np.array(world.shape)), axis=1)
        p, idx = p[ok], idx[ok]
        ok = cl[idx[:, 0], idx[:, 1], idx[:, 2]] >= need
        out.append(p[ok])
        got += int(ok.sum())
        if got >= n:
            break
    pts = np.concatenate(out) if out else np.zeros((0, 3))
    return pts[:n]


@dataclass
class Roadmap:
    """Undirected graph over points; straight edges are validated against a clearance map."""

    points: np.ndarray
    graph: csr_matrix
    dist: np.ndarray
    pred: np.ndarray
    sources: tuple

    def reachable(self, i: int, src: int = 0) -> bool:
        return bool(np.isfinite(self.dist[src, i]))

    def path(self, i: int, src: int = 0) -> list:
        """Node indices from ``sources[src]`` to ``i``."""
        if not self.reachable(i, src):
            return []
        out = [i]
        while out[-1] != self.sources[src]:
            out.append(int(self.pred[src, out[-1]]))
        return out[::-1]


def build_roadmap(world: VoxelWorld, points, k: int, sources=(0,), extra_pairs=(),
                  clearance: np.ndarray | None = None) -> Roadmap:
    cl = world.planning_clearance() if clearance is None else clearance
    pts = np.asarray(points, float)
    n = len(pts)
    rows, cols, w = [], [], []
    pairs = set()
    if n > 1:
        kk = min(k + 1, n)
        _, nbr = cKDTree(pts).query(pts, k=kk)
        nbr = np.asarray(nbr).reshape(n, kk)
        for i in range(n):
            for j in nbr[i, 1:]:
                pairs.add((min(i, int(j)), max(i, int(j))))
    for i, j in extra_pairs:
        if i != j:
            pairs.add((min(i, j), max(i, j)))
    for i, j in sorted(pairs):
        if world.segment_clear(pts[i], pts[j], cl):
            d = float(np.linalg.norm(pts[i] - pts[j]))
            rows += [i, j]
            cols += [j, i]
            w += [max(d, 1e-9), max(d, 1e-9)]
    g = csr_matrix((w, (rows, cols)), shape=(n, n))
    dist, pred = dijkstra(g, directed=False, indices=list(sources), return_predecessors=True)
    return Roadmap(pts, g, np.atleast_2d(dist), np.atleast_2d(pred), tuple(sources))


def shortcut(world: VoxelWorld, pts, clearance: np.ndarray | None = None) -> list:
    """Greedy line-of-sight smoothing of a polyline."""
    pts = [np.asarray(p, float) for p in pts]
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not world.segment_clear(pts[i], pts[j], clearance if clearance is not None
                                                    else world.planning_clearance()):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def plan_path(world: VoxelWorld, start, goal, rng: np.random.Generator, bounds=None,
              max_samples: int = 500, batch: int = 100, k: int = 10,
              clearance: np.ndarray | None = None) -> list | None:
    """Shortest path on a growing sampled roadmap; None when the goal stays unreachable."""
    cl = world.planning_clearance() if clearance is None else clearance
    start, goal = np.asarray(start, float), np.asarray(goal, float)
    if world.segment_clear(start, goal, cl):
        return [start, goal]
    if not (world.point_clear(start, cl) and world.point_clear(goal, cl)):
        return None
    lo, hi = _bounds(world, bounds, start, goal)
    samples = np.zeros((0, 3))
    while len(samples) < max_samples:
        new = sample_free(world, lo, hi, batch, rng, cl)
        if len(new) == 0:
            return None
        samples = np.concatenate([samples, new])
        rm = build_roadmap(world, np.vstack([start, goal, samples]), k, clearance=cl)
        if rm.reachable(1):
            return shortcut(world, [rm.points[i] for i in rm.path(1)], cl)
    return None


def _bounds(world, bounds, *pts):
    m = world.min_clearance()
    if bounds is None:
        p = np.vstack(pts)
        lo, hi = p.min(axis=0) - 1.5, p.max(axis=0) + 1.5
    else:
        lo, hi = (np.asarray(b, float) for b in bounds)
    wlo, whi = np.zeros(3) + m, np.array(world.shape) * world.res - m
    return np.maximum(lo, wlo), np.minimum(hi, whi)


@dataclass
class LocalGraph:
    roadmap: Roadmap
    gains: np.ndarray | None = None

    @property
    def points(self) -> np.ndarray:
        return self.roadmap.points

    @property
    def dist(self) -> np.ndarray:
        return self.roadmap.dist[0]

    def path(self, j: int) -> list:
        return self.roadmap.path(j)


def local_graph(world: VoxelWorld, position, rng: np.random.Generator, n: int = 200,
                box=(12.0, 12.0, 6.0), k: int = 10, bounds=None) -> LocalGraph:
    """Rooted exploration graph; vertex 0 is the robot, unreachable samples are dropped."""
    cl = world.planning_clearance()
    pos = np.asarray(position, float)
    half = np.asarray(box, float) / 2
    lo, hi = pos - half, pos + half
    if bounds is not None:
        m = world.min_clearance()
        lo = np.maximum(lo, np.asarray(bounds[0], float) + m)
        hi = np.minimum(hi, np.asarray(bounds[1], float) - m)
    lo, hi = _bounds(world, (lo, hi))
    samples = sample_free(world, lo, hi, n, rng, cl)
    if len(samples) == 0:
        raise NoGraph("no collision-free sample in the local volume")
    rm = build_roadmap(world, np.vstack([pos, samples]), k, clearance=cl)
    keep = np.flatnonzero(np.isfinite(rm.dist[0]))
    if len(keep) <= 1:
        raise NoGraph("no sampled vertex connects to the robot")
    if len(keep) < len(rm.points):
        rm = build_roadmap(world, rm.points[keep], k, clearance=cl)
    return LocalGraph(rm)


def travel_matrix(world: VoxelWorld, start, targets, rng: np.random.Generator, bounds=None,
                  max_samples: int = 500, batch: int = 100, k: int = 10,
                  clearance: np.ndarray | None = None):
    """Pairwise shortest-path lengths among ``start`` and ``targets`` on one roadmap.

    Samples are added until every target is reachable or ``max_samples`` is
    hit.  Returns (cost matrix, roadmap, reachable mask over targets); the
    roadmap's key nodes are 0 (start) and 1..len(targets).
    """
    cl = world.planning_clearance() if clearance is None else clearance
    keys = np.vstack([np.asarray(start, float)] + [np.asarray(t, float) for t in targets])
    m = len(keys)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    lo, hi = _bounds(world, bounds, keys)
    samples = np.zeros((0, 3))
    while True:
        rm = build_roadmap(world, np.vstack([keys, samples]), k, sources=tuple(range(m)),
                           extra_pairs=pairs, clearance=cl)
        ok = np.isfinite(rm.dist[0, 1:m])
        if ok.all() or len(samples) >= max_samples:
            break
        new = sample_free(world, lo, hi, batch, rng, cl)
        if len(new) == 0:
            break
        samples = np.concatenate([samples, new])
    cost = rm.dist[:, :m]
    return cost, rm, ok


__all__ = ["NoGraph", "Roadmap", "LocalGraph", "sample_free", "build_roadmap", "plan_path",
           "local_graph", "travel_matrix", "shortcut"]
