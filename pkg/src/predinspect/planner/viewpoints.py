"""Inspection viewpoints along longitudinals and their pruning by unseen surface."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..graph import SceneGraph
from ..kernels import OCC
from ..tank import EDGE_ATTACHED
from ..world import RobotConfiguration, SensorModel, VoxelWorld, camera_hits

log = logging.getLogger(__name__)


@dataclass
class Viewpoint:
    position: np.ndarray
    yaw: float
    target: int
    section: int

    @property
    def key(self) -> tuple:
        return (self.target, self.section)

    def config(self) -> RobotConfiguration:
        return RobotConfiguration(self.position.copy(), self.yaw)

    def as_dict(self) -> dict:
        return {"position": [float(x) for x in self.position], "yaw": float(self.yaw),
                "target": int(self.target), "section": int(self.section)}


def viewpoint_layout(p_e1, p_e2, d_n, r_c: float, hfov: float):
    """Positions for one segment: (n x 3 array, spacing, stand-off).

    Spacing is 2 r_c sin(F/2) and the stand-off along ``d_n`` is r_c cos(F/2).
    The row of n viewpoints is centred on the segment, so n = 1 sits at the
    midpoint and consecutive viewpoints stay one spacing apart.
    """
    p1, p2 = np.asarray(p_e1, float), np.asarray(p_e2, float)
    dn = np.asarray(d_n, float)
    dn = dn / np.linalg.norm(dn)
    length = float(np.linalg.norm(p2 - p1))
    spacing = 2.0 * r_c * math.sin(hfov / 2.0)
    offset = r_c * math.cos(hfov / 2.0)
    n = max(1, math.ceil(length / spacing - 1e-12))
    d_l = (p2 - p1) / length if length > 0 else np.zeros(3)
    mid = 0.5 * (p1 + p2)
    i = np.arange(1, n + 1)
    pos = mid + ((i - (n + 1) / 2.0) * spacing)[:, None] * d_l + offset * dn
    return pos, spacing, offset


def longitudinal_geometry(ssg: SceneGraph, lid: int, interior_hint=None):
    """(p_e1, p_e2, wall normal into the interior) for a published longitudinal."""
    v = ssg.vertex(lid)
    he = v.half_extents
    ax = int(np.argmax(he))
    d_l = v.rotation[:, ax]
    p1, p2 = v.position - he[ax] * d_l, v.position + he[ax] * d_l
    walls = [e.dst for e in ssg.out_edges(lid) if e.label == EDGE_ATTACHED]
    if walls:
        w = ssg.vertex(walls[0])
        nax = int(np.argmin(w.half_extents))
        sign = np.sign(v.position[nax] - w.position[nax]) or 1.0
    else:
        # no wall yet: the thinnest axis of the bar faces the interior
        nax = int(np.argmin(np.where(np.arange(3) == ax, np.inf, he)))
        sign = 1.0
        if interior_hint is not None:
            sign = np.sign(np.asarray(interior_hint, float)[nax] - v.position[nax]) or 1.0
    d_n = np.zeros(3)
    d_n[nax] = sign
    return p1, p2, d_n


def candidate_viewpoints(world: VoxelWorld, ssg: SceneGraph, lid: int, camera: SensorModel,
                         interior_hint=None, max_nudge: float = 0.5) -> list:
    p1, p2, d_n = longitudinal_geometry(ssg, lid, interior_hint)
    pos, _, _ = viewpoint_layout(p1, p2, d_n, camera.max_range, camera.hfov)
    yaw = math.atan2(-d_n[1], -d_n[0])
    cl = world.optimistic_clearance()
    out = []
    steps = np.arange(0.0, max_nudge + 1e-9, world.res / 2)
    for i, p in enumerate(pos):
        for s in steps:
            q = p + s * d_n
            if world.point_clear(q, cl):
                out.append(Viewpoint(q, yaw, lid, i))
                break
        else:
            log.info("viewpoint %d of longitudinal %d infeasible, dropped", i, lid)
    return out


def visible_targets(world: VoxelWorld, vp: Viewpoint, camera: SensorModel, mask: np.ndarray,
                    seen: np.ndarray) -> set:
    """Flat indices of unseen masked voxels a camera at ``vp`` would see on the known map."""
    blocked = (world.state == OCC).view(np.uint8)
    hit = camera_hits(world, vp.config(), camera, np.ascontiguousarray(blocked))
    flat_m, flat_s = mask.reshape(-1), seen.reshape(-1)
    return set(hit[flat_m[hit] & ~flat_s[hit]].tolist())


def prune(world: VoxelWorld, vps: list, camera: SensorModel, mask: np.ndarray,
          seen: np.ndarray | None = None) -> list:
    """Greedy set cover of the unseen masked voxels; viewpoints adding nothing are dropped."""
    seen = world.seen if seen is None else seen
    sets = [visible_targets(world, v, camera, mask, seen) for v in vps]
    covered: set = set()
    chosen = []
    left = list(range(len(vps)))
    while left:
        gains = [len(sets[i] - covered) for i in left]
        j = int(np.argmax(gains))
        if gains[j] == 0:
            break
        i = left.pop(j)
        chosen.append(i)
        covered |= sets[i]
    return [vps[i] for i in sorted(chosen)]


def compute_viewpoints(world: VoxelWorld, ssg: SceneGraph, lids, camera: SensorModel,
                       seen: np.ndarray | None = None, interior_hint=None) -> list:
    """Pruned viewpoints for the given longitudinals (one id or an iterable of ids)."""
    if isinstance(lids, (int, np.integer)):
        lids = [int(lids)]
    lids = sorted(lids)
    boxes = [ssg.vertex(l).bbox() for l in lids]
    if not boxes:
        return []
    mask = world.box_mask(boxes)
    cands = []
    for l in lids:
        cands += candidate_viewpoints(world, ssg, l, camera, interior_hint)
    return prune(world, cands, camera, mask, seen)


__all__ = ["Viewpoint", "viewpoint_layout", "longitudinal_geometry", "candidate_viewpoints",
           "compute_viewpoints", "prune", "visible_targets"]
