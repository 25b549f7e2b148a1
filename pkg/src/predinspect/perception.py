"""Simulated semantic segmentation: per-object detection counts feeding an incremental scene graph.

Ground-truth association stands in for plane/line fitting; what is kept is
the count-and-threshold logic and the relation rules that decide which edges
a newly published object brings along.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Pose, SceneGraph, Vertex
from .tank import COMPARTMENT, LONGITUDINAL, MANHOLE, WALL, TankLayout, build_ssg

DEFAULT_THRESHOLDS = {WALL: 3, COMPARTMENT: 3, LONGITUDINAL: 3, MANHOLE: 3}


@dataclass
class DetectionTracker:
    layout: TankLayout
    h_min: int = 5
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    sigma_pose: float = 0.0
    seed: int = 0
    # walls of a compartment that must be hit in one scan for the compartment to count
    compartment_walls: int = 3
    # only segment objects belonging to the robot's compartment (and its manholes)
    restrict_to_compartment: bool = True
    counts: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)
    published: set = field(default_factory=set)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.gt = build_ssg(self.layout)
        self._comp_oid = {o.compartment: o.oid for o in self.layout.by_label(COMPARTMENT)}
        self._walls_of = {}
        for o in self.layout.by_label(WALL):
            self._walls_of.setdefault(o.parent, []).append(o.oid)

    def allowed(self, oid: int, compartment: int | None) -> bool:
        if not self.restrict_to_compartment or compartment is None:
            return True
        o = self.layout.object(oid)
        if o.label == MANHOLE:
            return self._comp_oid[compartment] in o.links
        return o.compartment == compartment


def _observations(hits: dict, tracker: DetectionTracker, compartment) -> list:
    seen = [oid for oid, n in sorted(hits.items())
            if n >= tracker.h_min and tracker.allowed(oid, compartment)]
    seen_set = set(seen)
    for comp_oid, walls in sorted(tracker._walls_of.items()):
        if sum(1 for w in walls if w in seen_set) >= tracker.compartment_walls:
            if tracker.allowed(comp_oid, compartment):
                seen.append(comp_oid)
    return seen


def update_detections(hits: dict, tracker: DetectionTracker, ssg: SceneGraph,
                      compartment: int | None = None) -> list:
    """Fold one scan's object hits into the tracker; returns ids of newly published vertices."""
    new = []
    for oid in _observations(hits, tracker, compartment):
        gv = tracker.gt.vertex(oid)
        obs = gv.position
        if tracker.sigma_pose > 0:
            obs = obs + tracker.rng.normal(scale=tracker.sigma_pose, size=3)
        n = tracker.counts.get(oid, 0) + 1
        tracker.counts[oid] = n
        prev = tracker.means.get(oid)
        mean = obs.copy() if prev is None else prev + (obs - prev) / n
        tracker.means[oid] = mean
        v = Vertex(oid, gv.label, Pose(mean, gv.rotation), gv.half_extents)
        if oid in tracker.published:
            ssg.replace_vertex(v)
        elif n >= tracker.thresholds.get(gv.label, 3):
            ssg.insert_vertex(v)
            tracker.published.add(oid)
            new.append(oid)
    if new:
        _link(tracker, ssg)
    return new


def _link(tracker: DetectionTracker, ssg: SceneGraph) -> None:
    # relation rules come from ground truth: longitudinal -> wall, compartment -> walls,
    # manhole -> adjoining compartments; an edge appears once both ends are published
    for e in tracker.gt.edges:
        if e.src in tracker.published and e.dst in tracker.published:
            ssg.add_edge(e.src, e.dst, e.label, merge=True)


__all__ = ["DetectionTracker", "update_detections", "DEFAULT_THRESHOLDS"]
