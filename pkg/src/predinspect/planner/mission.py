"""Mission state machine tying exploration, inspection, mining and prediction together."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..graph import SceneGraph
from ..matching import RigidTransform
from ..metrics import CompartmentRecord, MissionMetrics
from ..mining import build_hierarchy, summarize
from ..perception import DetectionTracker, update_detections
from ..predict import predict, transformed_box
from ..tank import COMPARTMENT, LONGITUDINAL, MANHOLE
from ..world import (PathCollision, RobotConfiguration, VoxelWorld, execute_path, path_length)
from .config import PlannerConfig
from .roadmap import NoGraph, plan_path
from .steps import (CompartmentDone, ExplorationComplete, InspectionDone, MissionStuck, Signal,
                    SwitchToSI, ae_step, full_tour, oi_step, si_step, to_configs, ve_step)
from .viewpoints import Viewpoint

log = logging.getLogger(__name__)

VE, SI, PP_AE, PP_OI, TRAVERSE, DONE = "VE", "SI", "PP_AE", "PP_OI", "TraverseManhole", "Done"


@dataclass
class MissionState:
    world: VoxelWorld
    cfg: PlannerConfig
    conf: RobotConfiguration
    ssg: SceneGraph = field(default_factory=SceneGraph)
    mode: str = VE
    compartment: int = 0
    time: float = 0.0
    explore_dir: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    alpha: float = 0.0
    predicted_boxes: list = field(default_factory=list)
    prediction: object = None
    prior_tour: list | None = None
    prior_pose: tuple | None = None
    oi_tour: list = field(default_factory=list)
    oi_done: set = field(default_factory=set)
    oi_explore: int = 0
    oi_explore_total: int = 0
    oi_visited: list = field(default_factory=list)
    oi_skipped: list = field(default_factory=list)
    oi_redundant: list = field(default_factory=list)
    si_tour: list | None = None
    si_visited: set = field(default_factory=set)
    si_explore: int = 0
    si_replans: int = 0
    entry_position: np.ndarray | None = None
    pending: tuple | None = None
    traversed: set = field(default_factory=set)
    done_compartments: list = field(default_factory=list)
    steps_here: int = 0
    last_gains: tuple | None = None

    def __post_init__(self):
        cfg = self.cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.depth = cfg.depth.model()
        self.camera = cfg.camera.model()
        self.tracker = DetectionTracker(self.world.layout, h_min=cfg.h_min,
                                        thresholds={k: cfg.n_thr for k in (COMPARTMENT, "wall", LONGITUDINAL,
                                                                           MANHOLE)},
                                        sigma_pose=cfg.sigma_pose, seed=cfg.seed)
        n = self.world.spec.n_compartments
        self.quota = n if cfg.compartments is None else min(n, cfg.compartments)
        self.records = {}
        self.metrics = MissionMetrics(cfg.mode, cfg.seed)
        self.trace = []
        self.tick_ms = []
        self.prediction_log = []
        self.hierarchies = []
        self.entry_position = self.conf.position.copy()
        self._record(self.compartment).modes.append(self.mode)
        self.metrics.timeline.append({"t": 0.0, "compartment": self.compartment, "mode": self.mode})

    # -- bookkeeping ---------------------------------------------------------

    def _record(self, c) -> CompartmentRecord:
        if c not in self.records:
            self.records[c] = CompartmentRecord(c)
        return self.records[c]

    def set_mode(self, mode: str) -> None:
        if mode == self.mode:
            return
        self.mode = mode
        if mode not in (TRAVERSE, DONE):
            r = self._record(self.compartment)
            if mode not in r.modes:
                r.modes.append(mode)
        self.metrics.timeline.append({"t": round(self.time, 9), "compartment": self.compartment, "mode": mode})

    def sense(self, ev) -> None:
        # inside a manhole both adjoining compartments are in view
        c = self.world.compartment_at(ev.config.position)
        update_detections(ev.hits, self.tracker, self.ssg, c)

    def fly(self, path, transit: bool = False, explore: bool = False) -> None:
        """Execute a path, account its time, and feed the sensing events to perception."""
        world, cfg = self.world, self.cfg
        final, elapsed, _ = execute_path(world, path, cfg.v_max, cfg.sense_period, self.depth,
                                         self.camera, on_sense=self.sense)
        dt = elapsed + cfg.dwell
        length = path_length(path)
        self.time += dt
        self.metrics.path_length += length
        if transit:
            self.metrics.transit_time += dt
        else:
            r = self._record(self.compartment)
            r.time += dt
            r.path_length += length
            r.paths += 1
            r.exploration_steps += int(explore)
            r.mode_time[self.mode] = r.mode_time.get(self.mode, 0.0) + dt
        if explore and length > 0:
            d = path[-1].position - path[0].position
            if np.linalg.norm(d) > 1e-9:
                self.explore_dir = d / np.linalg.norm(d)
        self.trace.append({"t": round(self.time, 9), "mode": self.mode, "compartment": self.compartment,
                           "points": [[round(float(x), 6) for x in p.position] for p in path]})
        self.conf = final
        self.steps_here += 1


def start_mission(world: VoxelWorld, cfg: PlannerConfig, start: RobotConfiguration | None = None) -> MissionState:
    world.reset()
    conf = world.default_start() if start is None else start
    c = world.compartment_at(conf.position)
    if c is None:
        raise ValueError("start position is not inside a compartment")
    st = MissionState(world, cfg, conf, compartment=c)
    # initial look around before the first plan
    st.fly([conf.copy()])
    return st


# -- transitions ------------------------------------------------------------------

def _compartment_vertex(st: MissionState, c: int):
    lo, hi = st.world.compartment_bounds(c)
    for v, x in sorted(st.ssg.vertices.items()):
        if x.label == COMPARTMENT and np.all(x.position >= lo) and np.all(x.position <= hi):
            return x
    return None


def _manholes_here(st: MissionState) -> list:
    lo, hi = st.world.compartment_bounds(st.compartment)
    out = []
    for v, x in sorted(st.ssg.vertices.items()):
        if x.label != MANHOLE or v in st.traversed:
            continue
        d = np.linalg.norm(np.maximum(0, np.maximum(lo - x.position, x.position - hi)))
        if d <= 0.5:
            out.append(v)
    return out


def _manhole_waypoints(st: MissionState, mid: int):
    m = st.ssg.vertex(mid)
    ax = int(np.argmin(m.half_extents))
    n = np.zeros(3)
    n[ax] = 1.0 if m.position[ax] >= st.conf.position[ax] else -1.0
    a = st.cfg.manhole_approach
    return m.position - a * n, m.position.copy(), m.position + a * n


def _approach(st: MissionState, mid: int):
    a, _, _ = _manhole_waypoints(st, mid)
    return plan_path(st.world, st.conf.position, a, st.rng,
                     bounds=st.world.compartment_bounds(st.compartment),
                     max_samples=st.cfg.si_max_samples, k=st.cfg.k_neighbors)


def _mine_and_predict(st: MissionState):
    cfg = st.cfg
    h = build_hierarchy(st.ssg.copy(), cfg.mining.params(cfg.match), cfg.mining.max_levels)
    cands = predict(h, phi=cfg.phi, kappa=cfg.gains.kappa)
    st.hierarchies.append({"after_compartment": st.compartment, "levels": summarize(h)})
    st.prediction_log.append({"after_compartment": st.compartment, "t": round(st.time, 9),
                              "candidates": [c.as_dict() for c in cands]})
    return cands


def _finish_compartment(st: MissionState) -> None:
    cfg = st.cfg
    c = st.compartment
    st.done_compartments.append(c)
    if len(st.done_compartments) >= st.quota:
        st.set_mode(DONE)
        return
    if st.mode == SI or st.prior_tour is None:
        tour = full_tour(st, st.entry_position)
        cv = _compartment_vertex(st, c)
        if tour and cv is not None:
            st.prior_tour, st.prior_pose = tour, (cv.position.copy(), cv.rotation.copy())
    elif st.mode == PP_OI:
        cv = _compartment_vertex(st, c)
        st.prior_tour = list(st.oi_tour)
        if cv is not None:
            st.prior_pose = (cv.position.copy(), cv.rotation.copy())
    here = _manholes_here(st)
    choice = None
    if cfg.mode != "baseline":
        cands = [x for x in _mine_and_predict(st) if x.anchor_base in here]
        if cands:
            best = cands[0]
            path = _approach(st, best.anchor_base)
            if path is not None:
                next_mode = PP_AE if cfg.mode == "pp-ae" else PP_OI
                choice = (best.anchor_base, path, next_mode, best)
    if choice is None:
        ranked = sorted(here, key=lambda m: (np.linalg.norm(st.ssg.vertex(m).position - st.conf.position), m))
        for m in ranked:
            path = _approach(st, m)
            if path is not None:
                choice = (m, path, VE, None)
                break
    if choice is None:
        raise MissionStuck(f"no traversable manhole from compartment {c}")
    st.pending = choice
    st.set_mode(TRAVERSE)


def _traverse(st: MissionState) -> None:
    mid, path, next_mode, cand = st.pending
    st.pending = None
    st.fly(to_configs(path), transit=True)
    a, m, b = _manhole_waypoints(st, mid)
    if not st.world.segment_clear(a, b, st.world.optimistic_clearance()):
        raise MissionStuck(f"manhole {mid} blocked")
    st.fly(to_configs([st.conf.position, m, b]), transit=True)
    st.traversed.add(mid)
    c = st.world.compartment_at(st.conf.position)
    if c is None or c in st.done_compartments:
        raise MissionStuck(f"manhole {mid} did not lead to a new compartment")
    st.compartment = c
    st.entry_position = st.conf.position.copy()
    st.steps_here = 0
    st.si_tour, st.si_visited, st.si_explore = None, set(), 0
    st.explore_dir = (b - a) / np.linalg.norm(b - a)
    st.prediction = cand
    st.world.mark_predicted([])
    st.predicted_boxes = []
    if cand is not None:
        st.predicted_boxes = [p.bbox() for p in cand.by_label(LONGITUDINAL)]
        if next_mode == PP_AE:
            st.world.mark_predicted(st.predicted_boxes)
        elif next_mode == PP_OI:
            tour = _transform_prior(st, cand)
            if tour is None:
                next_mode = PP_AE
                st.world.mark_predicted(st.predicted_boxes)
            else:
                st.oi_tour, st.oi_done, st.oi_explore = tour, set(), 0
    st.mode = TRAVERSE
    st._record(c)
    st.set_mode(next_mode)
    # a sensing dwell on arrival
    st.fly([st.conf.copy()])


def _transform_prior(st: MissionState, cand):
    """Prior tour moved from the compartment it was built in onto the predicted compartment."""
    comps = cand.by_label(COMPARTMENT)
    if st.prior_tour is None or st.prior_pose is None or not comps:
        return None
    pc = comps[0]
    p0, r0 = st.prior_pose
    r = pc.rotation @ r0.T
    tf = RigidTransform(r, pc.position - r @ p0)
    out = []
    for vp, box in st.prior_tour:
        h = r @ np.array([math.cos(vp.yaw), math.sin(vp.yaw), 0.0])
        nvp = Viewpoint(tf.apply(vp.position), math.atan2(h[1], h[0]), vp.target, vp.section)
        out.append((nvp, transformed_box(tf, *box)))
    return out


# -- the tick --------------------------------------------------------------------------

def mission_tick(st: MissionState) -> MissionState:
    t0 = time.perf_counter()
    try:
        _tick(st)
    finally:
        st.tick_ms.append((time.perf_counter() - t0) * 1e3)
    return st


def _tick(st: MissionState) -> None:
    mode = st.mode
    if mode == DONE:
        return
    if mode == TRAVERSE:
        _traverse(st)
        return
    if st.steps_here >= st.cfg.max_steps_per_compartment:
        log.warning("step cap reached in compartment %d", st.compartment)
        _finish_compartment(st)
        return
    try:
        if mode == VE:
            out = ve_step(st)
            if isinstance(out, ExplorationComplete):
                st.set_mode(SI)
                return
            st.fly(out, explore=True)
        elif mode == PP_AE:
            out = ae_step(st)
            if isinstance(out, SwitchToSI):
                st.set_mode(SI)
                return
            st.fly(out, explore=True)
        elif mode == PP_OI:
            before = st.oi_explore_total
            out = oi_step(st)
            if isinstance(out, CompartmentDone):
                _finish_compartment(st)
                return
            st.fly(out, explore=st.oi_explore_total > before)
        elif mode == SI:
            out = si_step(st)
            if isinstance(out, InspectionDone):
                _finish_compartment(st)
                return
            st.fly(out)
        else:  # pragma: no cover - guarded by set_mode
            raise RuntimeError(f"unknown mode {mode}")
    except NoGraph as exc:
        log.warning("compartment %d: %s", st.compartment, exc)
        if mode in (VE, PP_AE):
            st.set_mode(SI)
        else:
            _finish_compartment(st)


def finalize(st: MissionState, status: str = "done") -> MissionMetrics:
    from ..world import coverage

    w = st.world
    m = st.metrics
    m.status = status
    m.coverage = coverage(w)
    denom = w.semantic & ~w.residual
    for c, r in st.records.items():
        lo, hi = w.compartment_region(c)
        sl = tuple(slice(max(a, 0), b) for a, b in zip(lo, hi))
        n = int(denom[sl].sum())
        r.coverage = 100.0 if n == 0 else 100.0 * int((denom[sl] & w.seen[sl]).sum()) / n
    m.compartments = [st.records[c] for c in sorted(st.records)]
    return m


def run_mission(world: VoxelWorld, cfg: PlannerConfig, max_ticks: int = 2000):
    """Run to Done; returns (metrics, state).  MissionStuck propagates after metrics are final."""
    st = start_mission(world, cfg)
    for _ in range(max_ticks):
        if st.mode == DONE:
            break
        try:
            mission_tick(st)
        except (MissionStuck, PathCollision) as exc:
            exc.metrics = finalize(st, "stuck")
            exc.state = st
            raise
    else:
        log.warning("tick limit reached")
    return finalize(st, "done" if st.mode == DONE else "incomplete"), st


__all__ = ["MissionState", "mission_tick", "run_mission", "start_mission", "finalize",
           "VE", "SI", "PP_AE", "PP_OI", "TRAVERSE", "DONE", "Signal"]
