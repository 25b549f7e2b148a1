"""Single planning steps for each behaviour; each returns a path or a signal."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..predict import overlap_test
from ..tank import LONGITUDINAL
from ..world import RobotConfiguration
from .gains import ae_gain, best_path, direction_penalty, path_value, volume_gain
from .roadmap import local_graph, plan_path, travel_matrix
from .tsp import open_tour
from .viewpoints import compute_viewpoints, visible_targets

log = logging.getLogger(__name__)


class Signal:
    name = "signal"

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))


class ExplorationComplete(Signal):
    name = "exploration_complete"


class SwitchToSI(Signal):
    name = "switch_to_si"


class CompartmentDone(Signal):
    name = "compartment_done"


class InspectionDone(Signal):
    name = "inspection_done"


class NoViewpoints(RuntimeError):
    pass


class MissionStuck(RuntimeError):
    pass


def overlap_ratio(detected, predicted, kappa: float) -> float:
    """Share of predicted boxes that overlap (kappa) some detected box."""
    if len(predicted) == 0:
        raise ValueError("overlap ratio needs at least one predicted box")
    hit = sum(1 for p in predicted if any(overlap_test(p, d, kappa) for d in detected))
    return hit / len(predicted)


def to_configs(points, final_yaw: float | None = None) -> list:
    """Waypoints headed along the direction of travel."""
    pts = [np.asarray(p, float) for p in points]
    out = []
    for i, p in enumerate(pts):
        j = min(i, len(pts) - 2)
        if len(pts) > 1:
            d = pts[j + 1] - pts[j]
            yaw = math.atan2(d[1], d[0]) if np.hypot(d[0], d[1]) > 1e-9 else 0.0
        else:
            yaw = 0.0
        out.append(RobotConfiguration(p, yaw))
    if final_yaw is not None:
        out[-1].yaw = float(final_yaw)
    return out


def _published_longitudinals(state, compartment=None) -> list:
    ssg = state.ssg
    ids = [v for v, x in sorted(ssg.vertices.items()) if x.label == LONGITUDINAL]
    if compartment is None:
        return ids
    lo, hi = state.world.compartment_bounds(compartment)
    return [v for v in ids if np.all(ssg.vertex(v).position >= lo - 0.5)
            and np.all(ssg.vertex(v).position <= hi + 0.5)]


def detected_boxes(state, compartment=None) -> list:
    return [state.ssg.vertex(v).bbox() for v in _published_longitudinals(state, compartment)]


def _explore(state, ref_dir, semantic: bool = False, alpha: float = 0.0):
    """Shared body of the exploration steps: path of best value, or ExplorationComplete."""
    cfg, world = state.cfg, state.world
    g = cfg.gains
    pos = state.conf.position
    lg = local_graph(world, pos, state.rng, cfg.n_samples, cfg.local_box, cfg.k_neighbors,
                     bounds=world.compartment_bounds(state.compartment))
    region = world.compartment_region(state.compartment)
    pts = lg.points
    ve = np.zeros(len(pts))
    s = np.zeros(len(pts))
    for i, p in enumerate(pts):
        ve[i], s[i] = volume_gain(world, p, state.depth, region)
    state.last_gains = (ve.copy(), s.copy())
    if ve.max() < g.ve_min and (not semantic or s.max() < g.ve_min):
        return ExplorationComplete()
    gain = ae_gain(ve, s, alpha, g.delta) if semantic else ve
    dist = lg.dist
    vals = np.full(len(pts), -np.inf)
    paths = {}
    for j in range(1, len(pts)):
        idx = lg.path(j)
        if len(idx) < 2:
            continue
        z = direction_penalty(pts[idx], ref_dir)
        vals[j] = path_value(gain[idx], dist[idx], z, g.mu, g.zeta)
        paths[j] = idx
    j = best_path(vals)
    if j not in paths:
        return ExplorationComplete()
    return to_configs(pts[paths[j]])


def ve_step(state):
    """Volumetric exploration: best path of the local graph, or ExplorationComplete."""
    return _explore(state, state.explore_dir)


def ae_step(state, prediction=None):
    """Exploration biased toward predicted semantics; SwitchToSI once the prediction is confirmed."""
    pred = state.predicted_boxes if prediction is None else prediction
    alpha = overlap_ratio(detected_boxes(state, state.compartment), pred, state.cfg.gains.kappa) if pred else 0.0
    state.alpha = alpha
    if alpha >= state.cfg.gains.alpha_thr:
        return SwitchToSI()
    out = _explore(state, state.explore_dir, semantic=True, alpha=alpha)
    if isinstance(out, ExplorationComplete):
        return SwitchToSI()
    return out


def _nothing_left(state, vp, box) -> bool:
    """True when a camera at ``vp`` would see no unseen part of the known or predicted bars."""
    boxes = detected_boxes(state, state.compartment) + [b for _, b in state.oi_tour]
    mask = state.world.box_mask(boxes)
    return not visible_targets(state.world, vp, state.camera, mask, state.world.seen)


def oi_step(state):
    """Follow the transformed prior tour, exploring toward viewpoints whose target is not yet seen.

    The tour is walked in order.  A detected target that cannot be reached on
    the known map yet stays pending while the next reachable detected
    viewpoint is visited; exploration steps happen only when the current
    target is undetected or nothing ahead can be reached.
    """
    g = state.cfg.gains
    world = state.world
    bounds = world.compartment_bounds(state.compartment)
    tour = state.oi_tour
    while True:
        pending = [i for i in range(len(tour)) if i not in state.oi_done]
        if not pending:
            return CompartmentDone()
        i = pending[0]
        vp, box = tour[i]
        detected = detected_boxes(state, state.compartment)
        if any(overlap_test(box, d, g.kappa) for d in detected):
            # only a detected target's surface is known well enough to call it covered
            if _nothing_left(state, vp, box):
                state.oi_done.add(i)
                state.oi_redundant.append((state.compartment,) + vp.key)
                state.oi_explore = 0
                continue
            for j in pending:
                vj, bj = tour[j]
                if j != i and (_nothing_left(state, vj, bj)
                               or not any(overlap_test(bj, d, g.kappa) for d in detected)):
                    continue
                pts = plan_path(world, state.conf.position, vj.position, state.rng, bounds=bounds,
                                max_samples=state.cfg.si_max_samples, k=state.cfg.k_neighbors)
                if pts is not None:
                    state.oi_done.add(j)
                    state.oi_visited.append((state.compartment,) + vj.key)
                    if j == i:
                        state.oi_explore = 0
                    return to_configs(pts, vj.yaw)
        if state.oi_explore >= g.max_oi_explore_steps:
            log.info("skipping viewpoint %s after %d exploration steps", vp.key, state.oi_explore)
            state.oi_skipped.append((state.compartment,) + vp.key)
            state.oi_done.add(i)
            state.oi_explore = 0
            continue
        state.oi_explore += 1
        state.oi_explore_total += 1
        out = _explore(state, vp.position - state.conf.position)
        if isinstance(out, ExplorationComplete):
            state.oi_explore = g.max_oi_explore_steps
            continue
        return out


# -- semantic inspection ----------------------------------------------------------

def si_viewpoints(state, seen=None) -> list:
    world = state.world
    lids = _published_longitudinals(state, state.compartment)
    lo, hi = world.compartment_bounds(state.compartment)
    vps = compute_viewpoints(world, state.ssg, lids, state.camera, seen=seen, interior_hint=0.5 * (lo + hi))
    if seen is None:
        vps = [v for v in vps if v.key not in state.si_visited]
    return vps


def _needs_replan(tour, vps, rho_thr) -> bool:
    if tour is None:
        return True
    cur = {v.key: v for v in tour}
    new = {v.key: v for v in vps}
    if set(cur) != set(new):
        return True
    return any(np.linalg.norm(cur[k].position - new[k].position) > rho_thr for k in cur)


def si_plan(state, vps) -> tuple[list, list]:
    """Order ``vps`` into an open tour from the robot.

    Travel costs come from a roadmap on the optimistic map (only known
    obstacles block), so the order does not depend on which parts of the
    compartment happen to be mapped yet.  Returns (tour, unreachable).
    """
    if not vps:
        raise NoViewpoints("no viewpoints to plan over")
    world = state.world
    cost, _, ok = travel_matrix(world, state.conf.position, [v.position for v in vps], state.rng,
                                bounds=world.compartment_bounds(state.compartment),
                                max_samples=state.cfg.si_max_samples, k=state.cfg.k_neighbors,
                                clearance=world.optimistic_clearance())
    keep = [0] + [i + 1 for i in range(len(vps)) if ok[i]]
    sub = cost[np.ix_(keep, keep)]
    order = open_tour(sub, 0, seed=state.cfg.seed)
    tour = [vps[keep[i] - 1] for i in order[1:]]
    return tour, [v for i, v in enumerate(vps) if not ok[i]]


def _leg(state, vp):
    world = state.world
    return plan_path(world, state.conf.position, vp.position, state.rng,
                     bounds=world.compartment_bounds(state.compartment),
                     max_samples=state.cfg.si_max_samples, k=state.cfg.k_neighbors)


def si_step(state):
    """Next leg of the inspection tour, re-planning when the viewpoint set changed.

    Legs are planned on the known-free map; a viewpoint that cannot be
    reached yet is passed over for the next one in tour order, and when none
    can be reached the robot takes an exploration step toward the first.
    """
    cfg = state.cfg
    vps = si_viewpoints(state)
    if not vps:
        return InspectionDone()
    remaining = None if state.si_tour is None else [v for v in state.si_tour if v.key not in state.si_visited]
    if _needs_replan(remaining, vps, cfg.gains.rho_thr):
        tour, unreachable = si_plan(state, vps)
        state.si_replans += 1
        if unreachable:
            log.info("dropping %d viewpoints with no route", len(unreachable))
            state.si_visited.update(v.key for v in unreachable)
        state.si_tour = tour
    else:
        state.si_tour = [next(v for v in vps if v.key == t.key) for t in remaining]
    for vp in state.si_tour:
        pts = _leg(state, vp)
        if pts is not None:
            state.si_visited.add(vp.key)
            state.si_tour = [v for v in state.si_tour if v.key != vp.key]
            state.si_explore = 0
            return to_configs(pts, vp.yaw)
    if state.si_tour and state.si_explore < cfg.max_si_explore_steps:
        state.si_explore += 1
        out = _explore(state, state.si_tour[0].position - state.conf.position)
        if not isinstance(out, ExplorationComplete):
            return out
    log.info("dropping %d unreachable viewpoints", len(state.si_tour))
    state.si_visited.update(v.key for v in state.si_tour)
    state.si_tour = None
    return si_step(state)


def full_tour(state, start) -> list:
    """Coverage tour over every published longitudinal of the compartment, ignoring what was seen."""
    world = state.world
    seen = np.zeros(world.shape, dtype=bool)
    vps = si_viewpoints(state, seen=seen)
    if not vps:
        return []
    pts = np.vstack([np.asarray(start, float)] + [v.position for v in vps])
    cost = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    order = open_tour(cost, 0, seed=state.cfg.seed)
    return [(vps[i - 1], state.ssg.vertex(vps[i - 1].target).bbox()) for i in order[1:]]


__all__ = ["Signal", "ExplorationComplete", "SwitchToSI", "CompartmentDone", "InspectionDone",
           "NoViewpoints", "MissionStuck", "overlap_ratio", "ve_step", "ae_step", "oi_step",
           "si_step", "si_plan", "si_viewpoints", "full_tour", "to_configs", "detected_boxes"]
