import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cached_mission
from oracles import brute_force_open_tour, held_karp_open
from predinspect.kernels import FREE, OCC
from predinspect.planner import PlannerConfig
from predinspect.planner.gains import ae_gain, best_path, direction_penalty, path_value
from predinspect.planner.mission import start_mission
from predinspect.planner.steps import (ExplorationComplete, SwitchToSI, ae_step, overlap_ratio, ve_step)
from predinspect.planner.tsp import open_tour, tour_length
from predinspect.planner.viewpoints import compute_viewpoints, viewpoint_layout
from predinspect.tank import LONGITUDINAL, TankSpec, build_ssg
from predinspect.world import camera_sensor, generate_tank

HFOV = math.radians(90)


# -- viewpoints ---------------------------------------------------------------

def test_layout_three_viewpoints_for_ten_metres():
    pos, spacing, offset = viewpoint_layout((0, 0, 1), (10, 0, 1), (0, 1, 0), 3.0, HFOV)
    assert spacing == pytest.approx(6 * math.sin(math.pi / 4))
    assert offset == pytest.approx(3 * math.cos(math.pi / 4))
    assert len(pos) == 3
    np.testing.assert_allclose(pos[:, 1], offset)
    np.testing.assert_allclose(np.diff(pos[:, 0]), spacing)
    assert pos[:, 0].mean() == pytest.approx(5.0)


def test_short_segment_single_midpoint_viewpoint():
    pos, spacing, _ = viewpoint_layout((1, 0, 0), (3, 0, 0), (0, -1, 0), 3.0, HFOV)
    assert 2.0 <= spacing
    assert len(pos) == 1
    np.testing.assert_allclose(pos[0], [2.0, -3 * math.cos(math.pi / 4), 0.0])


@pytest.fixture(scope="module")
def long_bar():
    w, _ = generate_tank(TankSpec(n_compartments=1, interior=(52, 25, 20)))
    g = build_ssg(w.layout)
    w.state[:] = np.where(w.truth > 0, OCC, FREE)
    bar = next(o for o in w.layout.by_label(LONGITUDINAL) if o.lo[2] == 8 and o.lo[1] == 1)
    return w, g, bar


def test_ten_metre_bar_gets_three_viewpoints(long_bar):
    w, g, bar = long_bar
    assert (bar.hi[0] - bar.lo[0]) * w.res == pytest.approx(10.0)
    vps = compute_viewpoints(w, g, bar.oid, camera_sensor())
    assert len(vps) == 3
    xs = sorted(v.position[0] for v in vps)
    np.testing.assert_allclose(np.diff(xs), 6 * math.sin(math.pi / 4), atol=1e-9)
    for v in vps:
        # stand-off measured from the bar's free face
        assert v.position[1] - bar.hi[1] * w.res == pytest.approx(3 * math.cos(math.pi / 4), abs=0.26)
        assert v.yaw == pytest.approx(-math.pi / 2)


def test_fully_seen_bar_needs_no_viewpoints(long_bar):
    w, g, bar = long_bar
    seen = np.ones(w.shape, bool)
    assert compute_viewpoints(w, g, bar.oid, camera_sensor(), seen=seen) == []


# -- tsp ----------------------------------------------------------------------

def test_held_karp_matches_brute_force():
    rng = np.random.default_rng(3)
    for n in range(2, 7):
        pts = rng.uniform(0, 10, (n, 2))
        c = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        assert held_karp_open(c) == pytest.approx(brute_force_open_tour(c))


def test_tour_single_viewpoint():
    assert open_tour(np.zeros((2, 2))) == [0, 1]


def test_collinear_points_visited_in_order():
    xs = np.array([0.0, 4.0, 1.0, 3.0, 2.0, 5.0])
    c = np.abs(xs[:, None] - xs[None])
    order = open_tour(c)
    assert list(xs[order]) == sorted(xs)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 10))
def test_tour_within_five_percent_of_optimum(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 10, (n, 3))
    c = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    order = open_tour(c)
    assert order[0] == 0 and sorted(order) == list(range(n))
    assert tour_length(c, order) <= 1.05 * held_karp_open(c) + 1e-9


# -- gains ----------------------------------------------------------------------

def test_ae_gain_identities():
    ve, s = np.array([4.0, 10.0]), np.array([2.0, 0.0])
    np.testing.assert_array_equal(ae_gain(ve, s, 0.0, 0.0), ve)
    np.testing.assert_array_equal(ae_gain(ve, s, 1.0, 0.0), s)
    np.testing.assert_array_equal(ae_gain(ve, s, 0.5, 0.2), 0.7 * s + 0.5 * ve)


def test_path_value_closed_form():
    v = path_value([1.0, 2.0], [0.0, 3.0], 2.0, 0.1, 0.5)
    assert v == pytest.approx(math.exp(-1.0) * (1.0 + 2.0 * math.exp(-0.3)))


def test_direction_penalty():
    straight = np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0.0]])
    assert direction_penalty(straight, [1, 0, 0]) == pytest.approx(0.0, abs=1e-12)
    back = direction_penalty(straight, [-1, 0, 0])
    side = direction_penalty(straight, [0, 1, 0])
    assert back > side > 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=12), st.floats(0.01, 100))
def test_best_path_scale_invariant(vals, k):
    assert best_path(vals) == best_path([k * v for v in vals])


def test_overlap_ratio_examples():
    unit = (np.zeros(3), np.ones(3))
    far = (np.full(3, 5.0), np.full(3, 6.0))
    assert overlap_ratio([], [unit], 0.5) == 0
    assert overlap_ratio([unit], [unit], 0.5) == 1.0
    pred = [unit] * 3 + [far] * 5
    assert overlap_ratio([unit], pred, 0.5) == 0.375
    with pytest.raises(ValueError):
        overlap_ratio([unit], [], 0.5)


# -- single steps -----------------------------------------------------------------

def test_ae_switches_to_si_when_prediction_confirmed():
    w, _ = generate_tank(TankSpec(n_compartments=1))
    st_ = start_mission(w, PlannerConfig(mode="pp-ae"))
    gt = st_.tracker.gt
    boxes = []
    for o in w.layout.by_label(LONGITUDINAL):
        st_.ssg.insert_vertex(gt.vertex(o.oid))
        boxes.append(gt.vertex(o.oid).bbox())
    st_.predicted_boxes = boxes
    assert ae_step(st_) == SwitchToSI()
    assert st_.alpha == 1.0


def test_ve_complete_on_known_map():
    w, _ = generate_tank(TankSpec(n_compartments=1))
    st_ = start_mission(w, PlannerConfig())
    w.state[:] = np.where(w.truth > 0, OCC, FREE)
    w.touch()
    assert ve_step(st_) == ExplorationComplete()


# -- missions ----------------------------------------------------------------------

def test_single_compartment_baseline():
    m, st_ = cached_mission("baseline", 0, 1)
    assert m.status == "done"
    assert [c.modes for c in m.compartments] == [["VE", "SI"]]
    assert m.coverage > 99.0
    assert m.transit_time == 0.0
    assert m.total_time == pytest.approx(m.compartments[0].time)


def segments(trace):
    for entry in trace:
        pts = entry["points"]
        for a, b in zip(pts[:-1], pts[1:]):
            yield a, b


@pytest.mark.parametrize("mode", ["baseline", "pp-oi"])
def test_paths_collision_free(mode):
    _, st_ = cached_mission(mode, 0, 4 if mode == "pp-oi" else 1)
    w = st_.world
    for a, b in segments(st_.trace):
        assert w.segment_clear(a, b), (a, b)


def test_oi_mission_modes():
    m, st_ = cached_mission("pp-oi", 0, 4)
    assert m.status == "done"
    modes = [c.modes for c in m.compartments]
    assert modes[:2] == [["VE", "SI"], ["VE", "SI"]]
    assert modes[2:] == [["PP_OI"], ["PP_OI"]]
    assert m.coverage > 99.0


def test_oi_bookkeeping_disjoint():
    _, st_ = cached_mission("pp-oi", 0, 4)
    visited, skipped, redundant = set(st_.oi_visited), set(st_.oi_skipped), set(st_.oi_redundant)
    assert len(visited) == len(st_.oi_visited)
    assert visited.isdisjoint(skipped) and visited.isdisjoint(redundant) and skipped.isdisjoint(redundant)
    # every prior viewpoint is settled once per predictive compartment
    n = len(st_.prior_tour)
    for c in (2, 3):
        assert sum(1 for k in visited | skipped | redundant if k[0] == c) == n


def test_timeline_monotone():
    m, _ = cached_mission("pp-oi", 0, 4)
    ts = [t["t"] for t in m.timeline]
    assert ts == sorted(ts)
    assert m.total_time == pytest.approx(sum(c.time for c in m.compartments) + m.transit_time)


def test_oi_tolerates_missing_longitudinal():
    from predinspect.planner import run_mission

    w, _ = generate_tank(TankSpec(n_compartments=3, missing=[(2, 1, 1)]))
    cfg = PlannerConfig(mode="pp-oi")
    m, st_ = run_mission(w, cfg)
    assert m.status == "done"
    assert m.compartments[2].modes == ["PP_OI"]
    assert m.compartments[2].coverage > 99.0
    assert st_.oi_explore_total <= cfg.gains.max_oi_explore_steps * len(st_.prior_tour)


def test_oi_faster_than_baseline_on_predictive_compartments():
    t = {mode: np.mean([cached_mission(mode, s, 4)[0].time_per_compartment([2, 3]) for s in range(5)])
         for mode in ("baseline", "pp-oi")}
    assert t["pp-oi"] < t["baseline"]
