import numpy as np
import pytest

from predinspect.graph import SceneGraph
from predinspect.perception import DetectionTracker, update_detections
from predinspect.tank import COMPARTMENT, LONGITUDINAL, MANHOLE, WALL, TankSpec, layout


@pytest.fixture(scope="module")
def tl():
    return layout(TankSpec(n_compartments=2))


def first(tl, label, comp=0):
    return next(o for o in tl.by_label(label) if o.compartment == comp)


def test_wall_published_on_third_scan(tl):
    tr, g = DetectionTracker(tl), SceneGraph()
    w = first(tl, WALL).oid
    assert update_detections({w: 10}, tr, g) == []
    assert update_detections({w: 10}, tr, g) == []
    assert update_detections({w: 10}, tr, g) == [w]
    assert update_detections({w: 10}, tr, g) == []
    assert g.num_vertices() == 1


def test_too_few_rays_do_not_count(tl):
    tr, g = DetectionTracker(tl, h_min=5), SceneGraph()
    w = first(tl, WALL).oid
    for _ in range(5):
        update_detections({w: 4}, tr, g)
    assert g.num_vertices() == 0 and tr.counts.get(w, 0) == 0


def test_edge_added_once_both_ends_published(tl):
    tr, g = DetectionTracker(tl), SceneGraph()
    bar = first(tl, LONGITUDINAL)
    for _ in range(3):
        update_detections({bar.oid: 8}, tr, g)
    assert g.num_edges() == 0
    for _ in range(3):
        update_detections({bar.parent: 8}, tr, g)
    assert [(e.src, e.dst, e.label) for e in g.edges] == [(bar.oid, bar.parent, "attached_to")]


def test_compartment_needs_three_walls(tl):
    tr, g = DetectionTracker(tl), SceneGraph()
    walls = [o.oid for o in tl.by_label(WALL) if o.compartment == 0]
    comp = first(tl, COMPARTMENT).oid
    for _ in range(3):
        update_detections({w: 6 for w in walls[:2]}, tr, g)
    assert comp not in g.vertices
    for _ in range(3):
        update_detections({w: 6 for w in walls[:3]}, tr, g)
    assert comp in g.vertices
    assert sum(1 for e in g.edges if e.src == comp) == 3


def test_attribution_restricted_to_compartment(tl):
    tr, g = DetectionTracker(tl), SceneGraph()
    other = first(tl, WALL, comp=1).oid
    manhole = first(tl, MANHOLE).oid
    for _ in range(3):
        update_detections({other: 20, manhole: 20}, tr, g, compartment=0)
    assert other not in g.vertices and manhole in g.vertices
    for _ in range(3):
        update_detections({other: 20}, tr, g, compartment=None)
    assert other in g.vertices


def test_noisy_pose_running_mean(tl):
    bar = first(tl, LONGITUDINAL)
    truth = DetectionTracker(tl).gt.vertex(bar.oid).position
    for seed in range(50):
        tr, g = DetectionTracker(tl, sigma_pose=0.1, seed=seed), SceneGraph()
        for _ in range(10):
            update_detections({bar.oid: 9}, tr, g)
        assert tr.counts[bar.oid] == 10
        assert np.linalg.norm(g.vertex(bar.oid).position - truth) < 0.3
        np.testing.assert_allclose(g.vertex(bar.oid).position, tr.means[bar.oid])


def test_exact_pose_without_noise(tl):
    tr, g = DetectionTracker(tl), SceneGraph()
    bar = first(tl, LONGITUDINAL)
    for _ in range(3):
        update_detections({bar.oid: 9}, tr, g)
    np.testing.assert_array_equal(g.vertex(bar.oid).position, tr.gt.vertex(bar.oid).position)
