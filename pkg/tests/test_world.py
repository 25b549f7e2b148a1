import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predinspect import _kernels_py, kernels
from predinspect.tank import LONGITUDINAL, TankSpec
from predinspect.world import (FREE, OCC, UNKNOWN, PathCollision, RobotConfiguration, SensorModel,
                               camera_sensor, coverage, depth_sensor, execute_path, generate_tank,
                               path_length, sense_camera, sense_depth)

try:
    from predinspect import _kernels as _kernels_c
except ImportError:  # pragma: no cover
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")


@pytest.fixture
def world():
    return generate_tank(TankSpec(n_compartments=2))[0]


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_sensor_models():
    d, c = depth_sensor(), camera_sensor()
    assert math.degrees(d.hfov) == pytest.approx(360) and math.degrees(d.vfov) == pytest.approx(90)
    assert math.degrees(c.hfov) == pytest.approx(90) and math.degrees(c.vfov) == pytest.approx(60)
    assert c.max_range == 3.0
    with pytest.raises(ValueError):
        SensorModel(0.0, 1.0, 3.0)
    assert c.in_fov((1, 0.9, 0), 0.0) and not c.in_fov((1, 1.1, 0), 0.0)
    assert not c.in_fov((1, 0, 0.7), 0.0)


def test_empty_void_rays_reach_range():
    blocked = np.zeros((40, 40, 40), np.uint8)
    state = np.zeros_like(blocked, dtype=np.int8)
    origin = np.array([4.0, 4.0, 4.0])
    dirs = depth_sensor(max_range=2.0, resolution_deg=10).directions()
    hits = kernels.cast_rays(blocked, origin, dirs, 2.0, 0.2, state, True)
    assert np.all(hits == -1)
    assert not np.any(state == OCC)
    # every voxel a ray reached is free, and only voxels within range (+ one voxel) were touched
    idx = np.argwhere(state == FREE)
    d = np.linalg.norm((idx + 0.5) * 0.2 - origin, axis=1)
    assert d.max() <= 2.0 + 0.2 * math.sqrt(3)
    for r in dirs[:: max(1, len(dirs) // 20)]:
        p = origin + 1.9 * r
        assert state[tuple(np.floor(p / 0.2).astype(int))] == FREE


def test_wall_one_metre_away(world):
    # robot 1 m from the -y hull between two bars; the wall voxel straight ahead becomes occupied
    conf = RobotConfiguration((2.7, 1.2, 2.3), -math.pi / 2)
    sense_depth(world, conf, depth_sensor())
    assert world.state[13, 0, 11] == OCC
    assert np.all(world.state[13, 1:6, 11] == FREE)


def brute_visible(world, origin, region, sensor):
    lo, hi = region
    idx = np.stack(np.meshgrid(*[np.arange(a, b) for a, b in zip(lo, hi)], indexing="ij"), -1).reshape(-1, 3)
    c = (idx + 0.5) * world.res - origin
    horiz = np.hypot(c[:, 0], c[:, 1])
    ok = (np.linalg.norm(c, axis=1) <= sensor.max_range) & (np.abs(c[:, 2]) <= math.tan(sensor.vfov / 2) * horiz)
    return int(ok.sum())


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(_kernels_c, marks=needs_ext)])
def test_count_visible_fresh_world(world, impl):
    region = world.compartment_region(0)
    origin = np.array([2.7, 2.7, 2.2])
    s = depth_sensor()
    mask = np.zeros(world.shape, np.uint8)
    total, masked = impl.count_visible(world.state, mask, origin, region[0], region[1], s.max_range,
                                       s.tan_half_v, world.res)
    assert total == brute_visible(world, origin, region, s)
    assert masked == 0


def test_gain_drops_near_wall(world):
    from predinspect.planner.gains import volume_gain

    s = depth_sensor()
    region = world.compartment_region(0)
    centred = volume_gain(world, [2.7, 2.7, 2.2], s, region)[0]
    near = volume_gain(world, [2.7, 0.7, 2.2], s, region)[0]
    assert near < centred
    # once mapped, a pose adds nothing
    sense_depth(world, RobotConfiguration([2.7, 2.7, 2.2]), s)
    assert volume_gain(world, [2.7, 2.7, 2.2], s, region)[0] == 0


@needs_ext
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    shape = (18, 15, 12)
    blocked = (rng.random(shape) < 0.08).astype(np.uint8)
    origin = rng.uniform([0.5, 0.5, 0.5], [3.0, 2.5, 1.9])
    blocked[tuple(np.floor(origin / 0.2).astype(int))] = 0
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    s1 = np.zeros(shape, np.int8)
    s2 = np.zeros(shape, np.int8)
    h1 = _kernels_py.cast_rays(blocked, origin, dirs, 2.5, 0.2, s1, True)
    h2 = _kernels_c.cast_rays(blocked, origin, np.ascontiguousarray(dirs), 2.5, 0.2, s2, True)
    np.testing.assert_array_equal(h1, h2)
    np.testing.assert_array_equal(s1, s2)
    mask = (rng.random(shape) < 0.3).astype(np.uint8)
    probe = rng.uniform([0.5, 0.5, 0.5], [3.0, 2.5, 1.9])
    args = (mask, probe, (0, 0, 0), shape, 2.0, 1.0, 0.2)
    assert _kernels_py.count_visible(s1, *args) == _kernels_c.count_visible(s2, *args)


def test_camera_sees_whole_front_face():
    w, _ = generate_tank(TankSpec(n_compartments=1, interior=(15, 25, 20)))
    bar = next(o for o in w.layout.by_label(LONGITUDINAL) if o.lo[1] == 1 and o.lo[2] == 12)
    lo, hi = bar.bounds(w.res)
    cam = camera_sensor()
    d = cam.max_range * math.cos(cam.hfov / 2)
    pos = (0.5 * (lo[0] + hi[0]), hi[1] + d, 0.5 * (lo[2] + hi[2]))
    sense_camera(w, RobotConfiguration(pos, -math.pi / 2), cam)
    face = w.seen[bar.lo[0]:bar.hi[0], bar.hi[1] - 1, bar.lo[2]:bar.hi[2]]
    assert face.size == (bar.hi[0] - bar.lo[0]) * (bar.hi[2] - bar.lo[2])
    assert face.all()


def test_camera_occlusion_and_monotone_flags(world):
    cam = camera_sensor()
    # facing the bulkhead away from the manhole: nothing of the next compartment is visible
    conf = RobotConfiguration((4.0, 1.0, 3.6), 0.0)
    sense_camera(world, conf, cam)
    other = [o.oid for o in world.layout.objects if o.compartment == 1]
    assert not world.seen[np.isin(world.obj, other)].any()
    conf2 = RobotConfiguration((2.7, 2.7, 2.2), math.pi / 2)
    first = sense_camera(world, conf2, cam)
    assert len(first) > 0
    assert len(sense_camera(world, conf2, cam)) == 0


def test_execute_straight_path():
    w, _ = generate_tank(TankSpec(n_compartments=3))
    path = [RobotConfiguration((1.0, 2.7, 2.2)), RobotConfiguration((11.0, 2.7, 2.2))]
    final, elapsed, events = execute_path(w, path, v_max=2.0, sense_period=0.25)
    assert elapsed == pytest.approx(5.0)
    assert len(events) == 20
    assert events[-1].time == pytest.approx(5.0)
    np.testing.assert_allclose(final.position, [11.0, 2.7, 2.2])
    assert path_length(path) == pytest.approx(10.0)


def test_execute_collision(world):
    path = [RobotConfiguration((2.7, 2.7, 2.2)), RobotConfiguration((2.7, -1.0, 2.2))]
    with pytest.raises(PathCollision):
        execute_path(world, path, 2.0, 0.25)
    assert not world.state.any()


def test_zero_length_path(world):
    p = RobotConfiguration((2.7, 2.7, 2.2))
    _, elapsed, events = execute_path(world, [p], 2.0, 0.25)
    assert elapsed == 0.0 and len(events) == 1 and events[0].time == 0.0
    assert world.state[13, 13, 11] == FREE


def test_carve_only_touches_unknown(world):
    world.state[13, 13, 11] = OCC
    world.carve((2.7, 2.7, 2.2))
    assert world.state[13, 13, 11] == OCC
    assert world.state[13, 14, 11] == FREE
    assert world.state[13, 13, 14] == UNKNOWN


def test_coverage_examples():
    w, _ = generate_tank(TankSpec(n_compartments=1, longitudinals_per_wall=1, missing=[(0, 1, 0)]))
    assert coverage(w) == 0.0
    bar = w.layout.by_label(LONGITUDINAL)[0]
    vox = np.zeros(w.shape, bool)
    vox[bar.lo[0]:bar.hi[0], bar.lo[1]:bar.hi[1], bar.lo[2]:bar.hi[2]] = True
    free = w.truth == 0
    nb = np.zeros_like(free)
    for ax in range(3):
        nb |= np.roll(free, 1, ax) | np.roll(free, -1, ax)
    visible = vox & nb
    half = visible.copy()
    half[(bar.lo[0] + bar.hi[0]) // 2:] = False
    w.seen |= half
    assert coverage(w) == pytest.approx(100.0 * half.sum() / visible.sum())
    w.seen |= w.semantic
    assert coverage(w) == 100.0
