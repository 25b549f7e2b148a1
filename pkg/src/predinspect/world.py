"""Deterministic voxel world: ground truth, occupancy mapping, sensors and a kinematic robot."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .kernels import FREE, OCC, UNKNOWN
from .tank import LONGITUDINAL, MANHOLE, WALL, TankLayout, TankSpec, build_ssg, layout


class PathCollision(RuntimeError):
    def __init__(self, index: int, point):
        super().__init__(f"path collides near waypoint {index} at {np.round(point, 3).tolist()}")
        self.index = index
        self.point = np.asarray(point)


@dataclass(frozen=True)
class SensorModel:
    hfov: float
    vfov: float
    max_range: float
    resolution: float = math.radians(1.5)

    def __post_init__(self):
        if not (0 < self.hfov <= 2 * math.pi and 0 < self.vfov <= math.pi):
            raise ValueError("field of view out of range")
        if self.max_range <= 0 or self.resolution <= 0:
            raise ValueError("range and resolution must be positive")

    @property
    def tan_half_v(self) -> float:
        return math.tan(min(self.vfov / 2, math.radians(89.9)))

    def _angles(self, fov, centre, wrap):
        if wrap:
            n = max(1, int(round(fov / self.resolution)))
            return centre + np.arange(n) * (fov / n)
        n = int(math.floor(fov / self.resolution + 1e-9)) + 1
        return centre - fov / 2 + np.arange(n) * (fov / max(n - 1, 1))

    def directions(self, yaw: float = 0.0) -> np.ndarray:
        az = self._angles(self.hfov, yaw, self.hfov >= 2 * math.pi - 1e-12)
        el = self._angles(self.vfov, 0.0, False)
        a, e = np.meshgrid(az, el, indexing="ij")
        d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1)
        return np.ascontiguousarray(d.reshape(-1, 3))

    def in_fov(self, offset, yaw: float = 0.0) -> bool:
        """Whether a direction lies inside the frustum (range ignored)."""
        dx, dy, dz = offset
        horiz = math.hypot(dx, dy)
        if abs(math.atan2(dz, horiz)) > self.vfov / 2 + 1e-12:
            return False
        if self.hfov >= 2 * math.pi - 1e-12:
            return True
        rel = (math.atan2(dy, dx) - yaw + math.pi) % (2 * math.pi) - math.pi
        return abs(rel) <= self.hfov / 2 + 1e-12


def depth_sensor(max_range: float = 3.0, resolution_deg: float = 1.5) -> SensorModel:
    return SensorModel(math.radians(360), math.radians(90), max_range, math.radians(resolution_deg))


def camera_sensor(max_range: float = 3.0, resolution_deg: float = 1.0) -> SensorModel:
    return SensorModel(math.radians(90), math.radians(60), max_range, math.radians(resolution_deg))


@dataclass
class RobotConfiguration:
    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.yaw = float(self.yaw)

    def copy(self) -> "RobotConfiguration":
        return RobotConfiguration(self.position.copy(), self.yaw)


@dataclass
class SensingEvent:
    time: float
    config: RobotConfiguration
    hits: dict
    new_seen: int


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


class VoxelWorld:
    """Ground truth and the robot's map on one voxel lattice (origin at 0, pitch ``res``)."""

    def __init__(self, tl: TankLayout, robot_radius: float = 0.3):
        self.layout = tl
        self.spec = tl.spec
        self.res = tl.spec.voxel
        self.shape = tuple(tl.shape)
        self.robot_radius = robot_radius
        self.truth = np.ones(self.shape, dtype=np.uint8)
        self.obj = np.full(self.shape, -1, dtype=np.int32)
        for lo, hi in tl.interiors:
            self.truth[_sl(lo, hi)] = 0
        for lo, hi in tl.openings:
            self.truth[_sl(lo, hi)] = 0
        for o in tl.objects:
            if o.label == WALL:
                self.obj[_sl(o.lo, o.hi)] = o.oid
        for o in tl.objects:
            if o.label == LONGITUDINAL:
                self.truth[_sl(o.lo, o.hi)] = 1
                self.obj[_sl(o.lo, o.hi)] = o.oid
        for o in tl.objects:
            if o.label == MANHOLE:
                # the rim of the opening on both bulkhead faces stands in for the manhole
                lo, hi = np.array(o.lo), np.array(o.hi)
                rim = np.zeros(self.shape, dtype=bool)
                rim[_sl(lo - (0, 1, 1), hi + (0, 1, 1))] = True
                rim[_sl(lo, hi)] = False
                self.obj[rim & (self.truth == 1)] = o.oid
        self.semantic = (self.truth == 1) & np.isin(self.obj, [o.oid for o in tl.by_label(LONGITUDINAL)])
        free = self.truth == 0
        exposed = np.zeros(self.shape, dtype=bool)
        for ax in range(3):
            for sh in (1, -1):
                exposed |= np.roll(free, sh, axis=ax)
        # semantic voxels with no free face neighbour cannot be seen by any camera
        self.residual = self.semantic & ~exposed
        self.truth_clearance = ndimage.distance_transform_edt(self.truth == 0) * self.res
        self.reset()

    # -- mutable map state --------------------------------------------------

    def reset(self):
        self.state = np.zeros(self.shape, dtype=np.int8)
        self.seen = np.zeros(self.shape, dtype=bool)
        self.predicted = np.zeros(self.shape, dtype=np.uint8)
        self._version = 0
        self._clear_cache = None
        self._opt_cache = None

    def touch(self):
        self._version += 1

    def planning_clearance(self) -> np.ndarray:
        """Distance (m) from each voxel centre to the nearest voxel not known to be free."""
        if self._clear_cache is None or self._clear_cache[0] != self._version:
            cl = ndimage.distance_transform_edt(self.state == FREE) * self.res
            self._clear_cache = (self._version, cl)
        return self._clear_cache[1]

    def optimistic_clearance(self) -> np.ndarray:
        """Distance (m) to the nearest known-occupied voxel; unknown space counts as free."""
        if self._opt_cache is None or self._opt_cache[0] != self._version:
            cl = ndimage.distance_transform_edt(self.state != OCC) * self.res
            self._opt_cache = (self._version, cl)
        return self._opt_cache[1]

    def box_mask(self, boxes) -> np.ndarray:
        """Boolean voxel mask covering axis-aligned metric boxes."""
        m = np.zeros(self.shape, dtype=bool)
        for lo, hi in boxes:
            a = np.clip(np.floor(np.asarray(lo) / self.res + 1e-9).astype(int), 0, self.shape)
            b = np.clip(np.ceil(np.asarray(hi) / self.res - 1e-9).astype(int), 0, self.shape)
            b = np.maximum(b, np.minimum(a + 1, self.shape))
            m[_sl(a, b)] = True
        return m

    # -- geometry helpers -----------------------------------------------------

    def voxel_of(self, p) -> tuple:
        return tuple(int(math.floor(c / self.res)) for c in p)

    def in_bounds(self, p) -> bool:
        return all(0 <= i < n for i, n in zip(self.voxel_of(p), self.shape))

    def center(self, idx) -> np.ndarray:
        return (np.asarray(idx, dtype=float) + 0.5) * self.res

    def min_clearance(self) -> float:
        return self.robot_radius + self.res / 2

    def segment_clear(self, p0, p1, clearance: np.ndarray | None = None) -> bool:
        """Whether the robot sphere fits along p0 -> p1 (truth clearance unless a map is given)."""
        cl = self.truth_clearance if clearance is None else clearance
        p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
        n = max(1, int(math.ceil(np.linalg.norm(p1 - p0) / (self.res / 2))))
        pts = p0 + np.linspace(0.0, 1.0, n + 1)[:, None] * (p1 - p0)
        idx = np.floor(pts / self.res).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            return False
        return bool(np.all(cl[idx[:, 0], idx[:, 1], idx[:, 2]] >= self.min_clearance() - 1e-9))

    def point_clear(self, p, clearance: np.ndarray | None = None) -> bool:
        return self.segment_clear(p, p, clearance)

    def compartment_at(self, p) -> int | None:
        idx = self.voxel_of(p)
        for c, (lo, hi) in enumerate(self.layout.interiors):
            if all(lo[a] <= idx[a] < hi[a] for a in range(3)):
                return c
        return None

    def compartment_region(self, c: int) -> tuple:
        """Voxel box of a compartment including its wall faces."""
        lo, hi = self.layout.interiors[c]
        return tuple(v - 1 for v in lo), tuple(v + 1 for v in hi)

    def compartment_bounds(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.layout.interiors[c]
        return np.array(lo) * self.res, np.array(hi) * self.res

    def default_start(self) -> RobotConfiguration:
        if self.spec.start is not None:
            return RobotConfiguration(np.asarray(self.spec.start[:3], float),
                                      float(self.spec.start[3]) if len(self.spec.start) > 3 else 0.0)
        lo, hi = self.compartment_bounds(0)
        return RobotConfiguration(0.5 * (lo + hi), 0.0)

    def carve(self, position) -> None:
        """Mark unknown voxels inside the robot body as free: the robot occupies that space."""
        r = self.min_clearance() - 1e-6
        c = np.asarray(position, float)
        lo = np.clip(np.floor((c - r) / self.res).astype(int), 0, self.shape)
        hi = np.clip(np.floor((c + r) / self.res).astype(int) + 1, 0, self.shape)
        sl = _sl(lo, hi)
        grid = np.stack(np.meshgrid(*[np.arange(a, b) for a, b in zip(lo, hi)], indexing="ij"), -1)
        inside = np.linalg.norm((grid + 0.5) * self.res - c, axis=-1) < r
        sub = self.state[sl]
        upd = inside & (sub == UNKNOWN)
        if upd.any():
            sub[upd] = FREE
            self.touch()

    def mark_predicted(self, boxes) -> None:
        self.predicted = self.box_mask(boxes).astype(np.uint8)

    def snapshot(self) -> dict:
        occ = np.argwhere(self.state == OCC)
        seen = np.argwhere(self.seen)
        return {"resolution": self.res, "shape": list(self.shape),
                "occupied": occ.tolist(), "seen": seen.tolist()}


def _sl(lo, hi):
    return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))


def generate_tank(spec: TankSpec, robot_radius: float = 0.3):
    tl = layout(spec)
    return VoxelWorld(tl, robot_radius), build_ssg(tl)


# -- sensing ---------------------------------------------------------------------

def sense_depth(world: VoxelWorld, conf: RobotConfiguration, sensor: SensorModel) -> dict:
    """Update occupancy from one depth scan; returns {object id: number of rays that hit it}."""
    dirs = sensor.directions(conf.yaw)
    hits = kernels.cast_rays(world.truth, conf.position, dirs, sensor.max_range, world.res,
                             world.state, True)
    world.touch()
    hit = hits[hits >= 0]
    ids = world.obj.reshape(-1)[hit]
    ids = ids[ids >= 0]
    if len(ids) == 0:
        return {}
    u, c = np.unique(ids, return_counts=True)
    return {int(a): int(b) for a, b in zip(u, c)}


def camera_hits(world: VoxelWorld, conf: RobotConfiguration, sensor: SensorModel,
                blocked: np.ndarray | None = None) -> np.ndarray:
    """Flat indices of voxels the camera would see (no state change)."""
    dirs = sensor.directions(conf.yaw)
    blk = world.truth if blocked is None else blocked
    hits = kernels.cast_rays(blk, conf.position, dirs, sensor.max_range, world.res, world.state, False)
    return np.unique(hits[hits >= 0])


def sense_camera(world: VoxelWorld, conf: RobotConfiguration, sensor: SensorModel) -> np.ndarray:
    """Flag camera-visible occupied voxels as seen; returns newly seen semantic voxel indices."""
    hit = camera_hits(world, conf, sensor)
    flat_seen = world.seen.reshape(-1)
    new = hit[~flat_seen[hit]]
    flat_seen[new] = True
    return new[world.semantic.reshape(-1)[new]]


def coverage(world: VoxelWorld) -> float:
    denom = world.semantic & ~world.residual
    n = int(denom.sum())
    if n == 0:
        return 100.0
    return 100.0 * int((world.seen & denom).sum()) / n


# -- motion --------------------------------------------------------------------------

def path_length(points) -> float:
    pts = np.asarray([p.position if isinstance(p, RobotConfiguration) else p for p in points], float)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def check_path(world: VoxelWorld, path, clearance: np.ndarray | None = None) -> None:
    for i in range(len(path)):
        a = path[i].position
        b = path[i + 1].position if i + 1 < len(path) else a
        if not world.segment_clear(a, b, clearance):
            raise PathCollision(i, a)


def _interpolate(path, cum, t_dist):
    i = int(np.searchsorted(cum, t_dist, side="right") - 1)
    i = min(max(i, 0), len(path) - 2)
    seg = cum[i + 1] - cum[i]
    f = 0.0 if seg <= 0 else (t_dist - cum[i]) / seg
    f = min(max(f, 0.0), 1.0)
    a, b = path[i], path[i + 1]
    yaw = a.yaw + f * wrap_angle(b.yaw - a.yaw)
    return RobotConfiguration(a.position + f * (b.position - a.position), wrap_angle(yaw))


def execute_path(world: VoxelWorld, path, v_max: float, sense_period: float,
                 depth: SensorModel | None = None, camera: SensorModel | None = None,
                 on_sense=None):
    """Fly ``path`` (list of RobotConfiguration) at ``v_max``, sensing every ``sense_period`` s.

    Returns (final configuration, elapsed seconds, sensing events).  The path
    is validated against ground truth before any motion.
    """
    if not path:
        raise ValueError("empty path")
    if v_max <= 0 or sense_period <= 0:
        raise ValueError("v_max and sense_period must be positive")
    check_path(world, path)
    depth = depth or depth_sensor()
    camera = camera or camera_sensor()
    pts = np.array([p.position for p in path])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1) if len(path) > 1 else np.zeros(0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(cum[-1])
    elapsed = length / v_max
    if length <= 0:
        times = [0.0]
    else:
        times = list(np.arange(1, int(math.floor(elapsed / sense_period + 1e-9)) + 1) * sense_period)
        if not times or elapsed - times[-1] > 1e-9:
            times.append(elapsed)
    events = []
    for t in times:
        conf = path[0].copy() if length <= 0 else _interpolate(path, cum, min(t * v_max, length))
        if length > 0 and t == times[-1]:
            conf = RobotConfiguration(path[-1].position.copy(), path[-1].yaw)
        world.carve(conf.position)
        hits = sense_depth(world, conf, depth)
        new = sense_camera(world, conf, camera)
        ev = SensingEvent(float(t), conf, hits, int(len(new)))
        events.append(ev)
        if on_sense is not None:
            on_sense(ev)
    final = RobotConfiguration(path[-1].position.copy(), path[-1].yaw)
    return final, elapsed, events


__all__ = ["VoxelWorld", "SensorModel", "RobotConfiguration", "SensingEvent", "PathCollision",
           "generate_tank", "sense_depth", "sense_camera", "camera_hits", "execute_path", "coverage",
           "depth_sensor", "camera_sensor", "path_length", "check_path", "wrap_angle",
           "UNKNOWN", "FREE", "OCC"]
