"""Ballast-tank scenario description and ground-truth scene graph.

Compartments are laid out along +x and share bulkheads.  Every compartment
owns four wall faces (two hull sides carrying the longitudinals, two
bulkhead faces), the longitudinals, and the manhole cut into its +x bulkhead.
Geometry is expressed on a voxel lattice of pitch ``voxel`` so the voxel
world and the scene graph agree exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import SceneGraph

COMPARTMENT = "compartment"
WALL = "wall"
LONGITUDINAL = "longitudinal"
MANHOLE = "manhole"

EDGE_ATTACHED = "attached_to"
EDGE_BOUNDED = "bounded_by"
EDGE_CONNECTS = "connects"


class InvalidSpec(ValueError):
    pass


@dataclass
class TankSpec:
    n_compartments: int = 4
    # interior size in voxels (x, y, z)
    interior: tuple = (25, 25, 20)
    voxel: float = 0.2
    bulkhead: int = 2
    shell: int = 1
    longitudinals_per_wall: int = 6
    long_height: int = 2
    long_depth: int = 1
    long_margin: int = 1
    # manhole opening in voxels (y width, z height) and its bottom z offset
    manhole_size: tuple = (5, 6)
    manhole_z: int = 7
    exit_manhole: bool = False
    # (compartment, side, index) triples; side 0 is the -y wall, 1 the +y wall
    missing: list = field(default_factory=list)
    start: tuple | None = None
    seed: int = 0

    def validate(self):
        if self.n_compartments < 1:
            raise InvalidSpec("need at least one compartment")
        ix, iy, iz = self.interior
        if min(ix, iy, iz) < 8:
            raise InvalidSpec("interior too small")
        if self.voxel <= 0:
            raise InvalidSpec("voxel size must be positive")
        if self.bulkhead < 2:
            raise InvalidSpec("bulkheads need two voxel layers so faces stay distinct")
        n = self.longitudinals_per_wall
        if n < 0 or n * (self.long_height + 1) > iz:
            raise InvalidSpec("longitudinals do not fit on the wall")
        my, mz = self.manhole_size
        if my > iy - 2 or self.manhole_z + mz > iz - 1 or self.manhole_z < 1:
            raise InvalidSpec("manhole does not fit in the bulkhead")
        for c, side, j in self.missing:
            if not (0 <= c < self.n_compartments and side in (0, 1) and 0 <= j < n):
                raise InvalidSpec(f"bad missing entry {(c, side, j)}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["missing"] = [list(m) for m in self.missing]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TankSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown scenario keys: {sorted(unknown)}")
        d = dict(d)
        for k in ("interior", "manhole_size", "start"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        d["missing"] = [tuple(m) for m in d.get("missing", [])]
        return cls(**d).validate()

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "TankSpec":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidSpec(f"{path}: {exc}") from exc
        return cls.from_dict(d)


def standard_spec(n_compartments: int = 8, **kw) -> TankSpec:
    kw.setdefault("exit_manhole", True)
    return TankSpec(n_compartments=n_compartments, **kw).validate()


def missing_longitudinals(spec: TankSpec, k: int, seed: int = 0) -> list:
    """Pick ``k`` distinct compartments and drop one longitudinal in each."""
    if k > spec.n_compartments:
        raise InvalidSpec("k exceeds the number of compartments")
    rng = np.random.default_rng(seed)
    comps = sorted(rng.choice(spec.n_compartments, size=k, replace=False).tolist())
    out = []
    for c in comps:
        side = int(rng.integers(2))
        j = int(rng.integers(spec.longitudinals_per_wall))
        out.append((c, side, j))
    return out


@dataclass
class GTObject:
    """A ground-truth semantic object as an inclusive-exclusive voxel box."""

    oid: int
    label: str
    lo: tuple
    hi: tuple
    compartment: int
    # wall faces: outward normal (unit axis vector) pointing into the structure
    normal: tuple | None = None
    parent: int | None = None
    links: tuple = ()

    def bounds(self, voxel: float) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lo) * voxel, np.array(self.hi) * voxel

    def center(self, voxel: float) -> np.ndarray:
        lo, hi = self.bounds(voxel)
        return 0.5 * (lo + hi)

    def half_extents(self, voxel: float) -> np.ndarray:
        lo, hi = self.bounds(voxel)
        return 0.5 * (hi - lo)

    def graph_box(self, voxel: float) -> tuple[np.ndarray, np.ndarray]:
        """Box used in the scene graph; wall faces collapse onto the interior-facing plane."""
        lo, hi = self.bounds(voxel)
        if self.label == WALL and self.normal is not None:
            ax = int(np.flatnonzero(self.normal)[0])
            face = hi[ax] if self.normal[ax] < 0 else lo[ax]
            lo, hi = lo.copy(), hi.copy()
            lo[ax] = hi[ax] = face
        return lo, hi


@dataclass
class TankLayout:
    spec: TankSpec
    shape: tuple
    objects: list
    # per compartment: interior voxel box (lo, hi)
    interiors: list
    # solid structure voxel boxes (lo, hi) before openings are cut
    solids: list
    openings: list

    def by_label(self, label: str) -> list:
        return [o for o in self.objects if o.label == label]

    def object(self, oid: int) -> GTObject:
        return self.objects[oid]


def layout(spec: TankSpec) -> TankLayout:
    spec.validate()
    ix, iy, iz = spec.interior
    sh, bh = spec.shell, spec.bulkhead
    n = spec.n_compartments
    extra = sh if spec.exit_manhole else 0
    nx = 2 * sh + n * ix + (n - 1) * bh + extra
    shape = (nx, iy + 2 * sh, iz + 2 * sh)
    y0, z0 = sh, sh
    objects: list = []
    interiors = []
    openings = []

    def add(label, lo, hi, comp, normal=None, parent=None, links=()):
        o = GTObject(len(objects), label, tuple(int(v) for v in lo), tuple(int(v) for v in hi),
                     comp, normal, parent, links)
        objects.append(o)
        return o

    x_starts = [sh + c * (ix + bh) for c in range(n)]
    comp_ids = []
    for c, x0 in enumerate(x_starts):
        interiors.append(((x0, y0, z0), (x0 + ix, y0 + iy, z0 + iz)))
        comp_ids.append(add(COMPARTMENT, (x0, y0, z0), (x0 + ix, y0 + iy, z0 + iz), c).oid)

    # manholes: between c and c+1, plus an optional exit through the last +x wall
    my, mz = spec.manhole_size
    yc0 = y0 + (iy - my) // 2
    manholes = []
    for c in range(n):
        x_end = x_starts[c] + ix
        if c < n - 1:
            lo, hi = (x_end, yc0, z0 + spec.manhole_z), (x_end + bh, yc0 + my, z0 + spec.manhole_z + mz)
            links = (c, c + 1)
        elif spec.exit_manhole:
            lo, hi = (x_end, yc0, z0 + spec.manhole_z), (x_end + sh, yc0 + my, z0 + spec.manhole_z + mz)
            links = (c,)
        else:
            continue
        manholes.append((lo, hi, links))

    for c, x0 in enumerate(x_starts):
        x1 = x0 + ix
        walls = []
        # side walls (hull) carry the longitudinals
        walls.append(add(WALL, (x0, y0 - 1, z0), (x1, y0, z0 + iz), c, normal=(0, -1, 0), parent=comp_ids[c]))
        walls.append(add(WALL, (x0, y0 + iy, z0), (x1, y0 + iy + 1, z0 + iz), c, normal=(0, 1, 0),
                         parent=comp_ids[c]))
        # bulkhead faces
        walls.append(add(WALL, (x0 - 1, y0, z0), (x0, y0 + iy, z0 + iz), c, normal=(-1, 0, 0), parent=comp_ids[c]))
        walls.append(add(WALL, (x1, y0, z0), (x1 + 1, y0 + iy, z0 + iz), c, normal=(1, 0, 0), parent=comp_ids[c]))
        nl = spec.longitudinals_per_wall
        for side in (0, 1):
            wall = walls[side]
            for j in range(nl):
                if (c, side, j) in spec.missing:
                    continue
                zl = z0 + int(round((j + 0.5) * iz / nl - spec.long_height / 2))
                xa, xb = x0 + spec.long_margin, x1 - spec.long_margin
                if side == 0:
                    ya, yb = y0, y0 + spec.long_depth
                else:
                    ya, yb = y0 + iy - spec.long_depth, y0 + iy
                add(LONGITUDINAL, (xa, ya, zl), (xb, yb, zl + spec.long_height), c, parent=wall.oid)
        for lo, hi, links in manholes:
            if links[0] == c:
                add(MANHOLE, lo, hi, c, links=tuple(comp_ids[k] for k in links))
                openings.append((lo, hi))

    solids = [((0, 0, 0), shape)]
    return TankLayout(spec, shape, objects, interiors, solids, openings)


def build_ssg(tl: TankLayout, include=None) -> SceneGraph:
    """Ground-truth scene graph; ``include`` optionally restricts to a set of object ids."""
    v = tl.spec.voxel
    g = SceneGraph()
    keep = set(range(len(tl.objects))) if include is None else set(include)
    for o in tl.objects:
        if o.oid in keep:
            lo, hi = o.graph_box(v)
            g.add_vertex(o.oid, o.label, 0.5 * (lo + hi), np.eye(3), 0.5 * (hi - lo))
    for o in tl.objects:
        if o.oid not in keep:
            continue
        if o.label == LONGITUDINAL and o.parent in keep:
            g.add_edge(o.oid, o.parent, EDGE_ATTACHED)
        elif o.label == WALL and o.parent in keep:
            g.add_edge(o.parent, o.oid, EDGE_BOUNDED)
        elif o.label == MANHOLE:
            for cid in o.links:
                if cid in keep:
                    g.add_edge(o.oid, cid, EDGE_CONNECTS)
    return g


def generate_ssg(spec: TankSpec) -> SceneGraph:
    return build_ssg(layout(spec))
