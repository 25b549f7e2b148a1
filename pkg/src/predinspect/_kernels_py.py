"""Pure-Python voxel traversal kernels; the reference the compiled module must agree with."""

import math

import numpy as np

UNKNOWN, FREE, OCC = 0, 1, 2


def _setup(o, d, i, res):
    if d > 0:
        return 1, ((i + 1) * res - o) / d, res / d
    if d < 0:
        return -1, (i * res - o) / d, -res / d
    return 0, math.inf, math.inf


def cast_rays(blocked, origin, dirs, max_range, res, state, mark):
    nx, ny, nz = blocked.shape
    ox, oy, oz = (float(v) for v in origin)
    x0, y0, z0 = math.floor(ox / res), math.floor(oy / res), math.floor(oz / res)
    dirs = np.asarray(dirs, dtype=float)
    hits = np.full(len(dirs), -1, dtype=np.int64)
    if not (0 <= x0 < nx and 0 <= y0 < ny and 0 <= z0 < nz):
        return hits
    if mark and state[x0, y0, z0] == UNKNOWN:
        state[x0, y0, z0] = FREE
    for r in range(len(dirs)):
        x, y, z = x0, y0, z0
        sx, tx, dx = _setup(ox, dirs[r, 0], x, res)
        sy, ty, dy = _setup(oy, dirs[r, 1], y, res)
        sz, tz, dz = _setup(oz, dirs[r, 2], z, res)
        while True:
            if tx <= ty and tx <= tz:
                t = tx
                x += sx
                tx += dx
            elif ty <= tz:
                t = ty
                y += sy
                ty += dy
            else:
                t = tz
                z += sz
                tz += dz
            if t > max_range:
                break
            if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
                break
            if blocked[x, y, z]:
                hits[r] = (x * ny + y) * nz + z
                if mark:
                    state[x, y, z] = OCC
                break
            if mark and state[x, y, z] == UNKNOWN:
                state[x, y, z] = FREE
    return hits


def _visible(state, ox, oy, oz, x0, y0, z0, tgt, res):
    nx, ny, nz = state.shape
    cx = (tgt[0] + 0.5) * res - ox
    cy = (tgt[1] + 0.5) * res - oy
    cz = (tgt[2] + 0.5) * res - oz
    dist = math.sqrt(cx * cx + cy * cy + cz * cz)
    if dist == 0:
        return True
    x, y, z = x0, y0, z0
    sx, tx, dx = _setup(ox, cx / dist, x, res)
    sy, ty, dy = _setup(oy, cy / dist, y, res)
    sz, tz, dz = _setup(oz, cz / dist, z, res)
    while True:
        if (x, y, z) == tgt:
            return True
        if tx <= ty and tx <= tz:
            t = tx
            x += sx
            tx += dx
        elif ty <= tz:
            t = ty
            y += sy
            ty += dy
        else:
            t = tz
            z += sz
            tz += dz
        if t > dist + res:
            return False
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            return False
        if (x, y, z) == tgt:
            return True
        if state[x, y, z] == OCC:
            return False


def count_visible(state, mask, origin, region_lo, region_hi, max_range, tan_half_v, res):
    nx, ny, nz = state.shape
    ox, oy, oz = (float(v) for v in origin)
    x0, y0, z0 = math.floor(ox / res), math.floor(oy / res), math.floor(oz / res)
    if not (0 <= x0 < nx and 0 <= y0 < ny and 0 <= z0 < nz):
        return 0, 0
    lo = [max(0, int(v)) for v in region_lo]
    hi = [min(n, int(v)) for n, v in zip(state.shape, region_hi)]
    sub = state[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    total = masked = 0
    r2 = max_range * max_range
    # candidate filtering is vectorised; the line-of-sight walk is not
    for idx in np.argwhere(sub == UNKNOWN):
        x, y, z = (int(a + b) for a, b in zip(idx, lo))
        cx = (x + 0.5) * res - ox
        cy = (y + 0.5) * res - oy
        cz = (z + 0.5) * res - oz
        if cx * cx + cy * cy + cz * cz > r2:
            continue
        if cz * cz > tan_half_v * tan_half_v * (cx * cx + cy * cy):
            continue
        if _visible(state, ox, oy, oz, x0, y0, z0, (x, y, z), res):
            total += 1
            if mask[x, y, z]:
                masked += 1
    return total, masked
