# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Voxel traversal kernels (compiled).  Semantics must match _kernels_py exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, INFINITY

cnp.import_array()

DEF UNKNOWN = 0
DEF FREE = 1
DEF OCC = 2


cdef inline void _setup(double o, double d, int i, double res,
                        int* step, double* tmax, double* tdelta) nogil:
    if d > 0:
        step[0] = 1
        tmax[0] = ((i + 1) * res - o) / d
        tdelta[0] = res / d
    elif d < 0:
        step[0] = -1
        tmax[0] = (i * res - o) / d
        tdelta[0] = -res / d
    else:
        step[0] = 0
        tmax[0] = INFINITY
        tdelta[0] = INFINITY


def cast_rays(const cnp.uint8_t[:, :, ::1] blocked, origin, const double[:, ::1] dirs,
              double max_range, double res, cnp.int8_t[:, :, ::1] state, bint mark):
    """Trace unit directions from ``origin``; return the flat index of the first blocked voxel per ray (-1 if none).

    With ``mark`` set, unknown voxels passed through become free and hit voxels become occupied.
    """
    cdef int nx = blocked.shape[0], ny = blocked.shape[1], nz = blocked.shape[2]
    cdef Py_ssize_t n = dirs.shape[0], r
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef int x0 = <int>floor(ox / res), y0 = <int>floor(oy / res), z0 = <int>floor(oz / res)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hits_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] hits = hits_arr
    cdef int x, y, z, sx, sy, sz
    cdef double tx, ty, tz, dx, dy, dz, t
    if x0 < 0 or y0 < 0 or z0 < 0 or x0 >= nx or y0 >= ny or z0 >= nz:
        return hits_arr
    with nogil:
        if mark and state[x0, y0, z0] == UNKNOWN:
            state[x0, y0, z0] = FREE
        for r in range(n):
            x, y, z = x0, y0, z0
            _setup(ox, dirs[r, 0], x, res, &sx, &tx, &dx)
            _setup(oy, dirs[r, 1], y, res, &sy, &ty, &dy)
            _setup(oz, dirs[r, 2], z, res, &sz, &tz, &dz)
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
                if x < 0 or y < 0 or z < 0 or x >= nx or y >= ny or z >= nz:
                    break
                if blocked[x, y, z]:
                    hits[r] = (<cnp.int64_t>x * ny + y) * nz + z
                    if mark:
                        state[x, y, z] = OCC
                    break
                if mark and state[x, y, z] == UNKNOWN:
                    state[x, y, z] = FREE
    return hits_arr


cdef inline bint _visible(const cnp.int8_t[:, :, ::1] state, int nx, int ny, int nz,
                          double ox, double oy, double oz, int x0, int y0, int z0,
                          int tx_, int ty_, int tz_, double res) nogil:
    cdef double cx = (tx_ + 0.5) * res - ox
    cdef double cy = (ty_ + 0.5) * res - oy
    cdef double cz = (tz_ + 0.5) * res - oz
    cdef double dist = sqrt(cx * cx + cy * cy + cz * cz)
    cdef int x = x0, y = y0, z = z0, sx, sy, sz
    cdef double tx, ty, tz, dx, dy, dz, t
    if dist == 0:
        return True
    _setup(ox, cx / dist, x, res, &sx, &tx, &dx)
    _setup(oy, cy / dist, y, res, &sy, &ty, &dy)
    _setup(oz, cz / dist, z, res, &sz, &tz, &dz)
    while True:
        if x == tx_ and y == ty_ and z == tz_:
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
        if x < 0 or y < 0 or z < 0 or x >= nx or y >= ny or z >= nz:
            return False
        if x == tx_ and y == ty_ and z == tz_:
            return True
        if state[x, y, z] == OCC:
            return False


def count_visible(const cnp.int8_t[:, :, ::1] state, const cnp.uint8_t[:, :, ::1] mask, origin,
                  region_lo, region_hi, double max_range, double tan_half_v, double res):
    """Count unknown voxels in the region seen from ``origin`` (360 deg horizontally).

    A voxel counts when its centre lies within range and within the vertical
    half-angle, and the straight line to it crosses no occupied voxel.
    Returns (all unknown visible, unknown visible with mask set).
    """
    cdef int nx = state.shape[0], ny = state.shape[1], nz = state.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef int x0 = <int>floor(ox / res), y0 = <int>floor(oy / res), z0 = <int>floor(oz / res)
    cdef int lx = max(0, <int>region_lo[0]), ly = max(0, <int>region_lo[1]), lz = max(0, <int>region_lo[2])
    cdef int hx = min(nx, <int>region_hi[0]), hy = min(ny, <int>region_hi[1]), hz = min(nz, <int>region_hi[2])
    cdef int x, y, z
    cdef double cx, cy, cz, r2 = max_range * max_range
    cdef long total = 0, masked = 0
    if x0 < 0 or y0 < 0 or z0 < 0 or x0 >= nx or y0 >= ny or z0 >= nz:
        return 0, 0
    with nogil:
        for x in range(lx, hx):
            cx = (x + 0.5) * res - ox
            for y in range(ly, hy):
                cy = (y + 0.5) * res - oy
                for z in range(lz, hz):
                    if state[x, y, z] != UNKNOWN:
                        continue
                    cz = (z + 0.5) * res - oz
                    if cx * cx + cy * cy + cz * cz > r2:
                        continue
                    if cz * cz > tan_half_v * tan_half_v * (cx * cx + cy * cy):
                        continue
                    if _visible(state, nx, ny, nz, ox, oy, oz, x0, y0, z0, x, y, z, res):
                        total += 1
                        if mask[x, y, z]:
                            masked += 1
    return total, masked
