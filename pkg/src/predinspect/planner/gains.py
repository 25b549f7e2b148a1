"""Vertex gains and the path value used to rank exploration paths."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..world import SensorModel, VoxelWorld


def volume_gain(world: VoxelWorld, position, sensor: SensorModel, region=None,
                mask: np.ndarray | None = None) -> tuple[int, int]:
    """Unknown voxels visible from ``position`` and how many of them fall in ``mask``.

    Occlusion is by known-occupied voxels only.  The sensor is treated as
    omnidirectional in azimuth, which holds for the spinning depth sensor.
    """
    if sensor.hfov < 2 * math.pi - 1e-9:
        raise ValueError("volume_gain assumes a 360 degree sensor")
    if region is None:
        region = ((0, 0, 0), world.shape)
    lo, hi = region
    m = world.predicted if mask is None else mask
    total, masked = kernels.count_visible(world.state, np.ascontiguousarray(m, dtype=np.uint8),
                                          np.asarray(position, dtype=float), tuple(lo), tuple(hi),
                                          sensor.max_range, sensor.tan_half_v, world.res)
    return int(total), int(masked)


def ae_gain(ve, s, alpha: float, delta: float):
    """Vertex gain blending semantic and volumetric terms by the overlap ratio."""
    return (alpha + delta) * np.asarray(s, float) + (1.0 - alpha) * np.asarray(ve, float)


def resample(points, n: int = 16) -> np.ndarray:
    """``n`` points equally spaced in arc length along a polyline."""
    pts = np.asarray(points, float)
    if len(pts) == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0:
        return np.repeat(pts[:1], n, axis=0)
    s = np.linspace(0.0, cum[-1], n)
    return np.stack([np.interp(s, cum, pts[:, a]) for a in range(3)], axis=1)


def direction_penalty(points, ref_dir, n: int = 16) -> float:
    """Mean distance between arc-length matched points of a path and a straight ray.

    The ray starts at the path's first point and runs along ``ref_dir`` for
    the same length, so a straight path aligned with it scores zero.
    """
    pts = np.asarray(points, float)
    d = np.asarray(ref_dir, float)
    nd = np.linalg.norm(d)
    if len(pts) < 2 or nd == 0:
        return 0.0
    d = d / nd
    q = resample(pts, n)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    s = np.linspace(0.0, seg, n)
    ref = pts[0] + s[:, None] * d
    return float(np.linalg.norm(q - ref, axis=1).mean())


def path_value(gains, dists, z: float, mu: float, zeta: float) -> float:
    """exp(-zeta Z) * sum_i gain_i exp(-mu D_i) over the vertices of one path."""
    g = np.asarray(gains, float)
    d = np.asarray(dists, float)
    return float(math.exp(-zeta * z) * np.sum(g * np.exp(-mu * d)))


def best_path(values) -> int:
    """Index of the largest value; ties go to the lowest index."""
    return int(np.argmax(np.asarray(values, float)))


__all__ = ["volume_gain", "ae_gain", "direction_penalty", "path_value", "best_path", "resample"]
