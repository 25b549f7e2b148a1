"""Compiled vs pure-Python kernels, plus where a mission spends its time.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--profile]
"""

import argparse
import cProfile
import pstats
import time

import numpy as np

from predinspect import _kernels_py
from predinspect.tank import TankSpec
from predinspect.world import depth_sensor, generate_tank

try:
    from predinspect import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def setup():
    world, _ = generate_tank(TankSpec(n_compartments=2))
    s = depth_sensor()
    blocked = np.ascontiguousarray(world.truth > 0).view(np.uint8)
    dirs = np.ascontiguousarray(s.directions())
    origin = np.array([2.7, 2.7, 2.2])
    return world, s, blocked, dirs, origin


def bench(impl, world, s, blocked, dirs, origin, repeat):
    out = {}
    t = []
    for _ in range(repeat):
        state = np.zeros(world.shape, np.int8)
        t0 = time.perf_counter()
        impl.cast_rays(blocked, origin, dirs, s.max_range, world.res, state, True)
        t.append(time.perf_counter() - t0)
    out["cast_rays"] = min(t)
    # visibility query on a partly mapped map, as in the gain evaluation
    state = np.zeros(world.shape, np.int8)
    impl.cast_rays(blocked, origin, dirs, s.max_range, world.res, state, True)
    mask = np.zeros(world.shape, np.uint8)
    lo, hi = world.compartment_region(0)
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        impl.count_visible(state, mask, origin + [1.0, 0.5, 0.0], lo, hi, s.max_range, s.tan_half_v, world.res)
        t.append(time.perf_counter() - t0)
    out["count_visible"] = min(t)
    return out


def profile_mission():
    from predinspect.planner import PlannerConfig, run_mission

    world, _ = generate_tank(TankSpec(n_compartments=1))
    pr = cProfile.Profile()
    pr.enable()
    run_mission(world, PlannerConfig())
    pr.disable()
    st = pstats.Stats(pr)
    total = st.total_tt
    shares = {}
    # compiled kernels are not profiled themselves; their time lands in these callers
    names = ("camera_hits", "sense_depth", "volume_gain")
    for (_, _, func), (_, _, _, ct, _) in st.stats.items():
        if func in names:
            shares[func] = shares.get(func, 0.0) + ct
    print(f"\nmission total {total:.2f} s (profiled)")
    for k, v in sorted(shares.items(), key=lambda kv: -kv[1]):
        print(f"  {k:<14} {v:7.2f} s  {100 * v / total:5.1f}%")
    ray = sum(shares.values())
    print(f"  {'ray casting':<14} {ray:7.2f} s  {100 * ray / total:5.1f}%")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--profile", action="store_true", help="also profile a one-compartment mission")
    args = ap.parse_args()
    data = setup()
    print(f"{len(data[3])} rays, range {data[1].max_range} m, grid {data[0].shape}")
    py = bench(_kernels_py, *data, max(1, args.repeat // 3))
    rows = [("python", py)]
    if _kernels_c is not None:
        rows.append(("cython", bench(_kernels_c, *data, args.repeat)))
    print(f"{'backend':<8} {'cast_rays ms':>14} {'count_visible ms':>18}")
    for name, r in rows:
        print(f"{name:<8} {1e3 * r['cast_rays']:14.2f} {1e3 * r['count_visible']:18.2f}")
    if len(rows) == 2:
        c = rows[1][1]
        print(f"speed-up  {py['cast_rays'] / c['cast_rays']:13.1f}x {py['count_visible'] / c['count_visible']:17.1f}x")
    else:
        print("compiled kernels not built")
    if args.profile:
        profile_mission()


if __name__ == "__main__":
    main()
