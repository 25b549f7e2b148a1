import functools
import os
import sys
import time

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}
MISSION_SECONDS = {}


@functools.lru_cache(maxsize=None)
def cached_mission(mode: str, seed: int, n_compartments: int):
    """Run one mission per (mode, seed, size) for the whole session."""
    from predinspect.planner import PlannerConfig, run_mission
    from predinspect.tank import TankSpec
    from predinspect.world import generate_tank

    t0 = time.perf_counter()
    world, _ = generate_tank(TankSpec(n_compartments=n_compartments))
    metrics, state = run_mission(world, PlannerConfig(mode=mode, seed=seed))
    MISSION_SECONDS[(mode, seed, n_compartments)] = time.perf_counter() - t0
    return metrics, state


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
