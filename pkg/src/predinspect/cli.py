"""Command-line entry points: mine, predict, run, compare, ablate, gen-scenario.

Exit codes: 0 ok, 1 error (bad input, failed check), 2 mission stuck.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .graph import GraphError, load_graph, save_graph
from .metrics import validate_metrics
from .mining import LEGACY, MODIFIED, build_hierarchy, discover, hierarchy_to_dict, NoPattern
from .planner.config import MODES, ConfigError, PlannerConfig
from .planner.mission import run_mission
from .planner.steps import MissionStuck
from .predict import predict
from .tank import InvalidSpec, TankSpec, build_ssg, layout, missing_longitudinals, standard_spec
from .world import PathCollision, generate_tank

log = logging.getLogger("predinspect")

EXIT_OK, EXIT_ERROR, EXIT_STUCK = 0, 1, 2


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> PlannerConfig:
    cfg = PlannerConfig.load(args.config) if getattr(args, "config", None) else PlannerConfig()
    return cfg


def _load_scenario(path) -> TankSpec:
    if path is None:
        return TankSpec()
    return TankSpec.load(path)


def _ssg_from_args(args):
    if args.ssg:
        return load_graph(args.ssg)
    return build_ssg(layout(_load_scenario(args.scenario)))


# -- mine / predict ----------------------------------------------------------------

def cmd_mine(args) -> int:
    g = _ssg_from_args(args)
    cfg = _load_config(args)
    params = cfg.mining.params(cfg.match)
    h = build_hierarchy(g, params, args.max_levels, args.regroup)
    d = hierarchy_to_dict(h)
    _write_json(Path(args.out), d)
    for lvl in d["levels"]:
        print(f"level {lvl['level']}: {lvl['pattern_labels']} x{lvl['instances']} "
              f"(compression {lvl['compression']:.4f})")
    return EXIT_OK


def cmd_predict(args) -> int:
    g = _ssg_from_args(args)
    cfg = _load_config(args)
    h = build_hierarchy(g, cfg.mining.params(cfg.match), args.max_levels, args.regroup)
    cands = predict(h, phi=args.phi, kappa=cfg.gains.kappa)
    _write_json(Path(args.out), {"hierarchy": hierarchy_to_dict(h),
                                 "candidates": [c.as_dict() for c in cands]})
    print(f"{len(cands)} candidate(s)")
    return EXIT_OK


# -- missions ------------------------------------------------------------------------

def _mission(spec: TankSpec, cfg: PlannerConfig):
    world, _ = generate_tank(spec, cfg.robot_radius)
    try:
        metrics, st = run_mission(world, cfg)
        return metrics, st, None
    except (MissionStuck, PathCollision) as exc:
        return exc.metrics, exc.state, exc


def _write_run(out: Path, metrics, st, cfg: PlannerConfig, spec: TankSpec) -> None:
    out.mkdir(parents=True, exist_ok=True)
    d = validate_metrics(metrics.as_dict())
    (out / "metrics.json").write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    (out / "metrics.csv").write_text(metrics.to_csv())
    save_graph(st.ssg, out / "ssg.json")
    _write_json(out / "hierarchy.json", st.hierarchies)
    _write_json(out / "predictions.json", st.prediction_log)
    _write_json(out / "trace.json", st.trace)
    _write_json(out / "timing.json", {"tick_ms": [round(t, 3) for t in st.tick_ms],
                                      "mean_tick_ms": float(np.mean(st.tick_ms)) if st.tick_ms else 0.0})
    _write_json(out / "config.json", cfg.to_dict())
    _write_json(out / "scenario.json", spec.to_dict())


def cmd_run(args) -> int:
    spec = _load_scenario(args.scenario)
    cfg = _load_config(args)
    if args.mode:
        cfg = cfg.with_mode(args.mode)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out)
    previous = (out / "metrics.json").read_text() if args.check and (out / "metrics.json").exists() else None
    metrics, st, err = _mission(spec, cfg)
    text = json.dumps(validate_metrics(metrics.as_dict()), indent=2, sort_keys=True) + "\n"
    if args.check:
        if previous is None:
            again, _, _ = _mission(spec, cfg)
            previous = json.dumps(again.as_dict(), indent=2, sort_keys=True) + "\n"
        if previous != text:
            print("determinism check FAILED: metrics differ", file=sys.stderr)
            return EXIT_ERROR
        print("determinism check passed")
    _write_run(out, metrics, st, cfg, spec)
    for c in metrics.compartments:
        print(f"compartment {c.index}: {'+'.join(c.modes)} {c.time:.2f} s, coverage {c.coverage:.1f}%")
    print(f"coverage {metrics.coverage:.2f}%  path {metrics.path_length:.1f} m  status {metrics.status}")
    if err is not None:
        print(f"mission stuck: {err}", file=sys.stderr)
        return EXIT_STUCK
    return EXIT_OK


def _row(mode, runs, predictive_from):
    times = [m.time_per_compartment([c.index for c in m.compartments if c.index >= predictive_from])
             for m, _ in runs]
    all_times = [m.time_per_compartment() for m, _ in runs]
    return {"method": mode,
            "time_per_compartment": float(np.mean(all_times)),
            "time_per_predictive_compartment": float(np.mean(times)),
            "coverage": float(np.mean([m.coverage for m, _ in runs])),
            "path_length": float(np.mean([m.path_length for m, _ in runs])),
            "compute_ms": float(np.mean([np.mean(st.tick_ms) for _, st in runs])),
            "stuck": sum(1 for m, _ in runs if m.status == "stuck")}


def compare(spec: TankSpec, cfg: PlannerConfig, seeds, predictive_from: int = 2) -> list:
    """Rows of mean metrics per mode, with time improvements relative to baseline."""
    rows = []
    for mode in MODES:
        runs = []
        for s in seeds:
            m, st, _ = _mission(spec, cfg.with_mode(mode).with_seed(s))
            runs.append((m, st))
        rows.append(_row(mode, runs, predictive_from))
    base = rows[0]["time_per_predictive_compartment"]
    for r in rows:
        r["improvement_pct"] = 0.0 if base == 0 else 100.0 * (1 - r["time_per_predictive_compartment"] / base)
    return rows


COMPARE_COLUMNS = ["method", "time_per_compartment", "time_per_predictive_compartment", "coverage",
                   "path_length", "compute_ms", "improvement_pct", "stuck"]


def _write_table(path: Path, rows, columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})


def _print_table(rows, columns) -> None:
    print("  ".join(f"{c:>14}" for c in columns))
    for r in rows:
        print("  ".join(f"{r[c]:>14.3f}" if isinstance(r[c], float) else f"{str(r[c]):>14}" for c in columns))


def cmd_compare(args) -> int:
    spec = _load_scenario(args.scenario)
    cfg = _load_config(args)
    seeds = list(range(args.seeds))
    if len(seeds) < 3:
        print("compare needs at least 3 seeds", file=sys.stderr)
        return EXIT_ERROR
    rows = compare(spec, cfg, seeds)
    out = Path(args.out)
    _write_table(out / "compare.csv", rows, COMPARE_COLUMNS)
    _write_json(out / "compare.json", rows)
    _print_table(rows, COMPARE_COLUMNS)
    return EXIT_OK


def mining_comparison(spec: TankSpec, k: int, seed: int = 0, cfg: PlannerConfig | None = None) -> dict:
    """Compartment-level pattern recovered by both regrouping modes on the ground-truth graph."""
    cfg = cfg or PlannerConfig()
    s = TankSpec.from_dict({**spec.to_dict(), "missing": missing_longitudinals(spec, k, seed)})
    g = build_ssg(layout(s))
    out = {"k": k, "missing": [list(m) for m in s.missing]}
    for regroup in (MODIFIED, LEGACY):
        h = build_hierarchy(g, cfg.mining.params(cfg.match), 2, regroup)
        lv = hierarchy_to_dict(h)["levels"]
        top = lv[-1] if len(lv) == 2 else None
        out[regroup] = {"levels": len(lv),
                        "pattern": None if top is None else top["pattern_labels"],
                        "instances": 0 if top is None else top["instances"],
                        "full": bool(top and "compartment" in top["pattern_labels"]
                                     and top["instances"] == s.n_compartments)}
    return out


def cmd_ablate(args) -> int:
    spec = _load_scenario(args.scenario)
    mine_spec = standard_spec(args.mine_compartments)
    cfg = _load_config(args)
    ks = [int(k) for k in args.k.split(",")] if args.k else list(range(0, 6))
    seeds = list(range(args.seeds))
    rows, mining = [], []
    for k in ks:
        if k > spec.n_compartments and k > mine_spec.n_compartments:
            print(f"k={k} exceeds the number of compartments", file=sys.stderr)
            return EXIT_ERROR
        if not args.skip_missions and k <= spec.n_compartments:
            s = TankSpec.from_dict({**spec.to_dict(), "missing": missing_longitudinals(spec, k, args.seed)})
            for r in compare(s, cfg, seeds):
                rows.append({"k": k, **r})
        if k <= mine_spec.n_compartments:
            mining.append(mining_comparison(mine_spec, k, args.seed, cfg))
    out = Path(args.out)
    if rows:
        _write_table(out / "ablation.csv", rows, ["k"] + COMPARE_COLUMNS)
        _print_table(rows, ["k"] + COMPARE_COLUMNS)
    _write_json(out / "ablation.json", {"missions": rows, "mining": mining})
    for m in mining:
        print(f"k={m['k']}: modified {m[MODIFIED]['instances']} instances full={m[MODIFIED]['full']}; "
              f"legacy {m[LEGACY]['instances']} instances full={m[LEGACY]['full']}")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    if args.standard:
        spec = standard_spec(args.compartments, seed=args.seed)
    else:
        spec = TankSpec(n_compartments=args.compartments, seed=args.seed).validate()
    if args.missing:
        spec = TankSpec.from_dict({**spec.to_dict(), "missing": missing_longitudinals(spec, args.missing, args.seed)})
    spec.save(args.out)
    if args.ssg:
        save_graph(build_ssg(layout(spec)), args.ssg)
    print(f"wrote {args.out}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="predinspect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", help="tank scenario JSON (default: 4 compartments)")
        sp.add_argument("--config", help="planner config JSON")
        sp.add_argument("--out", required=True)

    for name, fn in (("mine", cmd_mine), ("predict", cmd_predict)):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--ssg", help="scene graph JSON (default: ground truth of --scenario)")
        sp.add_argument("--regroup", choices=[MODIFIED, LEGACY], default=None)
        sp.add_argument("--max-levels", type=int, default=2)
        if name == "predict":
            sp.add_argument("--phi", type=float, default=1.0)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("run")
    common(sp)
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--check", action="store_true", help="verify the metrics replay byte-identically")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare")
    common(sp)
    sp.add_argument("--seeds", type=int, default=5)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("ablate")
    common(sp)
    sp.add_argument("--k", help="comma separated k values (default 0..5)")
    sp.add_argument("--seeds", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0, help="seed for picking missing longitudinals")
    sp.add_argument("--mine-compartments", type=int, default=8)
    sp.add_argument("--skip-missions", action="store_true", help="only run the mining comparison")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("gen-scenario")
    sp.add_argument("--out", required=True)
    sp.add_argument("--compartments", type=int, default=4)
    sp.add_argument("--missing", type=int, default=0, help="compartments missing one longitudinal")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--standard", action="store_true", help="standard tank with an exit manhole")
    sp.add_argument("--ssg", help="also write the ground-truth scene graph here")
    sp.set_defaults(func=cmd_gen_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidSpec, ConfigError, GraphError, NoPattern, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
