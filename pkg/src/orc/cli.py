"""Command line entry point: ``orc run | bench | oracle | validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import bench_scaling
from .config import LEARNERS, PRESETS, ConfigError, ScenarioConfig, load_config, preset
from .runner import RunFailed, compute_oracle, run_scenario


def _resolve(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.preset:
            raise ConfigError("give either a config file or --preset, not both (use 'preset:' inside the file)")
        if args.learner:
            cfg = cfg.replace(learner=args.learner)
    elif args.preset:
        cfg = preset(args.preset, args.learner)
    else:
        raise ConfigError("need a config file or --preset")
    overrides = {}
    for name in ("features", "noise", "init", "oracle"):
        v = getattr(args, f"seed_{name}", None)
        if v is not None:
            overrides[f"seeds.{name}"] = v
    if getattr(args, "T", None) is not None:
        overrides["T"] = args.T
    if getattr(args, "h", None) is not None:
        overrides["domain.h"] = args.h
    if getattr(args, "record_timing", False):
        overrides["output.record_timing"] = True
    return cfg.replace(**overrides) if overrides else cfg


def _add_source(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="YAML scenario file")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--learner", choices=LEARNERS)
    p.add_argument("--h", type=float, help="grid resolution override")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write metrics")
    _add_source(run)
    for name in ("features", "noise", "init", "oracle"):
        run.add_argument(f"--seed-{name}", type=int, dest=f"seed_{name}")
    run.add_argument("--T", type=int, help="number of time steps")
    run.add_argument("--out", help="output directory (default: config output.dir)")
    run.add_argument("--record-timing", action="store_true", help="fill the update_ms column (breaks byte-reproducibility)")

    bench = sub.add_parser("bench", help="learner update-time scaling")
    _add_source(bench)
    bench.add_argument("--reps", type=int, default=7)
    bench.add_argument("--learners", default="gp,rfgp,orfgp")
    bench.add_argument("--out", help="write the timing table as JSON")

    orc = sub.add_parser("oracle", help="precompute the best-found CVT cost")
    _add_source(orc)
    orc.add_argument("--out", help="write the oracle as JSON")

    val = sub.add_parser("validate", help="check a config and print the resolved form")
    _add_source(val)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        json.dump(cfg.to_dict(), sys.stdout, indent=2, default=list)
        print()
        return 0

    if args.command == "oracle":
        if cfg.density.preset == "tv_gmm":
            print("error: oracle needs a time-invariant density", file=sys.stderr)
            return 2
        o = compute_oracle(cfg)
        doc = {"optimal_cost": o.optimal_cost, "optimal_positions": o.optimal_positions.tolist(), "restarts": o.restarts, "seed": cfg.seeds.oracle}
        text = json.dumps(doc, indent=2)
        if args.out:
            Path(args.out).write_text(text)
        print(text)
        return 0

    if args.command == "bench":
        learners = tuple(s.strip() for s in args.learners.split(",") if s.strip())
        rows, slopes = bench_scaling(cfg, learners, reps=args.reps)
        print(f"{'learner':8s} {'T':>7s} {'median_ms':>11s}")
        for r in rows:
            print(f"{r.learner:8s} {r.T:7d} {r.median_s * 1e3:11.4f}")
        for k, s in slopes.items():
            print(f"slope[{k}] = {s:.3f}")
        if args.out:
            Path(args.out).write_text(json.dumps({"rows": [r.__dict__ for r in rows], "slopes": slopes}, indent=2))
        return 0

    out = args.out or cfg.output.dir
    try:
        art = run_scenario(cfg, out)
    except RunFailed as exc:
        print(f"error: run failed: {exc} (partial outputs in {out})", file=sys.stderr)
        return 1
    last = art.steps[-1]
    print(f"{cfg.name}/{cfg.learner}: {len(art.steps)} steps, final cost {last.cost_true:.4f}, mse {last.mse:.4g} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
