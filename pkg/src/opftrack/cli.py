"""Command-line entry point: ``opftrack {run,compare,scenarios,validate,benchmark}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bench import TARGET_FPS, compare_backends
from .builtin_scenarios import BUILTINS, builtin_scenarios
from .errors import InvalidConfigError, OpfError
from .harness import RunConfig, load_config, log_charts, resolve_scenario, run_compare, run_experiment
from .scenario import load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3

log = logging.getLogger("opftrack")


def _base_config(args) -> RunConfig:
    cfg = RunConfig(scenario=args.scenario, seed=args.seed, n_particles=args.particles)
    if args.config:
        cfg = load_config(args.config, cfg)
    resolve_scenario(cfg.scenario)  # surface scenario errors before any work
    return cfg


def cmd_run(args) -> int:
    cfg = replace(_base_config(args), filter_kind=args.filter, out=args.out)
    result = run_experiment(cfg)
    s = result.summary
    print(f"{result.scenario} {result.filter_kind} seed={result.seed}: "
          f"translation error {s['translation_error']:.6g} m, "
          f"rotation error {s['rotation_error']:.6g} rad, "
          f"{s['occluded_frames']}/{s['frames']} target frames occluded")
    for frame, oid, hyp, kind, u in result.events:
        print(f"  frame {frame}: safety alert {kind} for {oid}#{hyp} (trace {u:.4g})")
    if args.out:
        print(f"wrote {args.out}")
    if args.svg:
        Path(args.svg).write_text(log_charts([result]))
        print(f"wrote {args.svg}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _base_config(args)
    report, _ = run_compare(cfg, range(args.seed, args.seed + args.seeds))
    print(report.text())
    ratios = report.ratios()
    print("opf/pf ratio: " + ", ".join(f"{m} {r:.3f}" for m, r in ratios.items()))
    if args.out:
        Path(args.out).write_text(report.to_csv())
        print(f"wrote {args.out}")
    if args.check:
        ok = report.check(args.max_ratio)
        print(f"check (ratio <= {args.max_ratio}): {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_CHECK
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name, scene in builtin_scenarios().items():
        ids = ", ".join(str(o.id) for o in scene.objects)
        print(f"{name:16s} {scene.n_frames:4d} frames @ {scene.frame_rate:g} Hz, "
              f"target {scene.target_id}; objects: {ids}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scene = load_scenario(args.path)
    print(f"{args.path}: ok ({len(scene.objects)} objects, {scene.n_frames} frames, "
          f"target {scene.target_id})")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    results = compare_backends(args.frames, args.objects, args.particles)
    for r in results:
        print(f"{r.backend:6s} {r.fps:8.1f} frames/s  ({r.objects} objects, "
              f"{r.particles}+{r.particles} particles, {r.frames} frames)")
    if len(results) == 2:
        a, b = results
        print(f"speedup {b.backend}/{a.backend}: {b.fps / a.fps:.2f}x")
    best = max(r.fps for r in results)
    if best < TARGET_FPS:
        log.warning("best throughput %.1f frames/s is below the %.0f frames/s target",
                    best, TARGET_FPS)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opftrack", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", default="general_op",
                        help=f"builtin name ({', '.join(BUILTINS)}) or scenario JSON path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--particles", type=int, default=5000, help="particles per portion")
        sp.add_argument("--config", help="JSON file overriding op/feedback/filter/noise settings")
        sp.add_argument("--out", help="output CSV path")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--filter", choices=("pf", "opf"), default="opf")
    run.add_argument("--svg", help="also write error/trace charts as SVG")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="multi-seed PF vs OPF comparison")
    common(cmp_)
    cmp_.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    cmp_.add_argument("--check", action="store_true",
                      help="exit 3 unless OPF errors are <= max-ratio x PF errors")
    cmp_.add_argument("--max-ratio", type=float, default=0.5)
    cmp_.set_defaults(func=cmd_compare)

    sc = sub.add_parser("scenarios", help="list builtin scenarios")
    sc.set_defaults(func=cmd_scenarios)

    val = sub.add_parser("validate", help="schema-check a scenario file")
    val.add_argument("path")
    val.set_defaults(func=cmd_validate)

    bench = sub.add_parser("benchmark", help="ensemble throughput, numba vs numpy")
    bench.add_argument("--frames", type=int, default=200)
    bench.add_argument("--objects", type=int, default=4)
    bench.add_argument("--particles", type=int, default=5000)
    bench.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "seeds", 1) < 1 or getattr(args, "particles", 1) < 1:
        print("error: --seeds and --particles must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (InvalidConfigError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OpfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
