"""Command-line entry point: ``hybridcov run | validate | compare``."""

from __future__ import annotations

import argparse
import sys

from .network import errors, validate
from .scenario import ScenarioError, config_from_document, default_document, load_document
from .sweeps import compare_coupled, parse_grid, run_sweep, sweep_from_document


def _scenario(path):
    return default_document() if path in (None, "default") else load_document(path)


def _log(msg):
    print(msg, file=sys.stderr)


def cmd_validate(args) -> int:
    try:
        cfg = config_from_document(_scenario(args.scenario))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    found = validate(cfg)
    for v in found:
        print(f"{v.severity}: {v}")
    if errors(found):
        return 1
    print(f"ok: {cfg.n_tiers} tiers")
    return 0


def cmd_run(args) -> int:
    try:
        doc = _scenario(args.scenario)
        cfg = config_from_document(doc)
        bad = errors(validate(cfg))
        if bad:
            for v in bad:
                print(f"error: {v}", file=sys.stderr)
            return 1
        spec = sweep_from_document(load_document(args.sweep))
        if args.seed is not None:
            spec.seed = args.seed
        if args.trials is not None:
            spec.trials = args.trials
        spec.workers = args.workers
        problems = spec.problems()
        if problems:
            for p in problems:
                print(f"error: {p}", file=sys.stderr)
            return 1
        result = run_sweep(spec, doc, args.out, log=None if args.quiet else _log)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result.failed:
        print(f"error: {result.failed}", file=sys.stderr)
        return 1
    for s in result.summary:
        print(f"{s['metric']},{s['direction']},{s['tier']}: max gap {s['max_abs_gap']:.4f}")
    return 0


def cmd_compare(args) -> int:
    try:
        doc = _scenario(args.scenario)
        bad = errors(validate(config_from_document(doc)))
        if bad:
            for v in bad:
                print(f"error: {v}", file=sys.stderr)
            return 1
        grid = parse_grid(args.bias_grid)
        result = compare_coupled(doc, grid, trials=args.trials, seed=args.seed,
                                 workers=args.workers, analytical=args.analytical,
                                 out_dir=args.out, log=None if args.quiet else _log)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result.failed:
        print(f"error: {result.failed}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridcov",
                                description="Decoupled DL/UL coverage in sub-6GHz/mmWave/THz networks")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", default="default", help="TOML scenario, or 'default'")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run a named sweep with one or both engines")
    r.add_argument("--scenario", default="default")
    r.add_argument("--sweep", required=True, help="TOML sweep file")
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int, default=None, help="overrides the sweep file")
    r.add_argument("--trials", type=int, default=None, help="overrides the sweep file")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="coupled vs decoupled UL over a THz bias grid")
    c.add_argument("--scenario", default="default")
    c.add_argument("--bias-grid", required=True, help="dB grid, 'start:stop:step' or 'a,b,c'")
    c.add_argument("--out", default="results")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=int, default=50_000)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--analytical", action="store_true",
                   help="also emit analytical coverage rows (coupled UL via DL association)")
    c.add_argument("--quiet", action="store_true")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
