"""Command line entry point: ``slabdtn <subcommand> --scenario FILE --out DIR``."""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from importlib import resources

from .scenario import ScenarioError, load_scenario
from .runner import SOLUTION, LAYER, run_many

STAGE_SETS = {
    "symbol": ["symbol"],
    "solve": ["solve"],
    "energy": ["energy"],
    "stability": ["stability"],
    "layer": ["layer", "hamiltonian", "double_well"],
    "symmetry": ["symmetry", "liouville"],
}
NEEDS = {"energy": SOLUTION, "stability": SOLUTION, "symmetry": SOLUTION, "liouville": SOLUTION,
         "limits": SOLUTION, "hamiltonian": LAYER, "double_well": LAYER}
PRODUCER = {SOLUTION: "solve", LAYER: "layer"}


def _with_prerequisites(stages, out_dir):
    plan = []
    for st in stages:
        need = NEEDS.get(st)
        if need and PRODUCER[need] not in plan and PRODUCER[need] not in stages \
                and not os.path.exists(os.path.join(out_dir, need)):
            plan.append(PRODUCER[need])
        plan.append(st)
    return plan


def _load_all(paths, seed, flip):
    scs = []
    for p in paths:
        sc = load_scenario(p)
        if seed is not None:
            sc = sc.with_overrides(scenario__seed=seed)
        if flip:
            sc = sc.with_overrides(nonlinearity__flip_sign=True)
        scs.append(sc)
    return scs


def _report(outcomes):
    status = 0
    for name, st, results in outcomes:
        for r in results:
            tag = "PASS" if r.passed else "FAIL"
            extra = f" {r.message}" if r.message else ""
            print(f"[{tag}] {name}/{r.name} ({r.wall_time:.1f} s){extra}")
        status |= st
    return status


def _run_subcommand(args, stages):
    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return 2
    scs = _load_all(args.scenario, args.seed, False)
    outcomes = []
    if stages is None:
        outcomes = run_many(scs, args.out, args.parallel)
    else:
        for sc in scs:
            plan = _with_prerequisites(stages, os.path.join(args.out, sc.name))
            outcomes.extend(run_many([sc], args.out, 1, plan))
    return _report(outcomes)


def bundled_scenarios():
    """Directory of the scenario files shipped with the package."""
    return str(resources.files("slabdtn") / "scenarios")


def _verify(args):
    if args.scenarios is not None:
        folder = bundled_scenarios() if args.scenarios == "bundled" else args.scenarios
        paths = sorted(glob.glob(os.path.join(folder, "*.scn")))
        if not paths:
            print(f"no scenarios in {folder}")
            return 0
        scs = _load_all(paths, args.seed, args.inject_sign_error)
        return _report(run_many(scs, args.out, args.parallel))
    from .acceptance import verify_all
    only = None if not args.only else {int(k) for k in args.only.split(",")}
    results = verify_all(full=args.full, only=only)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="slabdtn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", action="append", default=[], metavar="PATH",
                        help="scenario file (repeatable)")
        sp.add_argument("--out", default="slabdtn-out", metavar="DIR", help="output root; one subdirectory per scenario")
        sp.add_argument("--parallel", type=int, default=1, metavar="K", help="run up to K scenarios concurrently")
        sp.add_argument("--seed", type=int, default=None, metavar="U64", help="override the scenario seed")

    for name in list(STAGE_SETS) + ["run"]:
        helptext = "run the full scenario pipeline" if name == "run" else f"run the {name} stage(s)"
        common(sub.add_parser(name, help=helptext))
    ver = sub.add_parser("verify", help="run the acceptance suite, or every scenario in a directory")
    common(ver)
    ver.add_argument("--full", action="store_true", help="include slow criteria")
    ver.add_argument("--only", default="", metavar="LIST", help="comma list of criterion numbers")
    ver.add_argument("--scenarios", default=None, metavar="DIR", help="verify the *.scn files in DIR instead ('bundled' for the shipped set)")
    ver.add_argument("--inject-sign-error", action="store_true",
                     help="flip the sign of f in every scenario (mutation smoke test)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "verify":
            return _verify(args)
        return _run_subcommand(args, STAGE_SETS.get(args.command))
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
