"""Command line entry point: ``pulsesync {list,run,scenario,verify,frames}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import experiments as E


def _print_report(rep: dict, full: bool) -> None:
    status = "PASS" if rep["passed"] else "FAIL"
    crit = rep["criterion"]
    tag = f"criterion {crit}" if crit is not None else "companion"
    print(f"{status}  {rep['scenario']}  ({tag})  spec {rep['spec_hash'][:12]}")
    if full:
        print(json.dumps(rep["result"], indent=2, sort_keys=True, default=E.json_default))


def cmd_list(args) -> int:
    for s in E.list_scenarios():
        crit = "-" if s["criterion"] is None else str(s["criterion"])
        print(f"{crit:>2}  {s['name']:<28} {s['summary']}")
    return 0


def cmd_run(args) -> int:
    spec = E.ExperimentSpec.load(args.spec)
    rep = E.run_scenario(spec, seeds=args.seeds, out_dir=args.out)
    _print_report(rep, args.verbose)
    return 0 if rep["passed"] else 1


def cmd_scenario(args) -> int:
    rep = E.run_scenario(E.ExperimentSpec(args.name, args.seeds), out_dir=args.out)
    _print_report(rep, args.verbose)
    return 0 if rep["passed"] else 1


def cmd_verify(args) -> int:
    def line(r):
        print(f"{'PASS' if r['passed'] else 'FAIL'}  criterion {r['criterion']:>2}  {r['scenario']}", flush=True)

    summary = E.verify_all(args.budget, on_result=line)
    for name in summary["skipped"]:
        print(f"SKIP  {name}  (budget exhausted)")
    print("all criteria passed" if summary["passed"] else "acceptance incomplete or failing")
    return 0 if summary["passed"] else 1


def cmd_frames(args) -> int:
    spec = E.ExperimentSpec.load(args.spec) if args.spec else E.ExperimentSpec("figure1-torus")
    if spec.scenario != "figure1-torus":
        print(f"frames are only produced by figure1-torus, not {spec.scenario}", file=sys.stderr)
        return 2
    params = dict(spec.merged_params())
    if args.side is not None:
        params["side"] = args.side
    out = Path(args.out)
    if args.format is not None:
        params["frame_format"] = args.format
    M = int(params.get("M", 64))
    res = E.torus_frames(int(params.get("side", 30)), int(params.get("frame_seed", 0)), M, out,
                         int(params.get("frame_every", M)), params.get("frame_format", "pgm"))
    print(json.dumps(res, sort_keys=True))
    return 0 if res["synchronized"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsesync", description="Pulse-coupled synchronization experiments")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("list", help="list scenarios")
    s.set_defaults(func=cmd_list)

    s = sub.add_parser("run", help="run an experiment spec (YAML)")
    s.add_argument("spec", type=Path)
    s.add_argument("--seeds", type=int)
    s.add_argument("--out", type=Path)
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("scenario", help="run a named scenario")
    s.add_argument("name", choices=sorted(E.SCENARIOS))
    s.add_argument("--seeds", type=int)
    s.add_argument("--out", type=Path)
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("verify", help="run the acceptance scenarios")
    s.add_argument("--budget", type=float, help="seconds; later scenarios are skipped once exceeded")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("frames", help="write torus phase frames (PGM or CSV)")
    s.add_argument("spec", nargs="?", type=Path)
    s.add_argument("--out", default="frames")
    s.add_argument("--side", type=int)
    s.add_argument("--format", choices=["pgm", "csv"])
    s.set_defaults(func=cmd_frames)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
