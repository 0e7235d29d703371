"""Command-line front end.

Exit codes: 0 all verdicts pass (or the run completed), 2 a check failed or
the campaign refused the scenario, 3 the run ended on a blowup flag,
1 usage or schema error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .experiments import (CAMPAIGNS, SCHEMA_PATH, CampaignRefused, SchemaError,
                          explore_subcritical,
                          load_scenario, resume, run_scenario, sweep_resolution,
                          sweep_viscosity)
from .experiments.campaigns import CLASSIFIER_NOTE, CampaignResult
from .experiments.oracles import run_battery
from .experiments.scenario import parse_value

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_BLOWUP = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fks", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="scenario JSON file")
        sp.add_argument("--out", help="output directory (default $FKS_OUT/<name>)")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="PATH=VALUE", help="override a scenario field (repeatable)")
        sp.add_argument("--seed", type=int, help="seed for random initial conditions")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    scenario_args(sub.add_parser("run", help="integrate a scenario and evaluate its checks"))
    v = sub.add_parser("verify", help="run a theorem verification campaign")
    scenario_args(v)
    v.add_argument("--theorem", required=True, choices=sorted(CAMPAIGNS))
    s = sub.add_parser("sweep", help="viscosity, resolution or subcritical sweep")
    scenario_args(s)
    s.add_argument("--kind", choices=("viscosity", "resolution", "subcritical"),
                   default="viscosity")
    o = sub.add_parser("oracle", help="operator and identity self-tests")
    o.add_argument("--out", help="directory for oracle.json")
    r = sub.add_parser("resume", help="continue a run from its latest snapshot")
    scenario_args(r, config_required=False)
    return p


def _out_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get("FKS_OUT", "fks_out")
    return Path(root) / name


def _print_result(res: CampaignResult) -> None:
    print(f"scenario {res.scenario}  campaign {res.campaign}  "
          f"classification {res.classification}")
    s = res.summary
    if "n_steps" in s:
        print(f"  steps {s['n_steps']}  t_end {s['final_t']:.6g}  "
              f"max u {s['max_u']:.6g}  min u {s['min_u']:.6g}")
    if res.classification == "blowup":
        print(f"  note: {CLASSIFIER_NOTE}")
    for v in res.verdicts:
        tag = {"pass": "PASS", "fail": "FAIL"}.get(v.status, "UNMET")
        print(f"  [{tag}] {v.check:<18} margin {v.margin:<12.4g} tol {v.tolerance:.3g}")
        if v.status == "precondition unmet":
            print(f"         {v.detail.get('reason', '')}")
    if res.out is not None:
        print(f"  outputs in {res.out}")


def _cmd_run(args, theorem: Optional[str] = None) -> int:
    spec, applied = load_scenario(args.config, args.overrides, args.seed)
    out = _out_dir(args, spec.name)
    if theorem is None:
        res = run_scenario(spec, out, overrides=applied)
    else:
        try:
            res = CAMPAIGNS[theorem](spec, out, applied)
        except CampaignRefused as e:
            print(f"campaign refused: {e}")
            return EXIT_FAILED
    _print_result(res)
    return res.exit_code


def _cmd_sweep(args) -> int:
    spec, _ = load_scenario(args.config, args.overrides, args.seed)
    out = _out_dir(args, spec.name)
    if args.kind == "viscosity":
        rep = sweep_viscosity(spec, jobs=args.jobs, out=out)
        print(f"viscosity sweep {spec.name}: trend {rep['trend']}  status {rep['status']}")
        for e, d in zip(rep["eps"], rep["differences"]):
            print(f"  eps {e:<8.3g} -> next  L2 diff {d:.4e}")
    elif args.kind == "resolution":
        rep = sweep_resolution(spec, jobs=args.jobs, out=out)
        print(f"resolution sweep {spec.name}: status {rep['status']}")
        for n, d, o in zip(rep["n"], rep["differences"], rep["orders"] + [float("nan")]):
            print(f"  n {n:<5d} diff {d:.4e}  order {o:.3f}")
    else:
        rep = explore_subcritical(spec, jobs=args.jobs, out=out)
        print(f"subcritical exploration {spec.name} (exploratory; {CLASSIFIER_NOTE})")
        for c in rep["cells"]:
            print(f"  alpha {c['alpha']:<4} r {c['r']:<4} {c['label']:<12} "
                  f"2n: {c['label_2n']:<12} stable {c['stable']}")
        return EXIT_OK
    print(f"  outputs in {out}")
    if rep["status"] in ("pass", "converged"):
        return EXIT_OK
    if "blowup" in rep["status"] or any(r["classification"] == "blowup" for r in rep["runs"]):
        return EXIT_BLOWUP
    return EXIT_FAILED


def _cmd_oracle(args) -> int:
    results = run_battery()
    for r in results:
        print(f"  [{'PASS' if r.passed else 'FAIL'}] {r.name:<26} {r.value:.3e} <= {r.tol:.0e}")
    if args.out:
        from .experiments.report import write_json
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "oracle.json",
                   [{"name": r.name, "value": r.value, "tol": r.tol, "passed": r.passed}
                    for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def _cmd_resume(args) -> int:
    T = None
    for item in args.overrides:
        key, _, raw = item.partition("=")
        if key != "T":
            raise UsageError(f"resume accepts only --set T=<horizon>, got {item!r}")
        T = float(parse_value(raw))
    if args.out:
        out = Path(args.out)
    elif args.config:
        spec, _ = load_scenario(args.config)
        out = _out_dir(args, spec.name)
    else:
        raise UsageError("resume needs --out or --config")
    try:
        res = resume(out, T)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    _print_result(res)
    return res.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_run(args, args.theorem)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_resume(args)
    except SchemaError as e:
        print(e, file=sys.stderr)
        print(f"scenario schema: {SCHEMA_PATH}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
