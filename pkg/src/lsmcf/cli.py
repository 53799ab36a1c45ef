"""``lsmcf`` command line.

    lsmcf run --config exp.json [--out DIR]
    lsmcf preset NAME [--out DIR] [--points N] [--dump-config]
    lsmcf verify --snapshots DIR [--out DIR]

Exit codes: 0 all checks passed, 2 a check missed its tolerance, 3 invalid
configuration, 4 solver blow-up, 1 any other error.  ``LSMCF_THREADS`` caps the
number of concurrent solver runs.
"""

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError, LsmcfError
from .experiment import EXIT_ERROR, EXIT_VALIDATION, load_trajectory, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lsmcf",
        description="Level set mean curvature flow experiments and BV-identity verification.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", type=Path, help="output directory (overrides the config)")

    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name", choices=cfgmod.PRESET_NAMES)
    p_pre.add_argument("--out", type=Path)
    p_pre.add_argument("--points", type=int, help="override points_per_axis")
    p_pre.add_argument("--dump-config", action="store_true",
                       help="print the preset JSON and exit")

    p_ver = sub.add_parser("verify", help="re-run the verifier on persisted snapshots")
    p_ver.add_argument("--snapshots", required=True, type=Path)
    p_ver.add_argument("--out", type=Path, help="output directory (default: <snapshots>/../verify)")
    return parser


def _fail(code, kind, message):
    json.dump({"status": kind, "error": message, "exit_code": code}, sys.stderr)
    sys.stderr.write("\n")
    return code


def _report(result):
    checks = result.summary.get("checks", {})
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['value']} (threshold {c['threshold']})")
    print(f"{result.summary.get('status')}: {result.directory}")
    return result.exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = cfgmod.load(args.config)
            return _report(run_experiment(cfg, args.out))
        if args.command == "preset":
            raw = copy.deepcopy(cfgmod.preset(args.name))
            if args.points:
                raw["grid"]["points_per_axis"] = args.points
                raw.get("verifier", {}).pop("coarse_points_per_axis", None)
            if args.dump_config:
                print(json.dumps(raw, indent=2))
                return 0
            cfg = cfgmod.validate(raw)
            return _report(run_experiment(cfg, args.out))
        cfg, traj = load_trajectory(args.snapshots)
        out = args.out or args.snapshots.parent / "verify"
        return _report(run_experiment(cfg, out, trajectory=traj))
    except ConfigError as exc:
        return _fail(EXIT_VALIDATION, "invalid-config", str(exc))
    except LsmcfError as exc:
        return _fail(EXIT_ERROR, "error", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
