"""Command-line entry point: run a scenario config, list scenarios, or run
the full deterministic check suite."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import BohmlabError, ConfigValidationError
from .runner import SCENARIOS, default_config, parse_config, run_scenario

# Scenario set exercised by `bohmlab check`, with sizes that finish in minutes.
CHECK_SUITE = (
    ("counterexample_v_plus_x", {}),
    ("free_gaussian", {}),
    ("plane_wave", {}),
    ("two_gaussian_superposition", {}),
    ("harmonic_oscillator", {}),
    ("protocol_velocity", {"state": {"k0": 2.0},
                           "protocol": {"n_runs": 100000}}),
    ("bias_scan", {"state": {"k0": 2.0}, "bias": {"n_runs": 50000}}),
    ("backaction", {"grid": {"n_points": 256},
                    "protocol": {"pointer": {"n_points": 128}}}),
)


def _print_manifest(manifest):
    for row in manifest["checks"]:
        status = "PASS" if row["passed"] else "FAIL"
        print(f"[{status}] {manifest['scenario']}.{row['name']}: "
              f"value={row['value']:.6g} residual={row['residual']:.3g} "
              f"tol={row['tolerance']:.3g}")


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    except ConfigValidationError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except BohmlabError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    manifest = run_scenario(cfg)
    _print_manifest(manifest)
    return 0 if manifest["passed"] else 1


def cmd_check(args) -> int:
    ok = True
    for scenario, overrides in CHECK_SUITE:
        overrides = dict(overrides)
        overrides["seed"] = args.seed
        if args.output_dir:
            overrides["output_dir"] = args.output_dir
        cfg = default_config(scenario, **overrides)
        manifest = run_scenario(cfg)
        _print_manifest(manifest)
        ok = ok and manifest["passed"]
    print("check suite:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_list(args) -> int:
    for s in SCENARIOS:
        print(s)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bohmlab",
        description="Bohmian trajectories and weak-value identity checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a JSON config")
    p_run.add_argument("config", help="path to the JSON config document")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run the full identity-check suite")
    p_check.add_argument("--seed", type=int, default=20240901)
    p_check.add_argument("--output-dir", default=None)
    p_check.set_defaults(func=cmd_check)

    p_list = sub.add_parser("list-scenarios", help="list known scenarios")
    p_list.set_defaults(func=cmd_list)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
