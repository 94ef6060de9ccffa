"""Batch command line runner.

    nvcs <suite> --config run.yaml --out results/
    nvcs run --suite spectrum --config run.yaml

Exit status is 0 when every check passes, 1 when a check fails and 2 when
the configuration cannot be used.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np
import yaml

from .errors import CacheSchemaError, ConfigError
from .suites import SUITES, parse_config, run_suite

log = logging.getLogger("nvcs")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
REPORT_SCHEMA = "nvcs-report/1"


def load_config(path):
    """Read a YAML (or JSON) configuration file into a mapping."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration {path}: {exc}") from exc
    return {} if doc is None else doc


def build_report(cfg, result):
    return {
        "schema": REPORT_SCHEMA,
        "suite": result.suite,
        "passed": result.passed,
        "config": {"model": cfg.params.to_dict(), "ladder": {"class": cfg.ladder_class, **cfg.ladder_options},
                   "family": cfg.family, "label": cfg.label,
                   "numeric": {k: v for k, v in cfg.numeric.items()}},
        "checks": [c.to_dict() for c in result.checks],
        "failing": [c.name for c in result.failing()],
        "extras": _plain(result.extras),
    }


def _plain(obj):
    """Convert numpy scalars and arrays to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_outputs(out_dir, report, tables):
    os.makedirs(out_dir, exist_ok=True)
    suite = report["suite"]
    paths = [os.path.join(out_dir, f"{suite}_report.json")]
    with open(paths[0], "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (header, data) in sorted(tables.items()):
        path = os.path.join(out_dir, f"{suite}_{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.atleast_2d(data):
                w.writerow([repr(float(x)) for x in row])
        paths.append(path)
    return paths


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON configuration file")
    common.add_argument("--out", help="output directory for the report and tables")
    common.add_argument("--tolerance-scale", type=float, default=None,
                        help="multiply every tolerance by this factor")
    common.add_argument("--n-max", type=int, default=None, help="override numeric.n_max")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="nvcs", description="Run NVCS verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run the suite named by --suite")
    run.add_argument("--suite", choices=SUITES, default=None)
    for name in SUITES:
        sub.add_parser(name, parents=[common], help=f"run the {name} suite")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw = load_config(args.config) if args.config else {}
        cfg = parse_config(raw, {"n_max": args.n_max, "tolerance_scale": args.tolerance_scale})
        suite = getattr(args, "suite", None) if args.command == "run" else args.command
        suite = suite or cfg.suite
        if suite is None:
            raise ConfigError("no suite given (use a subcommand, --suite or the 'suite' key)")
        result = run_suite(cfg, suite)
    except (ConfigError, CacheSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = build_report(cfg, result)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})"
              + (f" [{c.detail}]" if c.detail and not c.passed else ""))
    out = args.out or cfg.output_dir
    if out:
        for p in write_outputs(out, report, result.tables):
            log.info("wrote %s", p)
    if not result.passed:
        print("failing checks: " + ", ".join(report["failing"]), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
