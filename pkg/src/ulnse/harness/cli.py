"""Command line entry point ``ul-nse-lab``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError, ManifestError
from .config import config_from_dict, tomllib
from .reporting import compare_runs, emit_report, format_comparison, report_checks, run_experiment


def _load(path, seed):
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: invalid TOML: {err}") from None
    if seed is not None:
        data["seed"] = seed
    return config_from_dict(data, str(path))


def build_parser():
    parser = argparse.ArgumentParser(prog="ul-nse-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a TOML config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: config 'out' or runs/<name>-seed<N>)")
    run.add_argument("--seed", type=int, help="override the config seed")
    rep = sub.add_parser("report", help="print the check table of a finished run")
    rep.add_argument("manifest", help="manifest.json or its run directory")
    cmp_ = sub.add_parser("compare", help="relative differences between two runs")
    cmp_.add_argument("manifest_a")
    cmp_.add_argument("manifest_b")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args.config, args.seed)
            manifest = run_experiment(cfg, args.out)
            print(f"manifest: {manifest}")
            print(emit_report(manifest))
            return 0
        if args.command == "report":
            print(emit_report(args.manifest))
            _, checks = report_checks(args.manifest)
            return 0 if all(c.passed for c in checks) else 1
        rows = compare_runs(args.manifest_a, args.manifest_b)
        print(format_comparison(rows))
        return 0
    except (ConfigError, ManifestError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
