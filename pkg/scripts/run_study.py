#!/usr/bin/env python3
"""Run one or all of the canonical experiment configs.

Usage:
    python scripts/run_study.py                     # run everything
    python scripts/run_study.py winners_compare     # run one config
    python scripts/run_study.py --out results/      # choose output dir

Each study writes <scenario>.csv and <scenario>.summary.json under the
output directory, in a subdirectory named after the config.
"""
import argparse
import json
import pathlib
import sys
import time

from selectcond.harness import load_config, run, verify_summary, write_outputs

CONFIG_DIR = pathlib.Path(__file__).parent / "configs"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("studies", nargs="*",
                        help="config names (without .json); default: all")
    parser.add_argument("--out", default="results", help="output directory")
    args = parser.parse_args(argv)

    available = sorted(p.stem for p in CONFIG_DIR.glob("*.json"))
    names = args.studies or available
    unknown = [n for n in names if n not in available]
    if unknown:
        parser.error(f"unknown studies {unknown}; available: {available}")

    for name in names:
        config = load_config(CONFIG_DIR / f"{name}.json")
        t0 = time.monotonic()
        result = run(config)
        elapsed = time.monotonic() - t0
        out_dir = pathlib.Path(args.out) / name
        paths = write_outputs(result, out_dir)
        assert verify_summary(result), f"summary verification failed for {name}"
        print(f"== {name} ({elapsed:.1f}s) -> {paths['csv']}")
        print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
