"""Run every config in configs/ through the CLI, writing to runs/<name>/.

The subcommand is taken from the file name suffix (``*_scan.ini`` runs
``scan`` and so on). Pass config names to run a subset.
"""

import argparse
import sys
import time
from pathlib import Path

from bertrand_lab.cli import main

ROOT = Path(__file__).resolve().parent.parent
SUFFIXES = {"scan": "scan", "simulate": "simulate", "falsify": "falsify",
            "decompose": "decompose", "census": "tannery", "tannery": "tannery"}
EXTRA = {"sphere_control_falsify": ["--allow-riemannian"], "kepler_simulate": ["--plot"]}


def command_for(path: Path) -> str:
    stem = path.stem
    for suffix, cmd in SUFFIXES.items():
        if stem.endswith("_" + suffix) or stem.startswith(suffix + "_"):
            return cmd
    raise SystemExit(f"cannot infer a subcommand for {path.name}")


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", help="config stems (default: all)")
    ap.add_argument("--out", default=str(ROOT / "runs"))
    ap.add_argument("--seed", default="0")
    ap.add_argument("--jobs", default="1")
    args = ap.parse_args(argv)

    paths = sorted((ROOT / "configs").glob("*.ini"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    failed = []
    for p in paths:
        cmd = command_for(p)
        t0 = time.perf_counter()
        print(f"== {p.stem} ({cmd})")
        code = main([cmd, "--config", str(p), "--out", str(Path(args.out) / p.stem),
                     "--seed", args.seed, "--jobs", args.jobs, *EXTRA.get(p.stem, [])])
        print(f"   exit {code} in {time.perf_counter() - t0:.1f} s")
        if code:
            failed.append(p.stem)
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(run())
