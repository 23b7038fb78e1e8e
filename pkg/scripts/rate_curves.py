#!/usr/bin/env python3
"""Sweep achievable rates over a noise grid for several duration supports.

Writes one plot-ready CSV with a row per (sigma, duration support) pair.
The defaults reproduce the rate-vs-noise curves for the bundled
seven-state graph with the maxentropic input kernel.

Usage:
    python scripts/rate_curves.py [--out rate_curves.csv] [--m 10000]
        [--block 200] [--seed 0] [--workers 4] [--quick]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from porechannel.cli import main as cli_main  # noqa: E402

LAMBDA_SPECS = ["1", "1,2", "1..5", "1..10", "2,3"]
SIGMAS = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.50]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="rate_curves.csv")
    parser.add_argument("--m", type=int, default=10_000)
    parser.add_argument("--block", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--quick", action="store_true",
                        help="reduce m to 2000 for a fast preview")
    args = parser.parse_args()

    m = 2000 if args.quick else args.m
    argv = ["sweep", "--fixture", "seven_state", "--jmin", "1.38",
            "--kernel", "parry", "--m", str(m), "--block", str(args.block),
            "--seed", str(args.seed), "--workers", str(args.workers),
            "--out", args.out]
    for spec in LAMBDA_SPECS:
        argv += ["--lambda", spec]
    for sigma in SIGMAS:
        argv += ["--sigma", str(sigma)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
