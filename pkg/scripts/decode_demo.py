#!/usr/bin/env python3
"""Simulate one duplicated, noisy trace and decode it both ways.

Prints the true segmentation next to the joint MAP segmentation and the
per-segment posterior confidence of the symbol detector.

Usage:
    python scripts/decode_demo.py [--sigma 0.3] [--lambda 1,2] [--m 20]
        [--seed 0]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np  # noqa: E402

from porechannel.channel import NoiseModel, simulate  # noqa: E402
from porechannel.cli import parse_lambda_spec  # noqa: E402
from porechannel.detection import (SegmentLikelihood, backward,  # noqa: E402
                                   forward, point_mass, posteriors, viterbi)
from porechannel.fixtures import seven_state_graph  # noqa: E402
from porechannel.source import DurationModel, parry_kernel  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sigma", type=float, default=0.3)
    parser.add_argument("--lambda", dest="lam", default="1,2")
    parser.add_argument("--m", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    src = parry_kernel(seven_state_graph())
    g = src.graph
    dur = DurationModel.uniform(parse_lambda_spec(args.lam))
    trace = simulate(src, dur, NoiseModel(args.sigma), None, args.m, args.seed)

    sl = SegmentLikelihood.build(src, dur, args.sigma, trace.samples)
    mu0 = point_mass(g, trace.s0)
    post = posteriors(forward(sl, mu0, args.m), backward(sl, args.m), sl)
    vr = viterbi(sl, mu0, args.m)

    print(f"m={trace.m} segments over T_m={trace.t_m} samples, "
          f"sigma={args.sigma}, durations on {dur.support}")
    print(f"log-evidence {post.log_evidence:.4f}, "
          f"MAP path log-score {vr.log_score:.4f}\n")
    print(f"{'l':>3} {'true':<6} {'k':>2} | {'viterbi':<8} {'k':>2} "
          f"| {'argmax psi':<10} {'conf':>6}")
    errors = 0
    for ell in range(1, args.m + 1):
        true_s = trace.states[ell - 1]
        map_s = vr.states[ell - 1]
        s_hat = int(np.argmax(post.psi[ell]))
        sym = g.kmers[s_hat]
        if sym != true_s:
            errors += 1
        print(f"{ell:>3} {true_s:<6} {trace.durations[ell - 1]:>2} "
              f"| {map_s:<8} {vr.durations[ell - 1]:>2} "
              f"| {sym:<10} {post.psi[ell, s_hat]:>6.3f}"
              + ("   <- symbol error" if sym != true_s else ""))
    print(f"\nsymbol errors: {errors}/{args.m}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
