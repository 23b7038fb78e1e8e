"""Acceptance gate: nine numbered criteria, one pass/fail line each.

Each criterion is implemented exactly at its stated tolerance. Criterion 7
checks fixed rate-curve targets for the bundled seven-state graph; the
targets are kept as stated even for the rows this implementation's exact,
oracle-verified estimator does not reach.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from classical_hmm import classical_posteriors, classical_viterbi
from conftest import assert_posterior_invariants
from porechannel.channel import NoiseModel, simulate
from porechannel.detection import (SegmentLikelihood, backward, forward,
                                   point_mass, posteriors, viterbi)
from porechannel.fixtures import (SEVEN_STATE_LEVELS, seven_state_graph,
                                  toy_tau2_mapping)
from porechannel.kmer_space import (ChannelMapping, full_graph, induced_graph,
                                    jump_constrained_reduce, perron_entropy)
from porechannel.oracle import enumerate_paths
from porechannel.rates import (TValueAccumulator, accumulate_t_values,
                               achievable_rate, mean_conditional_entropy,
                               monte_carlo_rate)
from porechannel.source import (DurationModel, SemiMarkovKernel, parry_kernel,
                                stationary_distribution, uniform_kernel)
from scipy.special import logsumexp

H_MAX = 0.3063


def report(number, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {number}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {number} failed: {detail}"


def _three_state_source():
    mapping = ChannelMapping(1, {"A": 0.0, "C": 1.5, "G": 3.0})
    g = jump_constrained_reduce(induced_graph(mapping), 0.5)
    return uniform_kernel(g)


def _random_instance(rng, src):
    size = int(rng.integers(1, 4))
    lam = tuple(sorted(rng.choice([1, 2, 3], size=size, replace=False)))
    dur = DurationModel.uniform(lam)
    sigma = float(rng.uniform(0.2, 2.0))
    m = int(rng.integers(1, 5))
    trace = simulate(src, dur, NoiseModel(sigma), None, m,
                     int(rng.integers(1 << 30)))
    return dur, sigma, m, trace


def test_criterion_1_perron_entropy():
    start = time.perf_counter()
    h = perron_entropy(seven_state_graph())
    elapsed = time.perf_counter() - start
    ok = abs(h - H_MAX) <= 0.0005 and elapsed < 1.0
    report(1, ok, f"H = {h:.6f} bits/base in {elapsed:.3f}s")


def test_criterion_2_jump_constraint_consistency():
    start = time.perf_counter()
    g = seven_state_graph()
    jumps = [abs(SEVEN_STATE_LEVELS[g.kmers[i]] - SEVEN_STATE_LEVELS[g.kmers[j]])
             for i, j, _ in g.edges]
    reduced = jump_constrained_reduce(g, 1.38)
    elapsed = time.perf_counter() - start
    ok = (len(g.edges) == 9 and all(j >= 1.38 for j in jumps)
          and reduced.edges == g.edges and elapsed < 1.0)
    report(2, ok, f"9 edges, min jump {min(jumps):.2f}, all retained at 1.38")


def test_criterion_3_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    sources = [_three_state_source(),
               uniform_kernel(jump_constrained_reduce(
                   induced_graph(ChannelMapping(1, {"A": 1.0, "T": -1.0})),
                   0.5))]
    checked = 0
    worst = 0.0
    while checked < 200:
        src = sources[checked % 2]
        dur, sigma, m, trace = _random_instance(rng, src)
        mu0 = point_mass(src.graph, trace.s0)
        en = enumerate_paths(src, dur, NoiseModel(sigma), mu0, m, trace.t_m,
                             trace.samples)
        sl = SegmentLikelihood.build(src, dur, sigma, trace.samples)
        post = posteriors(forward(sl, mu0, m), backward(sl, m), sl)
        vr = viterbi(sl, mu0, m)
        scale = abs(en.log_evidence)
        worst = max(
            worst,
            abs(post.log_evidence - en.log_evidence) / max(scale, 1.0),
            float(np.abs(post.psi - en.psi).max()),
            float(np.abs(post.psi_pairs - en.psi_pairs).max()),
            abs(vr.log_score - en.map_log_joint) / max(abs(en.map_log_joint), 1.0),
        )
        assert vr.states == tuple(src.graph.kmers[i] for i in en.map_states)
        checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60.0
    report(3, ok, f"{checked} instances, worst dev {worst:.2e}, {elapsed:.1f}s")


def test_criterion_4_classical_collapse():
    start = time.perf_counter()
    src = parry_kernel(seven_state_graph())
    g = src.graph
    dur = DurationModel.uniform([1])
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(50):
        sigma = float(rng.uniform(0.1, 1.0))
        m = int(rng.integers(5, 25))
        trace = simulate(src, dur, NoiseModel(sigma), None, m,
                         int(rng.integers(1 << 30)))
        mu0 = point_mass(g, trace.s0)
        sl = SegmentLikelihood.build(src, dur, sigma, trace.samples)
        post = posteriors(forward(sl, mu0, m), backward(sl, m), sl)
        vr = viterbi(sl, mu0, m)
        psi_c, pairs_c, log_z_c = classical_posteriors(
            list(mu0), src.trans.tolist(), list(g.levels), sigma,
            trace.samples.tolist())
        path_c, score_c = classical_viterbi(
            list(mu0), src.trans.tolist(), list(g.levels), sigma,
            trace.samples.tolist())
        # log-domain scores can sit near zero, so deviations are measured
        # relative with an absolute floor of one (as in criterion 3)
        worst = max(
            worst,
            abs(post.log_evidence - log_z_c) / max(abs(log_z_c), 1.0),
            float(np.abs(post.psi[1:] - np.array(psi_c)[1:]).max()),
            float(np.abs(post.psi_pairs[2:] - np.array(pairs_c)[2:]).max()),
            abs(vr.log_score - score_c) / max(abs(score_c), 1.0),
        )
        assert vr.states == tuple(g.kmers[s] for s in path_c)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 30.0
    report(4, ok, f"50 instances, worst dev {worst:.2e}, {elapsed:.1f}s")


def test_criterion_5_invariant_suite():
    src = parry_kernel(seven_state_graph())
    dur = DurationModel((1, 2, 3), (0.5, 0.3, 0.2))
    m = 30
    trace = simulate(src, dur, NoiseModel(0.4), None, m, 55)
    sl = SegmentLikelihood.build(src, dur, 0.4, trace.samples)
    mu0 = point_mass(src.graph, trace.s0)
    fl = forward(sl, mu0, m)
    bl = backward(sl, m)
    post = posteriors(fl, bl, sl)

    assert_posterior_invariants(post, tol=1e-9)

    ref = post.log_evidence
    for ell in range(1, m + 1):
        lo, hi = fl.bands[ell]
        with np.errstate(invalid="ignore"):
            got = float(logsumexp(fl.log_alpha[ell, lo:hi + 1]
                                  + bl.log_beta[ell, lo:hi + 1]))
        assert abs(got - ref) <= 1e-9

    smk = SemiMarkovKernel(src, dur)
    n = src.graph.n
    row_sums = [sum(smk.q(i, j, k) for j in range(n) for k in dur.support)
                for i in range(n)]
    assert max(abs(r - 1.0) for r in row_sums) <= 1e-12

    mu = stationary_distribution(src.trans)
    residual = float(np.max(np.abs(mu @ src.trans - mu)))
    assert residual <= 1e-10
    report(5, True, f"stationary residual {residual:.1e}")


def test_criterion_6_t_value_identity():
    src = _three_state_source()
    rng = np.random.default_rng(99)
    worst = 0.0
    checked = 0
    while checked < 25:
        dur, sigma, m, trace = _random_instance(rng, src)
        if m < 2:
            continue
        mu0 = point_mass(src.graph, trace.s0)
        en = enumerate_paths(src, dur, NoiseModel(sigma), mu0, m, trace.t_m,
                             trace.samples)
        from porechannel.detection import PosteriorSet
        post = PosteriorSet(en.psi, en.psi_pairs, en.log_evidence, m)
        acc = TValueAccumulator(src.mu, src.trans)
        accumulate_t_values(acc, post, src.mu, src.trans)
        est = achievable_rate(acc)
        worst = max(worst,
                    abs(est.t_term + mean_conditional_entropy(post)))
        checked += 1
    ok = worst <= 1e-9
    report(6, ok, f"{checked} oracle instances, worst dev {worst:.2e}")


RATE_TARGETS = [
    # (lambda support, sigma, target, tolerance)
    ((1,), 0.10, H_MAX, 0.005),
    ((1,), 0.20, H_MAX, 0.005),
    ((1,), 0.30, H_MAX, 0.005),
    ((1,), 0.40, H_MAX, 0.005),
    ((1, 2), 0.25, 0.3005, 0.02),
    ((1, 2), 0.30, 0.2419, 0.02),
    ((1, 2), 0.40, 0.1349, 0.02),
    ((1, 2, 3, 4, 5), 0.30, 0.1307, 0.02),
    (tuple(range(1, 11)), 0.30, 0.1393, 0.02),
    ((2, 3), 0.40, 0.3059, 0.01),
]


def test_criterion_7_rate_curve_reproduction():
    src = parry_kernel(seven_state_graph())
    failures = []
    lines = []
    measured = {}
    for lam, sigma, target, tol in RATE_TARGETS:
        est = monte_carlo_rate(src, DurationModel.uniform(lam),
                               NoiseModel(sigma), None, 10_000, 200,
                               seed=1000 + int(100 * sigma) + len(lam))
        measured[(lam, sigma)] = est.rate
        ok = abs(est.rate - target) <= tol
        lines.append(f"  lambda={lam} sigma={sigma}: rate={est.rate:.4f} "
                     f"(+-{est.stderr:.4f}) target={target} +-{tol} "
                     f"{'ok' if ok else 'OUTSIDE'}")
        if not ok:
            failures.append(lines[-1])
    improvement = measured[((2, 3), 0.40)] - measured[((1, 2), 0.40)]
    ok_imp = improvement >= 0.1
    lines.append(f"  duration-shift improvement {improvement:.4f} "
                 f"(required >= 0.1) {'ok' if ok_imp else 'OUTSIDE'}")
    if not ok_imp:
        failures.append(lines[-1])
    detail = f"{len(RATE_TARGETS) + 1 - len(failures)}/11 rows in tolerance"
    print("\n".join(lines))
    report(7, not failures, detail + "".join("\n" + f for f in failures))


def test_criterion_8_complexity_scaling():
    src = parry_kernel(seven_state_graph())
    dur = DurationModel.uniform([1, 2])
    g = src.graph
    c = 1.0
    ratios = []
    for m in (50, 100, 200):
        trace = simulate(src, dur, NoiseModel(0.3), None, m, m)
        sl = SegmentLikelihood.build(src, dur, 0.3, trace.samples)
        vr = viterbi(sl, point_mass(g, trace.s0), m)
        bound = c * m * trace.t_m * 4 * g.n * len(dur.support)
        ratios.append(vr.ops / bound)
    ok = all(r <= 1.0 for r in ratios)
    report(8, ok, "ops/bound = " + ", ".join(f"{r:.3f}" for r in ratios))


def test_criterion_9_degenerate_limits():
    # near-noiseless with injective levels: exact recovery of states and
    # segmentation by the joint MAP decoder
    mapping = toy_tau2_mapping()
    # drop the zero-jump self-loops: a repeated state makes the split of
    # its samples into dwells unidentifiable even without noise
    src = uniform_kernel(jump_constrained_reduce(full_graph(mapping), 0.25))
    dur = DurationModel.uniform([1, 2])
    sigma = 1e-4
    trace = simulate(src, dur, NoiseModel(sigma), None, 50, 17)
    sl = SegmentLikelihood.build(src, dur, sigma, trace.samples)
    vr = viterbi(sl, point_mass(src.graph, trace.s0), 50)
    exact = (vr.states == trace.states and vr.durations == trace.durations)

    # flat-emission limit: sigma far above the level spread
    flat = monte_carlo_rate(parry_kernel(seven_state_graph()),
                            DurationModel.uniform([1, 2]), NoiseModel(1e6),
                            None, 2000, 100, 23)
    ok = exact and abs(flat.rate) <= 0.01
    report(9, ok, f"exact recovery={exact}, flat-emission rate={flat.rate:.4f}")
