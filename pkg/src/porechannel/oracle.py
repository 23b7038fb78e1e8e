"""Exhaustive enumeration of joint path probabilities for tiny instances.

Ground truth for the lattice algorithms: sums and maxima are taken over
every (state sequence, duration sequence) consistent with the graph, the
duration support, and the total sample count. Emission terms are evaluated
with the scalar Gaussian log-density, independently of the vectorized
prefix-sum machinery in the detection module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import NoiseModel, gaussian_log_density
from .errors import DataError
from .kmer_space import ChannelMapping
from .source import DurationModel, MarkovSource

PATH_GUARD = 10**7


@dataclass(frozen=True)
class PathEnumeration:
    """All consistent paths with exact evidence, posteriors, and MAP path."""

    paths: tuple  # of (s0_idx, state_idx tuple, durations tuple, log_joint)
    log_evidence: float
    psi: np.ndarray        # (m+1, n), rows 1..m
    psi_pairs: np.ndarray  # (m+1, n, n), rows 2..m
    map_states: tuple[int, ...]
    map_durations: tuple[int, ...]
    map_log_joint: float


def enumerate_paths(src: MarkovSource, dur: DurationModel, noise: NoiseModel,
                    mu0: np.ndarray, m: int, t_m: int, y,
                    mapping: Optional[ChannelMapping] = None) -> PathEnumeration:
    """Enumerate every consistent (s_1^m, k_1^m) and normalize exactly.

    Refuses instances whose worst-case path count |Omega|^m * |Lambda|^m
    exceeds 10^7.
    """
    g = src.graph
    n = g.n
    if n**m * len(dur.support)**m > PATH_GUARD:
        raise DataError(
            f"instance too large for enumeration: {n}^{m} * "
            f"{len(dur.support)}^{m} > {PATH_GUARD}")
    y = [float(v) for v in y]
    if len(y) != t_m:
        raise DataError("observation length does not match T_m")
    levels = ([mapping.level(k) for k in g.kmers]
              if mapping is not None else list(g.levels))
    sds = [noise.sd_for(k) for k in g.kmers]
    k_min, k_max = dur.k_min, dur.k_max

    succ: list[list[int]] = [[] for _ in range(n)]
    for i, j, _ in g.edges:
        succ[i].append(j)

    paths: list[tuple[int, tuple[int, ...], tuple[int, ...], float]] = []

    def emit_sum(s: int, t0: int, t1: int) -> float:
        return math.fsum(
            gaussian_log_density(y[r], levels[s], sds[s]) for r in range(t0, t1))

    def walk(prev: int, depth: int, t: int, logp: float,
             states: list[int], durs: list[int]):
        if depth == m:
            if t == t_m:
                paths.append((s0, tuple(states), tuple(durs), logp))
            return
        remaining = m - depth
        for s in succ[prev]:
            lp_trans = math.log(src.trans[prev, s])
            for k in dur.support:
                t_new = t + k
                left = remaining - 1
                if t_new + left * k_min > t_m or t_new + left * k_max < t_m:
                    continue
                states.append(s)
                durs.append(k)
                walk(s, depth + 1, t_new,
                     logp + lp_trans + math.log(dur.prob(k))
                     + emit_sum(s, t, t_new),
                     states, durs)
                states.pop()
                durs.pop()

    for s0 in range(n):
        if mu0[s0] <= 0:
            continue
        walk(s0, 0, 0, math.log(mu0[s0]), [], [])

    if not paths:
        raise DataError("no consistent path for this instance")

    shift = max(lp for _, _, _, lp in paths)
    weights = [math.exp(lp - shift) for _, _, _, lp in paths]
    z = math.fsum(weights)
    log_evidence = shift + math.log(z)

    psi_lists: list[list[list[float]]] = [
        [[] for _ in range(n)] for _ in range(m + 1)]
    pair_lists: list[list[list[list[float]]]] = [
        [[[] for _ in range(n)] for _ in range(n)] for _ in range(m + 1)]
    for (s0, states, _durs, _lp), w in zip(paths, weights):
        for ell in range(1, m + 1):
            psi_lists[ell][states[ell - 1]].append(w)
        for ell in range(2, m + 1):
            pair_lists[ell][states[ell - 2]][states[ell - 1]].append(w)

    psi = np.zeros((m + 1, n))
    psi_pairs = np.zeros((m + 1, n, n))
    for ell in range(1, m + 1):
        for s in range(n):
            psi[ell, s] = math.fsum(psi_lists[ell][s]) / z
    for ell in range(2, m + 1):
        for i in range(n):
            for j in range(n):
                psi_pairs[ell, i, j] = math.fsum(pair_lists[ell][i][j]) / z

    best = max(paths, key=lambda p: p[3])
    return PathEnumeration(
        paths=tuple(paths),
        log_evidence=log_evidence,
        psi=psi,
        psi_pairs=psi_pairs,
        map_states=best[1],
        map_durations=best[2],
        map_log_joint=best[3],
    )
