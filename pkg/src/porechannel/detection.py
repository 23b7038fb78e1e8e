"""Generalized forward-backward and Viterbi detection for duplicated k-mer traces.

The hidden process is a Markov chain of m shift-register states, each held
for a dwell of K in Lambda samples; observations are T_m noisy samples with
T_m known at the decoder. Lattices are indexed by (segment l, end sample t,
state s) in the log domain, restricted to the feasible band of t values that
a length-m segmentation of T_m samples allows. Within segment likelihoods,
per-state prefix sums of emission log-densities make each gamma evaluation
O(1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, InfeasibleTraceError
from .kmer_space import ChannelMapping
from .source import DurationModel, MarkovSource

NEG_INF = -np.inf


def feasible_band(ell: int, m: int, t_m: int,
                  support: Sequence[int]) -> tuple[int, int]:
    """Inclusive range of end times t for segment ell, given m and T_m."""
    k_min, k_max = min(support), max(support)
    lo = max(ell * k_min, t_m - (m - ell) * k_max)
    hi = min(ell * k_max, t_m - (m - ell) * k_min)
    if lo > hi:
        raise InfeasibleTraceError(
            f"no feasible end time for segment {ell} (m={m}, T_m={t_m})")
    return lo, hi


@dataclass
class SegmentLikelihood:
    """Log segment likelihoods gamma for one observation sequence.

    log gamma_{t'+1}^{t}(i, j) = log Q(i, j, t-t') + sum of emission
    log-densities of y_{t'+1..t} under state j. Finite only when (i, j) is
    an edge and (t - t') is a supported dwell.
    """

    source: MarkovSource
    duration: DurationModel
    y: np.ndarray
    log_trans: np.ndarray
    cum_emit: np.ndarray  # (T+1, n); cum_emit[t, s] = sum_{r<=t} log p(y_r | s)

    @classmethod
    def build(cls, source: MarkovSource, duration: DurationModel, sigma: float,
              y: np.ndarray, mapping: Optional[ChannelMapping] = None,
              ) -> "SegmentLikelihood":
        from .channel import gaussian_log_density  # avoid import cycle

        g = source.graph
        y = np.asarray(y, dtype=float)
        levels = (np.array([mapping.level(k) for k in g.kmers])
                  if mapping is not None else g.level_array())
        z = (y[:, None] - levels[None, :]) / sigma
        emit = -0.5 * (z * z + np.log(2.0 * np.pi)) - np.log(sigma)
        # accumulate in extended precision: the recursions take differences
        # of prefix sums, so each stored prefix must be correctly rounded
        cum = np.zeros((y.size + 1, g.n))
        cum[1:] = np.cumsum(emit.astype(np.longdouble), axis=0)
        with np.errstate(divide="ignore"):
            log_trans = np.where(source.trans > 0, np.log(source.trans), NEG_INF)
        # keep the scalar helper honest against the vectorized table
        assert g.n == 0 or y.size == 0 or np.isclose(
            emit[0, 0], gaussian_log_density(float(y[0]), float(levels[0]), sigma))
        return cls(source, duration, y, log_trans, cum)

    @property
    def n(self) -> int:
        return self.source.graph.n

    @property
    def t_m(self) -> int:
        return int(self.y.size)

    def log_gamma(self, i: int, j: int, t0: int, t1: int) -> float:
        k = t1 - t0
        pk = self.duration.prob(k)
        if pk <= 0 or not np.isfinite(self.log_trans[i, j]):
            return NEG_INF
        return float(self.log_trans[i, j] + np.log(pk)
                     + self.cum_emit[t1, j] - self.cum_emit[t0, j])


@dataclass
class ForwardLattice:
    log_alpha: np.ndarray  # (m+1, T+1, n); row 0 holds the S_0 prior at t=0
    bands: list[tuple[int, int]]
    m: int
    t_m: int
    ops: int


@dataclass
class BackwardLattice:
    log_beta: np.ndarray
    bands: list[tuple[int, int]]
    m: int
    t_m: int
    ops: int


@dataclass
class PosteriorSet:
    """Per-segment posteriors psi_l(s), pair posteriors psi_l(s', s), evidence.

    psi is indexed [l, s] for l in 1..m (row 0 unused); psi_pairs is indexed
    [l, s_prev, s] for l in 2..m (rows 0..1 unused).
    """

    psi: np.ndarray
    psi_pairs: np.ndarray
    log_evidence: float
    m: int


@dataclass
class ViterbiResult:
    states: tuple[str, ...]
    durations: tuple[int, ...]
    jump_times: tuple[int, ...]
    log_score: float
    ops: int


def _log_mu(mu0: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(mu0 > 0, np.log(mu0), NEG_INF)


def _all_bands(m: int, t_m: int, support: Sequence[int]) -> list[tuple[int, int]]:
    # band(0) degenerates to {0} whenever the instance is feasible at all
    return [feasible_band(ell, m, t_m, support) for ell in range(m + 1)]


def point_mass(graph, kmer: str) -> np.ndarray:
    mu0 = np.zeros(graph.n)
    mu0[graph.index(kmer)] = 1.0
    return mu0


def forward(sl: SegmentLikelihood, mu0: np.ndarray, m: int,
            prune_delta: Optional[float] = None) -> ForwardLattice:
    """Log forward lattice: alpha_{l,t}(s) = P(Y_1^t, S_l = s, T_l = t)."""
    t_m, n = sl.t_m, sl.n
    support = sl.duration.support
    log_pmf = np.log(np.asarray(sl.duration.pmf))
    bands = _all_bands(m, t_m, support)
    la = np.full((m + 1, t_m + 1, n), NEG_INF)
    la[0, 0] = _log_mu(mu0)
    n_edges = len(sl.source.graph.edges)
    ops = 0
    c = sl.cum_emit
    for ell in range(1, m + 1):
        lo, hi = bands[ell]
        plo, phi = bands[ell - 1]
        prev = la[ell - 1, plo:phi + 1]  # (Bp, n)
        with np.errstate(invalid="ignore"):
            u = logsumexp(prev[:, :, None] + sl.log_trans[None, :, :], axis=1)
        u = u - c[plo:phi + 1]
        width = hi - lo + 1
        cand = np.full((len(support), width, n), NEG_INF)
        for kidx, k in enumerate(support):
            t0 = max(lo, plo + k)
            t1 = min(hi, phi + k)
            if t0 > t1:
                continue
            cand[kidx, t0 - lo:t1 - lo + 1] = (
                u[t0 - k - plo:t1 - k - plo + 1] + log_pmf[kidx])
        with np.errstate(invalid="ignore"):
            la[ell, lo:hi + 1] = c[lo:hi + 1] + logsumexp(cand, axis=0)
        if prune_delta is not None:
            row = la[ell, lo:hi + 1]
            mx = row.max()
            if np.isfinite(mx):
                row[row < mx - prune_delta] = NEG_INF
        ops += width * len(support) * n_edges
    if not np.isfinite(la[m, t_m]).any():
        raise InfeasibleTraceError("observation admits no consistent path")
    return ForwardLattice(la, bands, m, t_m, ops)


def backward(sl: SegmentLikelihood, m: int,
             prune_delta: Optional[float] = None) -> BackwardLattice:
    """Log backward lattice: beta_{l,t}(s) = P(Y_{t+1}^{T_m} | S_l = s, T_l = t)."""
    t_m, n = sl.t_m, sl.n
    support = sl.duration.support
    log_pmf = np.log(np.asarray(sl.duration.pmf))
    bands = _all_bands(m, t_m, support)
    lb = np.full((m + 1, t_m + 1, n), NEG_INF)
    lb[m, t_m] = 0.0
    n_edges = len(sl.source.graph.edges)
    ops = 0
    c = sl.cum_emit
    for ell in range(m - 1, -1, -1):
        lo, hi = bands[ell]
        nlo, nhi = bands[ell + 1]
        w = lb[ell + 1, nlo:nhi + 1] + c[nlo:nhi + 1]  # (Bn, n)
        width = hi - lo + 1
        cand = np.full((len(support), width, n), NEG_INF)
        for kidx, k in enumerate(support):
            t0 = max(lo, nlo - k)
            t1 = min(hi, nhi - k)
            if t0 > t1:
                continue
            cand[kidx, t0 - lo:t1 - lo + 1] = (
                w[t0 + k - nlo:t1 + k - nlo + 1] + log_pmf[kidx])
        with np.errstate(invalid="ignore"):
            v = logsumexp(cand, axis=0)  # (B, n_dst)
            x = v - c[lo:hi + 1]
            lb[ell, lo:hi + 1] = logsumexp(
                sl.log_trans[None, :, :] + x[:, None, :], axis=2)
        if prune_delta is not None:
            row = lb[ell, lo:hi + 1]
            mx = row.max()
            if np.isfinite(mx):
                row[row < mx - prune_delta] = NEG_INF
        ops += width * len(support) * n_edges
    return BackwardLattice(lb, bands, m, t_m, ops)


def posteriors(fl: ForwardLattice, bl: BackwardLattice,
               sl: SegmentLikelihood) -> PosteriorSet:
    """Segment and pair posteriors plus the total observation log-likelihood."""
    if fl.m != bl.m or fl.t_m != bl.t_m:
        raise DataError("forward and backward lattices disagree on (m, T_m)")
    m, t_m, n = fl.m, fl.t_m, sl.n
    la, lb, bands = fl.log_alpha, bl.log_beta, fl.bands
    log_z = float(logsumexp(la[m, t_m]))
    if not np.isfinite(log_z):
        raise InfeasibleTraceError("zero evidence: observation inconsistent")

    psi = np.zeros((m + 1, n))
    for ell in range(1, m + 1):
        lo, hi = bands[ell]
        with np.errstate(invalid="ignore"):
            lp = logsumexp(la[ell, lo:hi + 1] + lb[ell, lo:hi + 1], axis=0)
        psi[ell] = np.exp(lp - log_z)

    support = sl.duration.support
    log_pmf = np.log(np.asarray(sl.duration.pmf))
    c = sl.cum_emit
    pairs = np.zeros((m + 1, n, n))
    for ell in range(2, m + 1):
        plo, phi = bands[ell - 1]
        lo, hi = bands[ell]
        a = la[ell - 1, plo:phi + 1]  # (Bp, n_src)
        width = phi - plo + 1
        d = np.full((len(support), width, n), NEG_INF)
        for kidx, k in enumerate(support):
            t0 = max(plo, lo - k)
            t1 = min(phi, hi - k)
            if t0 > t1:
                continue
            d[kidx, t0 - plo:t1 - plo + 1] = (
                log_pmf[kidx]
                + c[t0 + k:t1 + k + 1]
                + lb[ell, t0 + k:t1 + k + 1])
        with np.errstate(invalid="ignore"):
            e = logsumexp(d, axis=0) - c[plo:phi + 1]  # (Bp, n_dst)
        amax = a.max(axis=0)
        emax = e.max(axis=0)
        ashift = np.where(np.isfinite(amax), amax, 0.0)
        eshift = np.where(np.isfinite(emax), emax, 0.0)
        aexp = np.exp(a - ashift)
        eexp = np.exp(e - eshift)
        inner = aexp.T @ eexp  # (n_src, n_dst)
        with np.errstate(divide="ignore", invalid="ignore"):
            pair_log = (sl.log_trans + np.log(inner)
                        + ashift[:, None] + eshift[None, :])
        pairs[ell] = np.where(np.isfinite(pair_log), np.exp(pair_log - log_z), 0.0)

    return PosteriorSet(psi, pairs, log_z, m)


def viterbi(sl: SegmentLikelihood, mu0: np.ndarray, m: int) -> ViterbiResult:
    """Jointly MAP (states, jump times) with t_m = T_m.

    Ties are broken toward the smaller previous jump time t' (i.e. the
    longer dwell), then the smaller previous state index.
    """
    t_m, n = sl.t_m, sl.n
    ks = np.array(sorted(sl.duration.support, reverse=True))
    log_pmf = np.array([np.log(sl.duration.prob(int(k))) for k in ks])
    bands = _all_bands(m, t_m, sl.duration.support)
    val = np.full((m + 1, t_m + 1, n), NEG_INF)
    val[0, 0] = _log_mu(mu0)
    back_k = np.zeros((m + 1, t_m + 1, n), dtype=np.int32)
    back_s = np.zeros((m + 1, t_m + 1, n), dtype=np.int32)
    n_edges = len(sl.source.graph.edges)
    ops = 0
    c = sl.cum_emit
    for ell in range(1, m + 1):
        lo, hi = bands[ell]
        plo, phi = bands[ell - 1]
        width = hi - lo + 1
        # candidate axis ordered (k desc, s' asc) so argmax tie-breaking
        # prefers smaller t' then smaller source state
        cand = np.full((len(ks) * n, width, n), NEG_INF)
        for kidx, k in enumerate(ks):
            t0 = max(lo, plo + int(k))
            t1 = min(hi, phi + int(k))
            if t0 > t1:
                continue
            prev = val[ell - 1, t0 - int(k):t1 - int(k) + 1]  # (w, n_src)
            # segment emissions are C[t, s] - C[t-k, s] with s the new state
            block = (prev[:, :, None] + sl.log_trans[None, :, :] + log_pmf[kidx]
                     - c[t0 - int(k):t1 - int(k) + 1][:, None, :])
            cand[kidx * n:(kidx + 1) * n, t0 - lo:t1 - lo + 1] = (
                block.transpose(1, 0, 2))
        best = np.argmax(cand, axis=0)  # (width, n)
        bestval = np.take_along_axis(cand, best[None], axis=0)[0]
        val[ell, lo:hi + 1] = c[lo:hi + 1] + bestval
        back_k[ell, lo:hi + 1] = ks[best // n]
        back_s[ell, lo:hi + 1] = best % n
        ops += width * len(ks) * n_edges

    if not np.isfinite(val[m, t_m]).any():
        raise InfeasibleTraceError("observation admits no consistent path")
    s = int(np.argmax(val[m, t_m]))
    score = float(val[m, t_m, s])
    t = t_m
    rev_states: list[int] = []
    rev_durs: list[int] = []
    for ell in range(m, 0, -1):
        rev_states.append(s)
        k = int(back_k[ell, t, s])
        s = int(back_s[ell, t, s])
        rev_durs.append(k)
        t -= k
    g = sl.source.graph
    states = tuple(g.kmers[i] for i in reversed(rev_states))
    durations = tuple(reversed(rev_durs))
    jump_times, t = [], 0
    for k in durations:
        t += k
        jump_times.append(t)
    return ViterbiResult(states, durations, tuple(jump_times), score, ops)


def path_log_score(sl: SegmentLikelihood, mu0: np.ndarray,
                   states: Sequence[str], durations: Sequence[int]) -> float:
    """Re-evaluate the Viterbi objective (mu0 weight times product of gammas)."""
    g = sl.source.graph
    idx = [g.index(s) for s in states]
    lm = _log_mu(mu0)
    best = NEG_INF
    for s0 in range(g.n):
        if not np.isfinite(lm[s0]):
            continue
        total = float(lm[s0])
        t = 0
        prev = s0
        for s, k in zip(idx, durations):
            total += sl.log_gamma(prev, s, t, t + k)
            t += k
            prev = s
        best = max(best, total)
    return best
