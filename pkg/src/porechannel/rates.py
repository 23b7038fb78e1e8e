"""Achievable information rate estimation from simulated blocks.

The mutual information rate splits into the source entropy rate minus the
average conditional entropy of each state given its predecessor and the
whole observation. The second term is estimated from forward-backward
posteriors through per-edge T-value accumulators: summing the accumulated
edge statistics against mu(i) P(i, j) telescopes to exactly minus that
conditional-entropy average, so

    rate = sum_ij mu P log2(1/P) + sum_ij mu P T_hat(i, j).

Blocks are simulated independently; the decoder of each block knows its m,
T_m, and initial state, and across-block variation gives a standard error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import NoiseModel, simulate
from .detection import (PosteriorSet, SegmentLikelihood, backward, forward,
                        point_mass, posteriors)
from .errors import ConfigError, ModelMismatchError
from .kmer_space import ChannelMapping
from .source import DurationModel, MarkovSource

PAIR_LEAK_TOL = 1e-12


def _xlog2x(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(p), 0.0)


@dataclass
class TValueAccumulator:
    """Running per-edge sums of the T-value estimator terms."""

    mu: np.ndarray
    trans: np.ndarray
    edge_sums: np.ndarray = field(init=False)
    segments: int = 0
    block_t_terms: list = field(default_factory=list)

    def __post_init__(self):
        self.edge_sums = np.zeros_like(self.trans)


def accumulate_t_values(acc: TValueAccumulator, post: PosteriorSet,
                        mu: np.ndarray, trans: np.ndarray) -> TValueAccumulator:
    """Add one block's contributions for segments l = 2..m.

    Per edge (i, j) and segment l the term is
    (psi_l(i,j) / (mu(i) P(i,j))) log2 psi_l(i,j)
      - (psi_{l-1}(i) / mu(i)) log2 psi_{l-1}(i),
    with 0 log 0 = 0. Segment l = 1 is skipped (no predecessor posterior).
    """
    m = post.m
    if m < 2:
        raise ConfigError("need at least 2 segments to accumulate T-values")
    edge_mask = trans > 0
    pairs = post.psi_pairs[2:m + 1]  # (m-1, n, n)
    if np.any(pairs[:, ~edge_mask] > PAIR_LEAK_TOL):
        raise ModelMismatchError(
            "posterior mass on transitions with zero kernel probability")
    prev = post.psi[1:m]  # (m-1, n)

    mup = mu[:, None] * trans
    denom = np.where(edge_mask, mup, 1.0)
    term1 = (_xlog2x(pairs) / denom).sum(axis=0)
    term2 = (_xlog2x(prev) / mu).sum(axis=0)  # (n,)
    contrib = np.where(edge_mask, term1 - term2[:, None], 0.0)

    acc.edge_sums += contrib
    acc.segments += m - 1
    acc.block_t_terms.append(float((mup * contrib).sum() / (m - 1)))
    return acc


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    entropy_term: float
    t_term: float
    m_total: int
    blocks: int
    stderr: float


def achievable_rate(acc: TValueAccumulator) -> RateEstimate:
    """Combine the closed-form entropy term with the averaged T-values."""
    if acc.segments == 0:
        raise ConfigError("accumulator is empty")
    trans = acc.trans
    entropy = float(-(acc.mu[:, None] * _xlog2x(trans)).sum())
    t_hat = acc.edge_sums / acc.segments
    t_term = float((acc.mu[:, None] * trans * t_hat).sum())
    blocks = len(acc.block_t_terms)
    if blocks > 1:
        stderr = float(np.std(acc.block_t_terms, ddof=1) / np.sqrt(blocks))
    else:
        stderr = 0.0
    return RateEstimate(
        rate=entropy + t_term,
        entropy_term=entropy,
        t_term=t_term,
        m_total=acc.segments,
        blocks=blocks,
        stderr=stderr,
    )


def mean_conditional_entropy(post: PosteriorSet) -> float:
    """Average over l = 2..m of H(S_l | S_{l-1}, Y) from the posteriors, in bits."""
    m = post.m
    h = 0.0
    for ell in range(2, m + 1):
        h += float(-_xlog2x(post.psi_pairs[ell]).sum()
                   + _xlog2x(post.psi[ell - 1]).sum())
    return h / (m - 1)


def monte_carlo_rate(src: MarkovSource, dur: DurationModel, noise: NoiseModel,
                     mapping: Optional[ChannelMapping], m_total: int,
                     block_len: int, seed: int,
                     prune_delta: Optional[float] = None) -> RateEstimate:
    """Simulate independent blocks, run forward-backward, average T-values.

    Each block's decoder is given (m, T_m, S_0); blocks use independent RNG
    streams derived from (seed, block index), so results do not depend on
    any parallel scheduling of blocks.
    """
    if block_len < 20:
        raise ConfigError("block_len must be >= 20")
    if m_total % block_len != 0:
        raise ConfigError("m_total must be a multiple of block_len")
    blocks = m_total // block_len
    acc = TValueAccumulator(src.mu, src.trans)
    for b in range(blocks):
        trace = simulate(src, dur, noise, mapping, block_len, seed, trace_index=b)
        sl = SegmentLikelihood.build(src, dur, noise.sigma, trace.samples, mapping)
        mu0 = point_mass(src.graph, trace.s0)
        fl = forward(sl, mu0, block_len, prune_delta=prune_delta)
        bl = backward(sl, block_len, prune_delta=prune_delta)
        post = posteriors(fl, bl, sl)
        accumulate_t_values(acc, post, src.mu, src.trans)
    return achievable_rate(acc)
