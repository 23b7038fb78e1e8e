"""Markov sources on a state graph, dwell-time models, semi-Markov kernels."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .kmer_space import StateGraph, _perron_pair

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 10**6
ROW_SUM_TOL = 1e-12


def stationary_distribution(trans: np.ndarray,
                            tol: float = STATIONARY_TOL) -> np.ndarray:
    """Fixed point mu of mu @ P = mu, by power iteration from the uniform vector.

    Iterates the lazy kernel (P + I)/2, which shares P's stationary
    distributions but is aperiodic, so the iteration converges for any
    irreducible P. The residual is checked against P itself.
    """
    n = trans.shape[0]
    mu = np.full(n, 1.0 / n)
    for _ in range(STATIONARY_MAX_ITER):
        nxt = 0.5 * (mu @ trans + mu)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt @ trans - nxt)) <= tol:
            return nxt
        mu = nxt
    raise DataError("stationary distribution iteration did not converge")


@dataclass(frozen=True)
class MarkovSource:
    """Row-stochastic kernel on a StateGraph with initial and stationary laws."""

    graph: StateGraph
    trans: np.ndarray
    mu0: np.ndarray
    mu: np.ndarray
    kernel_id: str = "custom"

    def __post_init__(self):
        for arr in (self.trans, self.mu0, self.mu):
            arr.setflags(write=False)

    def entropy_rate(self) -> float:
        """Sum_ij mu(i) P(i,j) log2(1/P(i,j)) in bits per base."""
        p = self.trans
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log2(p), 0.0)
        return float(-(self.mu @ plogp.sum(axis=1)))


def _validate_source(graph: StateGraph, trans: np.ndarray) -> None:
    n = graph.n
    if trans.shape != (n, n):
        raise DataError(f"kernel shape {trans.shape} does not match {n} states")
    adj = graph.adjacency()
    if np.any((trans > 0) & (adj == 0)):
        raise DataError("kernel puts probability on non-edges")
    rows = trans.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
        raise DataError(f"kernel rows do not sum to 1 (max dev {np.max(np.abs(rows - 1)):.3g})")


def markov_source(graph: StateGraph, trans: np.ndarray,
                  mu0: Optional[np.ndarray] = None,
                  kernel_id: str = "custom") -> MarkovSource:
    """Build a MarkovSource, computing mu by power iteration.

    mu0 defaults to the stationary distribution.
    """
    trans = np.asarray(trans, dtype=float).copy()
    _validate_source(graph, trans)
    mu = stationary_distribution(trans)
    if mu0 is None:
        mu0 = mu.copy()
    else:
        mu0 = np.asarray(mu0, dtype=float).copy()
        if mu0.shape != (graph.n,) or abs(mu0.sum() - 1.0) > 1e-9 or np.any(mu0 < 0):
            raise DataError("mu0 is not a probability vector over the nodes")
    return MarkovSource(graph, trans, mu0, mu, kernel_id)


def uniform_kernel(g: StateGraph) -> MarkovSource:
    """P(i, j) = 1/outdeg(i) on every edge."""
    deg = g.out_degree()
    if np.any(deg == 0):
        bad = g.kmers[int(np.argmin(deg))]
        raise DataError(f"node {bad} has out-degree 0")
    trans = g.adjacency() / deg[:, None]
    return markov_source(g, trans, kernel_id="uniform")


def parry_kernel(g: StateGraph) -> MarkovSource:
    """Maxentropic kernel: P(i,j) = A(i,j) v(j) / (lambda v(i)).

    lambda and v are the Perron root and right Perron vector of the
    adjacency matrix; the entropy rate of the result equals the graph's
    Perron entropy. Requires a strongly connected graph.
    """
    lam, v = _perron_pair(g)
    if lam <= 0 or np.any(v <= 0):
        raise DataError("Parry kernel requires a strongly connected graph")
    trans = g.adjacency() * v[None, :] / (lam * v[:, None])
    trans /= trans.sum(axis=1, keepdims=True)
    return markov_source(g, trans, kernel_id="parry")


def entropy_rate(src: MarkovSource) -> float:
    return src.entropy_rate()


@dataclass(frozen=True)
class DurationModel:
    """Dwell-time distribution on a finite support of positive sample counts."""

    support: tuple[int, ...]
    pmf: tuple[float, ...]

    def __post_init__(self):
        if not self.support:
            raise DataError("duration support is empty")
        if list(self.support) != sorted(set(self.support)):
            raise DataError("duration support must be strictly increasing")
        if min(self.support) < 1:
            raise DataError("durations must be positive (no deletions)")
        if len(self.pmf) != len(self.support):
            raise DataError("pmf length does not match support")
        if any(p < 0 for p in self.pmf) or abs(sum(self.pmf) - 1.0) > 1e-12:
            raise DataError("duration pmf is not a probability vector")

    @classmethod
    def uniform(cls, values: Sequence[int]) -> "DurationModel":
        values = tuple(sorted(set(int(v) for v in values)))
        return cls(values, tuple(1.0 / len(values) for _ in values))

    def prob(self, k: int) -> float:
        try:
            return self.pmf[self.support.index(k)]
        except ValueError:
            return 0.0

    def mean(self) -> float:
        return float(sum(k * p for k, p in zip(self.support, self.pmf)))

    @property
    def k_min(self) -> int:
        return self.support[0]

    @property
    def k_max(self) -> int:
        return self.support[-1]


@dataclass(frozen=True)
class SemiMarkovKernel:
    """Q(i, j, k) = P(i, j) * pmf(k): one jump of the Markov renewal process."""

    source: MarkovSource
    duration: DurationModel

    def q(self, i: int, j: int, k: int) -> float:
        return float(self.source.trans[i, j]) * self.duration.prob(k)


def semi_markov_q(smk: SemiMarkovKernel, i: int, j: int, k: int) -> float:
    return smk.q(i, j, k)


def save_kernel_csv(src: MarkovSource, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src_kmer", "dst_kmer", "prob"])
        g = src.graph
        for i, j, _ in g.edges:
            writer.writerow([g.kmers[i], g.kmers[j], format(src.trans[i, j], ".17g")])


def load_kernel_csv(graph: StateGraph, path,
                    mu0: Optional[np.ndarray] = None) -> MarkovSource:
    trans = np.zeros((graph.n, graph.n))
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            i = graph.index(row["src_kmer"])
            j = graph.index(row["dst_kmer"])
            trans[i, j] = float(row["prob"])
    return markov_source(graph, trans, mu0=mu0)
