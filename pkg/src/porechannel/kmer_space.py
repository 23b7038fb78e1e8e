"""K-mer state spaces for the nanopore shift register.

A state is a string of ``tau`` bases over {A, C, G, T}. Feeding one base
into the pore drops the oldest base and appends the new one, so the set of
states with those shift transitions forms a de Bruijn-style directed graph.
Each state carries a mean measurement level f(s); edges whose level jump
|f(i) - f(j)| falls below a threshold can be pruned, and the surviving
strongly connected component with the largest entropy is used as the
working state space.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError, ModelIngestError, UndefinedEntropyError

BASES = ("A", "C", "G", "T")
_BASE_INDEX = {b: i for i, b in enumerate(BASES)}

POWER_ITER_TOL = 1e-10
POWER_ITER_MAX = 10**6


def kmer_index(kmer: str) -> int:
    """Canonical base-4 index of a k-mer under the order A < C < G < T."""
    idx = 0
    for b in kmer:
        idx = idx * 4 + _BASE_INDEX[b]
    return idx


def index_to_kmer(index: int, tau: int) -> str:
    out = []
    for _ in range(tau):
        out.append(BASES[index % 4])
        index //= 4
    return "".join(reversed(out))


def validate_kmer(kmer: str, tau: Optional[int] = None) -> str:
    if tau is not None and len(kmer) != tau:
        raise DataError(f"expected a {tau}-mer, got {kmer!r}")
    for b in kmer:
        if b not in _BASE_INDEX:
            raise DataError(f"invalid base {b!r} in k-mer {kmer!r}")
    return kmer


def shift_successor(state: str, base: str) -> str:
    """Drop the oldest base of ``state`` and append ``base``."""
    if base not in _BASE_INDEX:
        raise DataError(f"invalid base {base!r}")
    return state[1:] + base


@dataclass(frozen=True)
class CoverageReport:
    """Which k-mers a calibration run observed."""

    tau: int
    observed: int
    missing: tuple[str, ...]

    @property
    def total(self) -> int:
        return 4**self.tau

    @property
    def coverage(self) -> float:
        return self.observed / self.total

    @property
    def complete(self) -> bool:
        return not self.missing


@dataclass(frozen=True)
class ChannelMapping:
    """Mean measurement level (and optional per-state sd) for each k-mer."""

    tau: int
    levels: Mapping[str, float]
    sds: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        if self.tau < 1:
            raise DataError("tau must be >= 1")
        for kmer in self.levels:
            validate_kmer(kmer, self.tau)
        if self.sds is not None:
            for kmer, sd in self.sds.items():
                if sd <= 0:
                    raise DataError(f"non-positive sd for {kmer}")
        self._warn_on_collisions()

    def _warn_on_collisions(self):
        seen: dict[float, str] = {}
        for kmer in sorted(self.levels, key=kmer_index):
            lvl = self.levels[kmer]
            if lvl in seen:
                warnings.warn(
                    f"level collision: f({seen[lvl]}) == f({kmer}) == {lvl}",
                    stacklevel=3,
                )
            else:
                seen[lvl] = kmer

    @property
    def complete(self) -> bool:
        return len(self.levels) == 4**self.tau

    def level(self, kmer: str) -> float:
        try:
            return self.levels[kmer]
        except KeyError:
            raise ModelIngestError(f"no level for k-mer {kmer}") from None


@dataclass(frozen=True)
class StateGraph:
    """Directed labeled graph of k-mer states with measurement levels.

    Nodes are kept sorted by canonical k-mer index so that node indices are
    stable and deterministic. Every edge (i, j, b) satisfies
    ``kmers[j] == shift_successor(kmers[i], b)``.
    """

    tau: int
    kmers: tuple[str, ...]
    levels: tuple[float, ...]
    edges: tuple[tuple[int, int, str], ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(self.kmers)})

    @property
    def n(self) -> int:
        return len(self.kmers)

    def index(self, kmer: str) -> int:
        return self._index[kmer]

    def level_of(self, kmer: str) -> float:
        return self.levels[self.index(kmer)]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j, _ in self.edges:
            a[i, j] = 1.0
        return a

    def out_degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, _, _ in self.edges:
            deg[i] += 1
        return deg

    def successors(self, i: int) -> list[tuple[int, str]]:
        return [(j, b) for src, j, b in self.edges if src == i]

    def level_array(self) -> np.ndarray:
        return np.asarray(self.levels)


def _build_graph(tau: int, level_map: Mapping[str, float],
                 edge_kmers: Iterable[tuple[str, str, str]]) -> StateGraph:
    kmers = tuple(sorted(level_map, key=kmer_index))
    index = {k: i for i, k in enumerate(kmers)}
    levels = tuple(level_map[k] for k in kmers)
    edges = []
    for src, dst, b in edge_kmers:
        if shift_successor(src, b) != dst:
            raise DataError(f"edge ({src}, {dst}, {b}) violates the shift relation")
        edges.append((index[src], index[dst], b))
    edges.sort()
    return StateGraph(tau, kmers, levels, tuple(edges))


def full_graph(mapping: ChannelMapping) -> StateGraph:
    """Complete shift graph on all 4^tau states; out-degree 4 everywhere."""
    tau = mapping.tau
    level_map = {}
    edge_kmers = []
    for idx in range(4**tau):
        kmer = index_to_kmer(idx, tau)
        level_map[kmer] = mapping.level(kmer)
    for kmer in level_map:
        for b in BASES:
            edge_kmers.append((kmer, shift_successor(kmer, b), b))
    return _build_graph(tau, level_map, edge_kmers)


def induced_graph(mapping: ChannelMapping) -> StateGraph:
    """Shift graph induced on the k-mers present in a (possibly partial) table."""
    level_map = dict(mapping.levels)
    edge_kmers = []
    for kmer in level_map:
        for b in BASES:
            succ = shift_successor(kmer, b)
            if succ in level_map:
                edge_kmers.append((kmer, succ, b))
    return _build_graph(mapping.tau, level_map, edge_kmers)


def de_bruijn_sequence(tau: int, alphabet: Sequence[str] = BASES) -> str:
    """Cyclic sequence of length 4^tau covering every tau-mer exactly once.

    Uses the Lyndon-word concatenation construction; the ``alphabet`` order
    is the deterministic choice rule.
    """
    if tau < 1:
        raise DataError("tau must be >= 1")
    k = len(alphabet)
    a = [0] * (k * tau)
    out: list[int] = []

    def db(t: int, p: int):
        if t > tau:
            if tau % p == 0:
                out.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, k):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return "".join(alphabet[i] for i in out)


def calibrate_mapping(records: Iterable[tuple[str, Sequence[float]]],
                      tau: int) -> tuple[ChannelMapping, CoverageReport]:
    """Average per-window levels over identical k-mers across all records.

    Each record pairs a base sequence with one level per k-mer window, i.e.
    len(levels) == len(sequence) - tau + 1. K-mers never observed are listed
    in the coverage report and the returned mapping is partial.
    """
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for seq, xs in records:
        validate_kmer(seq)
        if len(xs) != len(seq) - tau + 1:
            raise DataError(
                f"record has {len(xs)} levels for {len(seq) - tau + 1} windows")
        for pos, x in enumerate(xs):
            kmer = seq[pos:pos + tau]
            sums[kmer] = sums.get(kmer, 0.0) + float(x)
            counts[kmer] = counts.get(kmer, 0) + 1
    levels = {kmer: sums[kmer] / counts[kmer] for kmer in sums}
    missing = tuple(
        index_to_kmer(i, tau) for i in range(4**tau)
        if index_to_kmer(i, tau) not in levels
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mapping = ChannelMapping(tau, levels)
    return mapping, CoverageReport(tau, observed=len(levels), missing=missing)


def jump_constrained_reduce(g: StateGraph, j_min: float) -> StateGraph:
    """Keep only edges whose jumping distance |f(i) - f(j)| is >= j_min."""
    kept = tuple(
        (i, j, b) for i, j, b in g.edges
        if abs(g.levels[i] - g.levels[j]) >= j_min
    )
    return StateGraph(g.tau, g.kmers, g.levels, kept)


def strongly_connected_components(g: StateGraph) -> list[StateGraph]:
    """Tarjan SCCs as subgraphs, ordered by smallest contained node index."""
    n = g.n
    succ: list[list[int]] = [[] for _ in range(n)]
    for i, j, _ in g.edges:
        succ[i].append(j)

    index_of = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index_of[root] != -1:
            continue
        # iterative Tarjan: (node, iterator position)
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index_of[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for pos in range(pi, len(succ[v])):
                w = succ[v][pos]
                if index_of[w] == -1:
                    work[-1] = (v, pos + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index_of[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                lowlink[u] = min(lowlink[u], lowlink[v])
            if lowlink[v] == index_of[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)

    comps.sort(key=min)
    out = []
    for comp in comps:
        members = set(comp)
        level_map = {g.kmers[i]: g.levels[i] for i in comp}
        edge_kmers = [
            (g.kmers[i], g.kmers[j], b) for i, j, b in g.edges
            if i in members and j in members
        ]
        out.append(_build_graph(g.tau, level_map, edge_kmers))
    return out


def _perron_pair(g: StateGraph) -> tuple[float, np.ndarray]:
    """Perron root and right Perron vector of the adjacency matrix.

    Power iteration on A + I (same eigenvectors, spectrum shifted by one),
    which is primitive for any graph with at least one edge per SCC, so the
    iteration converges even for periodic graphs.
    """
    if g.n == 0 or not g.edges:
        raise UndefinedEntropyError("entropy undefined: graph has no edges")
    a = g.adjacency() + np.eye(g.n)
    v = np.full(g.n, 1.0 / g.n)
    lam = 0.0
    for _ in range(POWER_ITER_MAX):
        w = a @ v
        lam = float(w.sum())
        v_new = w / lam
        if np.max(np.abs(a @ v_new - lam * v_new)) <= POWER_ITER_TOL * lam:
            v = v_new
            break
        v = v_new
    else:
        raise UndefinedEntropyError("Perron iteration did not converge")
    return lam - 1.0, v


def perron_entropy(g: StateGraph) -> float:
    """log2 of the adjacency spectral radius, in bits per base."""
    lam, _ = _perron_pair(g)
    if lam <= 0:
        raise UndefinedEntropyError("entropy undefined: spectral radius is zero")
    return float(np.log2(lam))


def max_entropy_component(components: Sequence[StateGraph]) -> StateGraph:
    """The component with largest Perron entropy.

    Edgeless components are skipped; ties go to the component containing the
    smallest node index (the input order from strongly_connected_components).
    """
    if not components:
        raise UndefinedEntropyError("no components given")
    best = None
    best_h = -np.inf
    for comp in components:
        if not comp.edges:
            continue
        h = perron_entropy(comp)
        if h > best_h + 1e-12:
            best, best_h = comp, h
    if best is None:
        raise UndefinedEntropyError(
            "no component with positive entropy (all components are edgeless)")
    return best


def load_kmer_table(path) -> ChannelMapping:
    """Ingest a TSV pore-model table: kmer, level_mean[, level_stdv]."""
    levels: dict[str, float] = {}
    sds: dict[str, float] = {}
    tau = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ModelIngestError(f"cannot read k-mer table: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if lineno == 1 and parts[0].lower() == "kmer":
                continue
            if len(parts) < 2:
                raise ModelIngestError(f"{path}:{lineno}: expected >= 2 columns")
            kmer = parts[0].upper()
            try:
                validate_kmer(kmer)
            except DataError as exc:
                raise ModelIngestError(f"{path}:{lineno}: {exc}") from None
            if tau is None:
                tau = len(kmer)
            elif len(kmer) != tau:
                raise ModelIngestError(
                    f"{path}:{lineno}: k-mer length {len(kmer)} != {tau}")
            if kmer in levels:
                raise ModelIngestError(f"{path}:{lineno}: duplicate k-mer {kmer}")
            try:
                levels[kmer] = float(parts[1])
                if len(parts) >= 3 and parts[2]:
                    sds[kmer] = float(parts[2])
            except ValueError:
                raise ModelIngestError(f"{path}:{lineno}: bad numeric field") from None
    if tau is None:
        raise ModelIngestError(f"{path}: empty k-mer table")
    return ChannelMapping(tau, levels, sds or None)


def write_edge_list(g: StateGraph, path) -> None:
    """Export edges as CSV: src_kmer, dst_kmer, input_base, levels, jump."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["src_kmer", "dst_kmer", "input_base", "src_level", "dst_level", "jump"])
        for i, j, b in g.edges:
            writer.writerow([
                g.kmers[i], g.kmers[j], b,
                format(g.levels[i], ".17g"),
                format(g.levels[j], ".17g"),
                format(abs(g.levels[i] - g.levels[j]), ".17g"),
            ])
