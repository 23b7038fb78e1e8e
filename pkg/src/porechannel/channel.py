"""Simulation of the duplicating, noisy k-mer channel.

One channel use emits a state S_l (a shift-register move), holds it for a
random dwell of K_l samples, and each sample is the state's level plus
i.i.d. Gaussian noise. Traces are reproducible: the RNG algorithm, master
seed, and per-trace stream index are recorded in the trace itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .kmer_space import ChannelMapping
from .source import DurationModel, MarkovSource

RNG_ALGORITHM = "numpy-pcg64/seedseq-v1"

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian measurement noise; constant sigma or per-state sds."""

    sigma: float
    per_state: Optional[dict] = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise DataError("sigma must be positive")
        if self.per_state is not None and any(v <= 0 for v in self.per_state.values()):
            raise DataError("per-state sds must be positive")

    def sd_for(self, kmer: str) -> float:
        if self.per_state is None:
            return self.sigma
        try:
            return self.per_state[kmer]
        except KeyError:
            raise DataError(f"no sd for state {kmer}") from None


def gaussian_log_density(y: float, mean: float, sd: float) -> float:
    z = (y - mean) / sd
    return -0.5 * (z * z + _LOG_2PI) - math.log(sd)


def emission_log_density(noise: NoiseModel, mapping: ChannelMapping,
                         kmer: str, y: float) -> float:
    """Natural-log Gaussian density of a sample given the hidden state."""
    return gaussian_log_density(y, mapping.level(kmer), noise.sd_for(kmer))


@dataclass(frozen=True)
class SeedInfo:
    algorithm: str
    master_seed: int
    trace_index: int


@dataclass(frozen=True)
class ChannelTrace:
    """One simulated realization: states, dwell times, and noisy samples."""

    s0: str
    states: tuple[str, ...]
    durations: tuple[int, ...]
    samples: np.ndarray
    seed: SeedInfo
    lambda_support: tuple[int, ...]
    sigma: float
    kernel_id: str
    tau: int

    def __post_init__(self):
        self.samples.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.states)

    @property
    def jump_times(self) -> tuple[int, ...]:
        out, t = [], 0
        for k in self.durations:
            t += k
            out.append(t)
        return tuple(out)

    @property
    def t_m(self) -> int:
        return sum(self.durations)


def trace_rng(seed: int, trace_index: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for one trace of a Monte Carlo run."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trace_index,))
    return np.random.Generator(np.random.PCG64(ss))


def simulate(src: MarkovSource, dur: DurationModel, noise: NoiseModel,
             mapping: Optional[ChannelMapping], m: int, seed: int,
             trace_index: int = 0) -> ChannelTrace:
    """Simulate m channel uses; deterministic for a fixed (seed, trace_index).

    Levels come from ``mapping`` when given, else from the source's graph.
    """
    if m < 1:
        raise DataError("m must be >= 1")
    if noise.per_state is not None:
        raise DataError("per-state sds are not supported in simulation yet")
    g = src.graph
    rng = trace_rng(seed, trace_index)
    levels = (np.array([mapping.level(k) for k in g.kmers])
              if mapping is not None else g.level_array())

    state_idx = np.empty(m + 1, dtype=int)
    state_idx[0] = rng.choice(g.n, p=src.mu0)
    for ell in range(1, m + 1):
        state_idx[ell] = rng.choice(g.n, p=src.trans[state_idx[ell - 1]])
    durations = rng.choice(np.asarray(dur.support), p=np.asarray(dur.pmf), size=m)

    z_levels = np.repeat(levels[state_idx[1:]], durations)
    samples = z_levels + noise.sigma * rng.standard_normal(z_levels.size)

    return ChannelTrace(
        s0=g.kmers[state_idx[0]],
        states=tuple(g.kmers[i] for i in state_idx[1:]),
        durations=tuple(int(k) for k in durations),
        samples=samples,
        seed=SeedInfo(RNG_ALGORITHM, seed, trace_index),
        lambda_support=dur.support,
        sigma=noise.sigma,
        kernel_id=src.kernel_id,
        tau=g.tau,
    )


def save_trace(trace: ChannelTrace, path) -> None:
    """Write a trace file: '#' header block, then segments and samples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rng={trace.seed.algorithm}\n")
        fh.write(f"# seed={trace.seed.master_seed}\n")
        fh.write(f"# trace_index={trace.seed.trace_index}\n")
        fh.write(f"# m={trace.m}\n")
        fh.write(f"# lambda={','.join(str(k) for k in trace.lambda_support)}\n")
        fh.write(f"# sigma={format(trace.sigma, '.17g')}\n")
        fh.write(f"# kernel={trace.kernel_id}\n")
        fh.write(f"# tau={trace.tau}\n")
        fh.write(f"# s0={trace.s0}\n")
        fh.write("segments\n")
        fh.write("l,kmer,k,t\n")
        t = 0
        for ell, (kmer, k) in enumerate(zip(trace.states, trace.durations), 1):
            t += k
            fh.write(f"{ell},{kmer},{k},{t}\n")
        fh.write("samples\n")
        fh.write("t,y\n")
        for t, y in enumerate(trace.samples, 1):
            fh.write(f"{t},{format(y, '.17g')}\n")


def load_trace(path) -> ChannelTrace:
    header: dict[str, str] = {}
    states: list[str] = []
    durations: list[int] = []
    samples: list[float] = []
    section = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
                continue
            if line in ("segments", "samples"):
                section = line
                continue
            if line.startswith(("l,", "t,")):
                continue
            parts = line.split(",")
            try:
                if section == "segments":
                    states.append(parts[1])
                    durations.append(int(parts[2]))
                elif section == "samples":
                    samples.append(float(parts[1]))
                else:
                    raise DataError(f"{path}: data row outside any section")
            except (IndexError, ValueError):
                raise DataError(f"{path}: malformed row {line!r}") from None
    try:
        trace = ChannelTrace(
            s0=header["s0"],
            states=tuple(states),
            durations=tuple(durations),
            samples=np.asarray(samples),
            seed=SeedInfo(header["rng"], int(header["seed"]),
                          int(header["trace_index"])),
            lambda_support=tuple(int(v) for v in header["lambda"].split(",")),
            sigma=float(header["sigma"]),
            kernel_id=header["kernel"],
            tau=int(header["tau"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing header field {exc}") from None
    if trace.t_m != len(trace.samples) or trace.m != int(header["m"]):
        raise DataError(f"{path}: inconsistent trace dimensions")
    return trace
