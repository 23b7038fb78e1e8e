"""Bundled example state spaces used by tests and the CLI `--fixture` flag."""
from __future__ import annotations

import warnings

import numpy as np

from .errors import ConfigError
from .kmer_space import (ChannelMapping, StateGraph, index_to_kmer,
                         induced_graph, jump_constrained_reduce)

# Seven 5-mer states whose measurement levels keep every induced shift edge
# above a jumping distance of 1.38; this small graph is the self-contained
# stand-in for a jump-reduced full pore-model table.
SEVEN_STATE_LEVELS = {
    "CTCGT": 0.19,
    "TCGTC": -1.3,
    "CGTCT": 1.6,
    "TCTCG": 1.6,
    "GTCTC": -0.031,
    "CTCTC": 0.094,
    "TCTCT": 1.5,
}

# Two-state toy channel with alternating states; f(A) = 1, f(T) = -1.
TWO_STATE_LEVELS = {"A": 1.0, "T": -1.0}

# An observation of six samples from the two-state channel with durations
# (1, 2, 2, 1), used by small worked examples.
TOY_OBSERVATION = (1.0, -0.9, -1.1, 0.95, 1.2, -0.8)


def seven_state_mapping() -> ChannelMapping:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # two states share the level 1.6
        return ChannelMapping(5, dict(SEVEN_STATE_LEVELS))


def seven_state_graph() -> StateGraph:
    return induced_graph(seven_state_mapping())


def two_state_mapping() -> ChannelMapping:
    return ChannelMapping(1, dict(TWO_STATE_LEVELS))


def two_state_graph() -> StateGraph:
    # a positive jump threshold drops the homopolymer self-loops,
    # leaving the alternating A <-> T chain
    return jump_constrained_reduce(induced_graph(two_state_mapping()), 0.5)


def toy_tau2_mapping() -> ChannelMapping:
    """Complete tau=2 table with 16 distinct, well-spread levels."""
    levels = {}
    for idx in range(16):
        kmer = index_to_kmer(idx, 2)
        levels[kmer] = ((idx * 7) % 16) / 2.0 - 3.75
    return ChannelMapping(2, levels)


FIXTURES = {
    "seven_state": seven_state_mapping,
    "two_state": two_state_mapping,
    "toy_tau2": toy_tau2_mapping,
}


def fixture_mapping(name: str) -> ChannelMapping:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ConfigError(
            f"unknown fixture {name!r}; available: {', '.join(sorted(FIXTURES))}"
        ) from None


def toy_observation_array() -> np.ndarray:
    return np.asarray(TOY_OBSERVATION)
