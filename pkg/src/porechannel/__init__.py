"""Simulation and MAP inference for a duplicating, noisy k-mer nanopore channel."""

from .channel import ChannelTrace, NoiseModel, simulate
from .detection import (SegmentLikelihood, backward, feasible_band, forward,
                        posteriors, viterbi)
from .kmer_space import (ChannelMapping, StateGraph, de_bruijn_sequence,
                         full_graph, jump_constrained_reduce,
                         max_entropy_component, perron_entropy,
                         shift_successor, strongly_connected_components)
from .rates import RateEstimate, achievable_rate, monte_carlo_rate
from .source import (DurationModel, MarkovSource, SemiMarkovKernel,
                     entropy_rate, parry_kernel, stationary_distribution,
                     uniform_kernel)

__all__ = [
    "ChannelMapping",
    "ChannelTrace",
    "DurationModel",
    "MarkovSource",
    "NoiseModel",
    "RateEstimate",
    "SegmentLikelihood",
    "SemiMarkovKernel",
    "StateGraph",
    "achievable_rate",
    "backward",
    "de_bruijn_sequence",
    "entropy_rate",
    "feasible_band",
    "forward",
    "full_graph",
    "jump_constrained_reduce",
    "max_entropy_component",
    "monte_carlo_rate",
    "parry_kernel",
    "perron_entropy",
    "posteriors",
    "shift_successor",
    "simulate",
    "stationary_distribution",
    "strongly_connected_components",
    "uniform_kernel",
    "viterbi",
]

__version__ = "0.1.0"
