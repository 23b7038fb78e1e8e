"""Shared fixtures for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from porechannel import fixtures
from porechannel.channel import NoiseModel, simulate
from porechannel.detection import (SegmentLikelihood, backward, forward,
                                   point_mass, posteriors)
from porechannel.source import DurationModel, parry_kernel, uniform_kernel


@pytest.fixture(scope="session")
def seven_graph():
    return fixtures.seven_state_graph()


@pytest.fixture(scope="session")
def seven_parry(seven_graph):
    return parry_kernel(seven_graph)


@pytest.fixture(scope="session")
def seven_uniform(seven_graph):
    return uniform_kernel(seven_graph)


@pytest.fixture(scope="session")
def two_graph():
    return fixtures.two_state_graph()


@pytest.fixture(scope="session")
def two_uniform(two_graph):
    return uniform_kernel(two_graph)


def run_posteriors(src, dur, sigma, m, seed, trace_index=0):
    """Simulate one trace and decode it; returns (trace, sl, post)."""
    trace = simulate(src, dur, NoiseModel(sigma), None, m, seed,
                     trace_index=trace_index)
    sl = SegmentLikelihood.build(src, dur, sigma, trace.samples)
    mu0 = point_mass(src.graph, trace.s0)
    fl = forward(sl, mu0, m)
    bl = backward(sl, m)
    return trace, sl, posteriors(fl, bl, sl)


def random_small_instance(rng, graph, src):
    """Draw a random tiny instance for oracle comparisons."""
    lam = tuple(sorted(rng.choice([1, 2, 3],
                                  size=int(rng.integers(1, 4)),
                                  replace=False)))
    dur = DurationModel.uniform(lam)
    sigma = float(rng.uniform(0.2, 2.0))
    m = int(rng.integers(1, 5))
    trace = simulate(src, dur, NoiseModel(sigma), None, m,
                     int(rng.integers(1 << 30)))
    mu0 = point_mass(graph, trace.s0)
    return dur, sigma, m, trace, mu0


def assert_posterior_invariants(post, tol=1e-9):
    m = post.m
    assert np.allclose(post.psi[1:m + 1].sum(axis=1), 1.0, atol=tol)
    for ell in range(2, m + 1):
        np.testing.assert_allclose(post.psi_pairs[ell].sum(axis=0),
                                   post.psi[ell], atol=tol)
        np.testing.assert_allclose(post.psi_pairs[ell].sum(axis=1),
                                   post.psi[ell - 1], atol=tol)
