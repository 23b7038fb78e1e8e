"""Tests for T-value accumulation and information rate estimation."""
from __future__ import annotations

import numpy as np
import pytest

from conftest import run_posteriors
from porechannel.channel import NoiseModel
from porechannel.detection import PosteriorSet
from porechannel.errors import ConfigError, ModelMismatchError
from porechannel.rates import (TValueAccumulator, accumulate_t_values,
                               achievable_rate, mean_conditional_entropy,
                               monte_carlo_rate)
from porechannel.source import DurationModel


def test_t_term_equals_minus_conditional_entropy(seven_parry):
    dur = DurationModel.uniform([1, 2])
    for seed in range(4):
        _, _, post = run_posteriors(seven_parry, dur, 0.5, 40, seed)
        acc = TValueAccumulator(seven_parry.mu, seven_parry.trans)
        accumulate_t_values(acc, post, seven_parry.mu, seven_parry.trans)
        est = achievable_rate(acc)
        assert est.t_term == pytest.approx(-mean_conditional_entropy(post),
                                           abs=1e-9)
        assert est.rate == pytest.approx(est.entropy_term + est.t_term,
                                         abs=1e-15)


def test_t_term_is_nonpositive(seven_parry):
    # the T-term estimates minus an average conditional entropy, which is
    # nonnegative pointwise for exact posteriors
    dur = DurationModel.uniform([1, 2, 3])
    for seed in range(3):
        _, _, post = run_posteriors(seven_parry, dur, 0.35, 50, seed)
        acc = TValueAccumulator(seven_parry.mu, seven_parry.trans)
        accumulate_t_values(acc, post, seven_parry.mu, seven_parry.trans)
        assert achievable_rate(acc).t_term <= 1e-12


def test_deterministic_source_has_zero_rate(two_uniform):
    # P is a permutation here, so both the entropy term and every psi-based
    # contribution vanish
    dur = DurationModel.uniform([1])
    _, _, post = run_posteriors(two_uniform, dur, 0.1, 30, 2)
    acc = TValueAccumulator(two_uniform.mu, two_uniform.trans)
    accumulate_t_values(acc, post, two_uniform.mu, two_uniform.trans)
    est = achievable_rate(acc)
    assert est.entropy_term == pytest.approx(0.0, abs=1e-12)
    assert est.rate == pytest.approx(0.0, abs=1e-9)


def test_flat_emissions_drive_rate_to_zero(seven_parry):
    # sigma far above the level spread makes emissions uninformative, so
    # posteriors revert to the prior and the rate collapses
    est = monte_carlo_rate(seven_parry, DurationModel.uniform([1]),
                           NoiseModel(1e6), None, 2000, 100, 13)
    assert est.rate == pytest.approx(0.0, abs=0.01)
    assert est.t_term == pytest.approx(-est.entropy_term, abs=0.01)


def test_rate_bounds_and_low_noise_limit(seven_parry):
    est = monte_carlo_rate(seven_parry, DurationModel.uniform([1]),
                           NoiseModel(0.2), None, 1000, 100, 5)
    assert 0.0 <= est.rate <= est.entropy_term + 3 * est.stderr + 1e-9
    assert est.rate == pytest.approx(seven_parry.entropy_rate(), abs=0.005)
    assert est.blocks == 10 and est.m_total == 10 * 99


def test_monotone_degradation_in_noise(seven_parry):
    dur = DurationModel.uniform([1, 2])
    low = monte_carlo_rate(seven_parry, dur, NoiseModel(0.25), None, 2000, 200, 31)
    high = monte_carlo_rate(seven_parry, dur, NoiseModel(0.40), None, 2000, 200, 31)
    sep = 3 * np.hypot(low.stderr, high.stderr)
    assert high.rate < low.rate - sep


def test_accumulator_rejects_posterior_leak(two_uniform):
    psi = np.zeros((3, 2))
    psi[1] = psi[2] = [0.5, 0.5]
    pairs = np.zeros((3, 2, 2))
    pairs[2] = [[0.25, 0.25], [0.25, 0.25]]  # mass on pruned self-loops
    post = PosteriorSet(psi, pairs, 0.0, 2)
    acc = TValueAccumulator(two_uniform.mu, two_uniform.trans)
    with pytest.raises(ModelMismatchError):
        accumulate_t_values(acc, post, two_uniform.mu, two_uniform.trans)


def test_monte_carlo_rate_preconditions(seven_parry):
    dur = DurationModel.uniform([1])
    with pytest.raises(ConfigError, match=">= 20"):
        monte_carlo_rate(seven_parry, dur, NoiseModel(0.3), None, 100, 10, 0)
    with pytest.raises(ConfigError, match="multiple"):
        monte_carlo_rate(seven_parry, dur, NoiseModel(0.3), None, 150, 100, 0)
    acc = TValueAccumulator(seven_parry.mu, seven_parry.trans)
    with pytest.raises(ConfigError, match="empty"):
        achievable_rate(acc)


def test_monte_carlo_rate_is_seed_reproducible(seven_parry):
    dur = DurationModel.uniform([1, 2])
    a = monte_carlo_rate(seven_parry, dur, NoiseModel(0.3), None, 400, 200, 9)
    b = monte_carlo_rate(seven_parry, dur, NoiseModel(0.3), None, 400, 200, 9)
    assert a == b
    c = monte_carlo_rate(seven_parry, dur, NoiseModel(0.3), None, 400, 200, 10)
    assert a.rate != c.rate
