"""Placement policy tests: budgets, marginals, independence, determinism."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decpir.errors import BudgetViolation
from decpir.placement import (
    ExplicitSetsPlacement,
    UniformRandomPlacement,
    WholeFilePrefixPlacement,
    empirical_marginals,
    policy_from_dict,
    sample_placement,
    validate_budget,
)
from decpir.rng import derive_seed


def test_uniform_sample_sizes():
    # K=3, L=4, mu=1/3: every database stores exactly 4 of the 12 bits.
    real = sample_placement(UniformRandomPlacement(Fraction(1, 3)), 3, 4, 4, seed=0)
    assert real.budget == 4
    for addrs in real.sets:
        assert len(addrs) == 4
        assert len(set(addrs.tolist())) == 4


def test_uniform_mu_one_stores_everything():
    real = sample_placement(UniformRandomPlacement(Fraction(1)), 3, 4, 2, seed=5)
    for addrs in real.sets:
        assert sorted(addrs.tolist()) == list(range(12))


def test_whole_file_prefix():
    real = sample_placement(
        WholeFilePrefixPlacement((0,)), 3, 4, 3, seed=0, mu=Fraction(1, 3)
    )
    expected = list(range(4))  # all bits of file 0
    for addrs in real.sets:
        assert addrs.tolist() == expected


def test_whole_file_prefix_budget_violation():
    with pytest.raises(BudgetViolation):
        sample_placement(
            WholeFilePrefixPlacement((0, 1)), 3, 4, 2, seed=0, mu=Fraction(1, 3)
        )


def test_explicit_sets_budget_violation():
    policy = ExplicitSetsPlacement((((0, 0), (0, 1), (0, 2), (0, 3), (1, 0)),))
    with pytest.raises(BudgetViolation):
        sample_placement(policy, 3, 4, 1, seed=0, mu=Fraction(1, 3))


def test_validate_budget_boundary():
    policy = ExplicitSetsPlacement((((0, 0), (0, 1), (0, 2), (0, 3), (1, 0)),))
    real = sample_placement(policy, 3, 4, 1, seed=0, mu=Fraction(1, 2))  # budget 6
    report = validate_budget(real, Fraction(1, 3))  # budget 4: too small now
    assert not report.ok
    assert report.violations == ((1, 5, 4),)
    assert validate_budget(real, Fraction(1, 2)).ok


def test_validate_budget_empty_sets_ok():
    real = sample_placement(UniformRandomPlacement(Fraction(0)), 2, 5, 3, seed=0)
    assert validate_budget(real, Fraction(0)).ok


def test_uniform_sample_always_ok():
    for mu in (Fraction(0), Fraction(1, 4), Fraction(2, 3), Fraction(1)):
        real = sample_placement(UniformRandomPlacement(mu), 2, 6, 3, seed=9)
        assert validate_budget(real, mu).ok


def test_empirical_marginals_uniform():
    # Every per-address estimate should be within 3 standard errors of mu.
    mu = Fraction(1, 2)
    trials = 10_000
    est = empirical_marginals(UniformRandomPlacement(mu), 2, 3, trials, seed=21)
    se = math.sqrt(float(mu) * (1 - float(mu)) / trials)
    assert est.shape == (2, 3)
    assert np.all(np.abs(est - float(mu)) < 3 * se)


def test_empirical_marginals_symmetry():
    mu = Fraction(1, 3)
    trials = 10_000
    est = empirical_marginals(UniformRandomPlacement(mu), 3, 2, trials, seed=4)
    mean = est.mean()
    se = math.sqrt(mean * (1 - mean) / trials)
    assert np.all(np.abs(est - mean) < 3 * se)


def test_empirical_marginals_deterministic_policies():
    est = empirical_marginals(
        WholeFilePrefixPlacement((0,)), 3, 4, 50, seed=0, mu=Fraction(1, 3)
    )
    assert np.array_equal(est[0], np.ones(4))
    assert np.array_equal(est[1:], np.zeros((2, 4)))

    zeros = empirical_marginals(UniformRandomPlacement(Fraction(0)), 2, 3, 50, seed=0)
    assert np.array_equal(zeros, np.zeros((2, 3)))


def test_databases_cache_independently():
    # Joint inclusion frequency of one fixed address in two databases
    # approaches the squared marginal.
    mu = Fraction(1, 2)
    trials = 10_000
    joint = 0
    for t in range(trials):
        real = sample_placement(
            UniformRandomPlacement(mu), 2, 3, 2, derive_seed(77, t)
        )
        joint += int(0 in real.sets[0]) and int(0 in real.sets[1])
    p2 = float(mu) ** 2
    se = math.sqrt(p2 * (1 - p2) / trials)
    assert abs(joint / trials - p2) < 3 * se


@given(seed=st.integers(0, 2**60), n=st.integers(0, 4))
def test_sampling_is_deterministic(seed, n):
    a = sample_placement(UniformRandomPlacement(Fraction(1, 3)), 2, 6, n, seed)
    b = sample_placement(UniformRandomPlacement(Fraction(1, 3)), 2, 6, n, seed)
    assert all(np.array_equal(x, y) for x, y in zip(a.sets, b.sets))


def test_policy_from_dict_round_trip():
    assert policy_from_dict({"kind": "uniform-random", "mu": "1/3"}) == (
        UniformRandomPlacement(Fraction(1, 3))
    )
    assert policy_from_dict({"kind": "whole-file-prefix", "files": [0, 2]}) == (
        WholeFilePrefixPlacement((0, 2))
    )
    with pytest.raises(ValueError):
        policy_from_dict({"kind": "mystery"})
