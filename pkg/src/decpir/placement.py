"""Caching-phase policies.

The production policy is uniform random placement: every database
independently caches a uniformly random budget-sized subset of all bits,
all databases drawing from the same distribution.  Two deterministic
policies (whole-file prefix and explicit literal sets) are provided as
stress tests for the download-cost lower bound.

Samplers are pure functions of (policy, seed); see :mod:`decpir.rng` for the
seed-splitting rule that keeps trials order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import BudgetViolation
from .model import CacheRealization, flat_address, storage_budget
from .rng import derive_seed, generator


@dataclass(frozen=True)
class UniformRandomPlacement:
    """Each database caches an independent uniform budget-sized subset.

    ``mu`` may be left None when the storage ratio is supplied at sampling
    time (as experiment configs do).
    """

    mu: Optional[Fraction] = None

    kind = "uniform-random"


@dataclass(frozen=True)
class WholeFilePrefixPlacement:
    """Every database caches exactly the bits of the listed files."""

    files: tuple[int, ...]

    kind = "whole-file-prefix"


@dataclass(frozen=True)
class ExplicitSetsPlacement:
    """Literal per-database address sets, as (file, position) pairs."""

    sets: tuple[tuple[tuple[int, int], ...], ...]

    kind = "explicit-sets"


PlacementPolicy = Union[
    UniformRandomPlacement, WholeFilePrefixPlacement, ExplicitSetsPlacement
]


def policy_from_dict(doc: dict) -> PlacementPolicy:
    """Parse a policy description as used in experiment config files."""
    kind = doc.get("kind", "uniform-random")
    if kind == "uniform-random":
        return UniformRandomPlacement(Fraction(doc["mu"]) if "mu" in doc else None)
    if kind == "whole-file-prefix":
        return WholeFilePrefixPlacement(tuple(int(f) for f in doc["files"]))
    if kind == "explicit-sets":
        return ExplicitSetsPlacement(
            tuple(tuple((int(f), int(p)) for f, p in s) for s in doc["sets"])
        )
    raise ValueError(f"unknown placement kind {kind!r}")


def _resolve_mu(policy: PlacementPolicy, mu) -> Fraction:
    if isinstance(policy, UniformRandomPlacement) and policy.mu is not None:
        if mu is not None and Fraction(mu) != policy.mu:
            raise ValueError(
                f"policy carries mu={policy.mu} but sampler was given mu={mu}"
            )
        return policy.mu
    if mu is None:
        raise ValueError("a storage ratio mu is required to size the bit budget")
    return Fraction(mu)


def sample_placement(
    policy: PlacementPolicy,
    num_files: int,
    file_len: int,
    num_dbs: int,
    seed: int,
    mu=None,
) -> CacheRealization:
    """Draw one caching-phase realization for ``num_dbs`` databases.

    Uniform placement samples each database from an independent stream
    derived from ``seed``; deterministic policies ignore the randomness but
    still validate the budget.
    """
    if num_dbs < 0:
        raise ValueError(f"database count must be non-negative, got {num_dbs}")
    mu = _resolve_mu(policy, mu)
    budget = storage_budget(mu, num_files, file_len)
    total = num_files * file_len

    if isinstance(policy, UniformRandomPlacement):
        sets = []
        for d in range(num_dbs):
            rng = generator(derive_seed(seed, d))
            picked = rng.choice(total, size=budget, replace=False)
            sets.append(np.sort(picked).astype(np.int64))
        return CacheRealization(num_files, file_len, num_dbs, budget, tuple(sets))

    if isinstance(policy, WholeFilePrefixPlacement):
        files = sorted(set(policy.files))
        if len(files) != len(policy.files):
            raise ValueError("file list contains duplicates")
        if files and (files[0] < 0 or files[-1] >= num_files):
            raise ValueError(f"file list {policy.files} out of range for K={num_files}")
        if len(files) * file_len > budget:
            raise BudgetViolation(
                f"caching {len(files)} whole files needs {len(files) * file_len} "
                f"bits, budget is {budget}"
            )
        addrs = np.asarray(
            [flat_address(f, p, file_len) for f in files for p in range(file_len)],
            dtype=np.int64,
        )
        sets = tuple(addrs.copy() for _ in range(num_dbs))
        return CacheRealization(num_files, file_len, num_dbs, budget, sets)

    if isinstance(policy, ExplicitSetsPlacement):
        if len(policy.sets) != num_dbs:
            raise ValueError(
                f"policy lists {len(policy.sets)} sets for {num_dbs} databases"
            )
        sets = []
        for d, pairs in enumerate(policy.sets):
            if len(pairs) > budget:
                raise BudgetViolation(
                    f"database {d + 1} set has {len(pairs)} bits, budget is {budget}"
                )
            flat = sorted(flat_address(f, p, file_len) for f, p in pairs)
            sets.append(np.asarray(flat, dtype=np.int64))
        return CacheRealization(num_files, file_len, num_dbs, budget, tuple(sets))

    raise TypeError(f"unknown policy type {type(policy).__name__}")


@dataclass(frozen=True)
class BudgetReport:
    """Result of a budget audit; ``violations`` lists (db, size, budget)."""

    ok: bool
    budget: int
    violations: tuple[tuple[int, int, int], ...]


def validate_budget(realization: CacheRealization, mu) -> BudgetReport:
    """Check every database against the budget implied by ``mu``."""
    budget = storage_budget(Fraction(mu), realization.num_files, realization.file_len)
    violations = tuple(
        (d + 1, len(addrs), budget)
        for d, addrs in enumerate(realization.sets)
        if len(addrs) > budget
    )
    return BudgetReport(not violations, budget, violations)


def empirical_marginals(
    policy: PlacementPolicy,
    num_files: int,
    file_len: int,
    trials: int,
    seed: int,
    mu=None,
) -> np.ndarray:
    """Per-address caching frequency of the first database over many draws.

    All databases share one distribution, so the first database's marginals
    characterize the policy.  Returns a (num_files, file_len) array of
    estimates.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    counts = np.zeros(num_files * file_len, dtype=np.int64)
    for t in range(trials):
        realization = sample_placement(
            policy, num_files, file_len, 1, derive_seed(seed, t), mu=mu
        )
        counts[realization.sets[0]] += 1
    return (counts / trials).reshape(num_files, file_len)
