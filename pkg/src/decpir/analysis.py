"""Closed-form download-cost formulas, the per-realization lower bound,
its expectation under arbitrary per-bit caching marginals, and a numerical
minimizer over those marginals.

All closed-form evaluators run in exact rational arithmetic whenever the
inputs are rational; floating point is confined to the optimizer.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable

import numpy as np

from .errors import BudgetViolation
from .model import StorageSetPartition


def capacity_classical(num_files: int, num_replicas: int) -> Fraction:
    """Optimal normalized download cost for fully replicated stores.

    ``1 + 1/n + ... + 1/n**(K-1)`` for ``n`` replicas of ``K`` files.
    """
    if num_files < 1:
        raise ValueError(f"need at least one file, got {num_files}")
    if num_replicas < 1:
        raise ValueError(f"need at least one replica, got {num_replicas}")
    return sum(
        (Fraction(1, num_replicas**m) for m in range(num_files)), Fraction(0)
    )


def harmonic_weight(set_size: int, num_files: int) -> Fraction:
    """``1/l + 1/l**2 + ... + 1/l**(K-1)`` for storage-set size ``l``."""
    return capacity_classical(num_files, set_size) - 1


def capacity_decentralized(num_files: int, num_dbs: int, mu):
    """Optimal expected normalized download cost with ``num_dbs`` caching
    databases of storage ratio ``mu`` plus the always-available data center.

    Averages the replicated-store cost over the binomial law of how many
    databases hold a bit:
    ``sum_n C(N, n-1) mu^(n-1) (1-mu)^(N+1-n) * (1 + 1/n + ... + 1/n^(K-1))``.
    Exact when ``mu`` is a Fraction or int; float ``mu`` gives a float.
    """
    if num_files < 1:
        raise ValueError(f"need at least one file, got {num_files}")
    if num_dbs < 0:
        raise ValueError(f"database count must be non-negative, got {num_dbs}")
    if mu < 0 or mu > 1:
        raise ValueError(f"storage ratio must lie in [0, 1], got {mu}")
    total = 0
    for n in range(1, num_dbs + 2):
        weight = comb(num_dbs, n - 1) * mu ** (n - 1) * (1 - mu) ** (num_dbs + 1 - n)
        total += weight * capacity_classical(num_files, n)
    return total


@dataclass(frozen=True)
class CentralizedEnvelope:
    """Storage/download tradeoff of the coordinated-placement counterpart.

    Corner ``t`` (0..N) stores ``t/N`` of the corpus per database and costs
    ``capacity_classical(K, t+1)``; arbitrary ratios are served by the lower
    convex envelope through the corners.
    """

    num_files: int
    num_dbs: int
    corners: tuple[tuple[Fraction, Fraction], ...]
    hull: tuple[tuple[Fraction, Fraction], ...]

    def evaluate(self, mu):
        if mu < 0 or mu > 1:
            raise ValueError(f"storage ratio must lie in [0, 1], got {mu}")
        pts = self.hull
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x0 <= mu <= x1:
                if x0 == x1:
                    return min(y0, y1)
                return y0 + (y1 - y0) * (mu - x0) / (x1 - x0)
        raise AssertionError("hull does not cover [0, 1]")

    __call__ = evaluate


def _lower_hull(points):
    hull: list = []
    for p in points:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            # pop hull[-1] unless the path turns strictly counterclockwise
            if (x1 - x0) * (p[1] - y0) - (p[0] - x0) * (y1 - y0) > 0:
                break
            hull.pop()
        hull.append(p)
    return tuple(hull)


def centralized_envelope(num_files: int, num_dbs: int) -> CentralizedEnvelope:
    if num_dbs < 1:
        raise ValueError(f"the envelope needs at least one database, got {num_dbs}")
    corners = tuple(
        (Fraction(t, num_dbs), capacity_classical(num_files, t + 1))
        for t in range(num_dbs + 1)
    )
    return CentralizedEnvelope(num_files, num_dbs, corners, _lower_hull(corners))


@dataclass(frozen=True)
class ConverseTerms:
    """The evaluated lower bound for one caching realization.

    ``avg_stored_bits[l-1]`` is the bit mass of storage sets of size ``l``
    averaged over the ``K * C(N+1, l)`` (file, set) slots; the bound is
    ``L + sum_l C(N+1, l) * harmonic_weight(l) * avg_stored_bits[l-1]``.
    """

    avg_stored_bits: tuple[Fraction, ...]
    harmonic_weights: tuple[Fraction, ...]
    bound: Fraction


def converse_bound_realization(partition: StorageSetPartition) -> ConverseTerms:
    """Download-cost lower bound implied by one realized placement.

    Any retrieval scheme that is reliable and hides the desired file must
    download at least this many bits from this placement, so simulated
    totals dominate it with zero tolerance.
    """
    k, length, n = partition.num_files, partition.file_len, partition.num_dbs
    by_size = partition.bits_by_size()
    avg = tuple(
        Fraction(by_size.get(l, 0), k * comb(n + 1, l)) for l in range(1, n + 2)
    )
    weights = tuple(harmonic_weight(l, k) for l in range(1, n + 2))
    bound = length + sum(
        comb(n + 1, l) * w * x for l, (w, x) in enumerate(zip(weights, avg), start=1)
    )
    return ConverseTerms(avg, weights, bound)


def converse_bound_k3n2(partition: StorageSetPartition) -> Fraction:
    """The three-file / two-database bound written with fixed coefficients.

    Independent route used to cross-check :func:`converse_bound_realization`:
    ``L + 4/27 * sum_k H(W_k) + 11/108 * sum_i sum_k H(W_k | Z_i)
    + 17/54 * sum_i sum_k H(W_k | Z_everything_but_i)`` where, for uncoded
    caches, each conditional entropy is a count of uncached bits.
    """
    if partition.num_files != 3 or partition.num_dbs != 2:
        raise ValueError("this form is specific to K=3, N=2")
    length = partition.file_len

    def uncached_by(nodes: frozenset, file: int) -> int:
        # bits of `file` stored by no node in `nodes`
        return sum(
            len(entry.positions[file])
            for s, entry in partition.entries.items()
            if not (s & nodes)
        )

    sum_h = 3 * length
    sum_single = sum(
        uncached_by(frozenset({i}), f) for i in range(3) for f in range(3)
    )
    sum_pair = sum(
        uncached_by(frozenset({0, 1, 2}) - {i}, f) for i in range(3) for f in range(3)
    )
    return (
        length
        + Fraction(4, 27) * sum_h
        + Fraction(11, 108) * sum_single
        + Fraction(17, 54) * sum_pair
    )


@dataclass(frozen=True)
class MarginalProfile:
    """Per-bit caching probabilities shared by every database.

    ``probs`` is a (K, L) array; Fraction entries keep the expectation
    evaluators exact, float entries are what the optimizer works with.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        flat = self.probs.reshape(-1)
        if any(p < 0 or p > 1 for p in flat.tolist()):
            raise ValueError("marginals must lie in [0, 1]")

    @property
    def num_files(self) -> int:
        return self.probs.shape[0]

    @property
    def file_len(self) -> int:
        return self.probs.shape[1]

    def total(self):
        return sum(self.probs.reshape(-1).tolist())

    def check_budget(self, mu) -> None:
        budget = mu * self.num_files * self.file_len
        total = self.total()
        slack = 1e-9 * self.num_files * self.file_len
        exact = isinstance(total, (Fraction, int)) and isinstance(
            budget, (Fraction, int)
        )
        if total > budget + (0 if exact else slack):
            raise BudgetViolation(
                f"marginals sum to {total}, budget is {budget}"
            )


def uniform_profile(num_files: int, file_len: int, mu) -> MarginalProfile:
    probs = np.full((num_files, file_len), Fraction(mu), dtype=object)
    return MarginalProfile(probs)


def expected_size_mass(profile: MarginalProfile, set_size: int, num_dbs: int):
    """Expected per-slot bit mass of storage sets with ``set_size`` members.

    ``C(N, l-1) / (K * C(N+1, l)) * sum_ij p_ij^(l-1) (1 - p_ij)^(N+1-l)``;
    exact for Fraction entries.
    """
    l, n = set_size, num_dbs
    k = profile.num_files
    counts = Counter(profile.probs.reshape(-1).tolist())
    total = sum(
        cnt * p ** (l - 1) * (1 - p) ** (n + 1 - l) for p, cnt in counts.items()
    )
    return comb(n, l - 1) * total / (k * comb(n + 1, l))


def expected_converse_bound(
    profile: MarginalProfile, num_dbs: int, mu=None
):
    """Expectation of the realization bound under independent per-bit caching.

    At the uniform profile ``p == mu`` this equals
    ``L * capacity_decentralized(K, N, mu)`` exactly.
    """
    if mu is not None:
        profile.check_budget(mu)
    k, length, n = profile.num_files, profile.file_len, num_dbs
    return length + sum(
        comb(n + 1, l) * harmonic_weight(l, k) * expected_size_mass(profile, l, n)
        for l in range(1, n + 2)
    )


# ---------------------------------------------------------------------------
# Minimization of the expected bound over feasible marginal profiles.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundMinimization:
    """Outcome of :func:`minimize_expected_bound`.

    ``pg_norm_uniform`` is the projected-gradient norm at the uniform
    profile; a value near zero means uniform is stationary.  ``per_size_*``
    report the expected per-size masses at the best point and at uniform so
    per-size behavior can be inspected separately from the aggregate.
    """

    best_probs: np.ndarray
    best_value: float
    uniform_value: float
    pg_norm_uniform: float
    pg_norm_best: float
    converged: bool
    iterations: int
    restart_values: tuple[float, ...]
    per_size_best: tuple[float, ...]
    per_size_uniform: tuple[float, ...]


def project_capped_simplex(p: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto ``{q in [0,1]^d : sum(q) <= budget}``.

    Clips to the box; if the clipped point still overshoots the budget,
    shifts by the scalar that lands the clipped sum on the budget face
    (solved by bisection to 1e-14).
    """
    q = np.clip(p, 0.0, 1.0)
    if q.sum() <= budget + 1e-12:
        return q
    lo, hi = 0.0, float(p.max())
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.clip(p - tau, 0.0, 1.0).sum()
        if s > budget:
            lo = tau
        else:
            hi = tau
        if hi - lo < 1e-14:
            break
    return np.clip(p - hi, 0.0, 1.0)


def _objective_factory(
    num_files: int, num_dbs: int, file_len: int
) -> Callable[[np.ndarray], tuple[float, np.ndarray]]:
    k, n = num_files, num_dbs
    coeffs = [
        comb(n, l - 1) * float(harmonic_weight(l, k)) / k for l in range(1, n + 2)
    ]

    def f_grad(p: np.ndarray) -> tuple[float, np.ndarray]:
        value = 0.0
        grad = np.zeros_like(p)
        one_minus = 1.0 - p
        for l, c in enumerate(coeffs, start=1):
            a, b = l - 1, n + 1 - l
            pa = p**a
            qb = one_minus**b
            value += c * float((pa * qb).sum())
            if a > 0:
                grad += c * a * p ** (a - 1) * qb
            if b > 0:
                grad -= c * b * pa * one_minus ** (b - 1)
        return file_len + value, grad

    return f_grad


def _pg_norm(p, grad, budget):
    return float(np.linalg.norm(p - project_capped_simplex(p - grad, budget)))


def minimize_expected_bound(
    num_files: int,
    num_dbs: int,
    mu,
    file_len: int,
    restarts: int = 20,
    seed: int = 0,
    max_iter: int = 100_000,
    grad_tol: float = 1e-10,
) -> BoundMinimization:
    """Minimize the expected bound over feasible marginal profiles.

    Projected gradient descent with backtracking line search, restarted from
    the uniform profile and ``restarts`` random feasible points; restarts
    reduce by minimum value.  Non-convergence within the iteration cap is
    flagged, not raised.
    """
    dim = num_files * file_len
    if dim > 10_000:
        raise ValueError(f"{dim} variables exceeds the dense-optimization limit")
    budget = float(mu) * dim
    f_grad = _objective_factory(num_files, num_dbs, file_len)
    rng = np.random.Generator(np.random.PCG64(seed))

    uniform = np.full(dim, float(mu))
    u_value, u_grad = f_grad(uniform)
    pg_uniform = _pg_norm(uniform, u_grad, budget)

    def descend(start: np.ndarray) -> tuple[np.ndarray, float, float, bool, int]:
        p = project_capped_simplex(start, budget)
        value, grad = f_grad(p)
        for it in range(max_iter):
            if _pg_norm(p, grad, budget) <= grad_tol:
                return p, value, _pg_norm(p, grad, budget), True, it
            step = 1.0
            accepted = False
            while step > 1e-18:
                cand = project_capped_simplex(p - step * grad, budget)
                move = cand - p
                cand_value, cand_grad = f_grad(cand)
                # strict decrease: once the quadratic term underflows, an
                # unchanged value must not count as progress or the loop
                # micro-cycles until the iteration cap
                if cand_value < value - 1e-4 * float(np.dot(move, move)) / step:
                    accepted = True
                    break
                step *= 0.5
            if not accepted or float(np.abs(move).max()) <= 1e-13:
                # numerically stationary: no measurable progress possible
                return p, value, _pg_norm(p, grad, budget), True, it
            p, value, grad = cand, cand_value, cand_grad
        return p, value, _pg_norm(p, grad, budget), False, max_iter

    starts = [uniform] + [rng.random(dim) for _ in range(restarts)]
    best = None
    restart_values = []
    total_iters = 0
    all_converged = True
    for start in starts:
        p, value, pg, converged, iters = descend(start)
        restart_values.append(value)
        total_iters += iters
        all_converged = all_converged and converged
        if best is None or value < best[1]:
            best = (p, value, pg, converged)

    best_p, best_value, pg_best, best_converged = best
    best_profile = MarginalProfile(best_p.reshape(num_files, file_len))
    uniform_profile_f = MarginalProfile(uniform.reshape(num_files, file_len))
    per_size_best = tuple(
        float(expected_size_mass(best_profile, l, num_dbs))
        for l in range(1, num_dbs + 2)
    )
    per_size_uniform = tuple(
        float(expected_size_mass(uniform_profile_f, l, num_dbs))
        for l in range(1, num_dbs + 2)
    )
    return BoundMinimization(
        best_probs=best_p.reshape(num_files, file_len),
        best_value=best_value,
        uniform_value=u_value,
        pg_norm_uniform=pg_uniform,
        pg_norm_best=pg_best,
        converged=all_converged and best_converged,
        iterations=total_iters,
        restart_values=tuple(restart_values),
        per_size_best=per_size_best,
        per_size_uniform=per_size_uniform,
    )
