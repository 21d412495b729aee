"""Private retrieval from replicated stores with XOR sum queries.

One protocol instance runs over ``n`` stores that each hold the same ``K``
files of ``lam`` symbols.  For ``n >= 2`` the plan is built per block of
``n**K`` symbols:

* round 1 sends every store one fresh singleton per file;
* in round ``k`` each store receives, for every purely-undesired
  ``(k-1)``-sum downloaded from every other store, one desired ``k``-sum
  mixing a fresh desired symbol with that sum (the side-information link is
  recorded for decoding), plus ``(n-1)**(k-1)`` fresh undesired ``k``-sums
  for every ``k``-subset of the undesired files.

Fresh symbols are handed out by per-file counters and addressed through
per-file uniform random permutations, so the indices a store sees are
uniformly random; the count of ``k``-sums per file subset at each store is
the same for every choice of desired file, which is what makes the request
pattern uninformative.  ``n = 1`` degenerates to downloading everything.

Query symbol indices refer to positions in each store's symbol array after
the plan's permutation has been applied at construction time; stores never
need the permutations to answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ProtocolError
from .rng import generator


@dataclass(frozen=True)
class SumQuery:
    """A GF(2) sum over one symbol from each of ``order`` distinct files.

    ``terms`` are (file, symbol index) pairs sorted by file.
    """

    terms: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        files = [f for f, _ in self.terms]
        if not files:
            raise ValueError("a sum query needs at least one term")
        if sorted(set(files)) != files:
            raise ValueError(f"query terms must have distinct, sorted files: {self.terms}")

    @property
    def order(self) -> int:
        return len(self.terms)

    @property
    def files(self) -> frozenset:
        return frozenset(f for f, _ in self.terms)


class DesiredSource(NamedTuple):
    """Where one desired symbol is recovered from.

    ``(db, query_index)`` locate the query carrying the symbol; for sums of
    order >= 2, ``(side_db, side_query_index)`` locate the reused undesired
    sum whose answer bit cancels the interference (-1, -1 for singletons).
    """

    db: int
    query_index: int
    side_db: int
    side_query_index: int


@dataclass(frozen=True)
class QueryPlan:
    """A full retrieval session: per-store query lists plus decoding state.

    ``desired_sources[c]`` tells how the desired file's symbol with counter
    ``c`` is recovered; ``permutations[j][c]`` is the symbol array position
    that counter ``c`` of file ``j`` was mapped to.
    """

    num_replicas: int
    num_files: int
    desired: int
    num_symbols: int
    permutations: tuple[np.ndarray, ...]
    per_database: tuple[tuple[SumQuery, ...], ...]
    desired_sources: tuple[DesiredSource, ...]

    @property
    def total_queries(self) -> int:
        return sum(len(q) for q in self.per_database)

    def side_info_links(self) -> dict[tuple[int, int], tuple[int, int]]:
        """Map (db, query index) of each desired sum to its reused sum."""
        return {
            (s.db, s.query_index): (s.side_db, s.side_query_index)
            for s in self.desired_sources
            if s.side_db >= 0
        }


def generate_query_plan(
    num_replicas: int,
    num_files: int,
    desired: int,
    num_symbols: int,
    seed: int,
    permute: bool = True,
) -> QueryPlan:
    """Build the query plan for one retrieval session.

    For ``num_replicas >= 2``, ``num_symbols`` must be a multiple of
    ``num_replicas ** num_files``; the plan then consists of that many
    independent blocks over consecutive counter ranges.  ``permute=False``
    skips the per-file permutations and exists only as a negative control
    for privacy tests.
    """
    n, k = num_replicas, num_files
    if n < 1:
        raise ValueError(f"need at least one replica, got {n}")
    if k < 1:
        raise ValueError(f"need at least one file, got {k}")
    if not 0 <= desired < k:
        raise ValueError(f"desired file {desired} out of range for K={k}")
    if num_symbols < 0:
        raise ValueError(f"symbol count must be non-negative, got {num_symbols}")

    if n == 1:
        perms = tuple(np.arange(num_symbols) for _ in range(k))
        queries = tuple(
            SumQuery(((j, i),)) for j in range(k) for i in range(num_symbols)
        )
        sources = tuple(
            DesiredSource(0, desired * num_symbols + i, -1, -1)
            for i in range(num_symbols)
        )
        return QueryPlan(n, k, desired, num_symbols, perms, (queries,), sources)

    block = n**k
    if num_symbols % block != 0:
        raise ValueError(
            f"symbol count {num_symbols} is not a multiple of the "
            f"{block}-symbol block size for n={n}, K={k}"
        )

    rng = generator(seed)
    if permute:
        perms = tuple(rng.permutation(num_symbols) for _ in range(k))
    else:
        perms = tuple(np.arange(num_symbols) for _ in range(k))

    per_db: list[list[SumQuery]] = [[] for _ in range(n)]
    sources: list[DesiredSource | None] = [None] * num_symbols
    undesired_files = [j for j in range(k) if j != desired]

    for base in range(0, num_symbols, block):
        counters = [base] * k

        def fresh(j: int) -> int:
            c = counters[j]
            counters[j] += 1
            return c

        def term(j: int) -> tuple[int, int]:
            return (j, int(perms[j][fresh(j)]))

        # Round 1: one fresh singleton per file at every store.
        pool: list[list[tuple[int, tuple[tuple[int, int], ...]]]] = [
            [] for _ in range(n)
        ]
        for d in range(n):
            for j in range(k):
                c = counters[j]
                t = term(j)
                idx = len(per_db[d])
                per_db[d].append(SumQuery((t,)))
                if j == desired:
                    sources[c] = DesiredSource(d, idx, -1, -1)
                else:
                    pool[d].append((idx, (t,)))

        # Rounds 2..K.
        for order in range(2, k + 1):
            new_pool: list[list[tuple[int, tuple[tuple[int, int], ...]]]] = [
                [] for _ in range(n)
            ]
            for d in range(n):
                # Desired sums: one fresh desired symbol mixed with each
                # purely-undesired (order-1)-sum from every other store,
                # taken in ascending (store, creation order).
                for dp in range(n):
                    if dp == d:
                        continue
                    for src_idx, src_terms in pool[dp]:
                        c = counters[desired]
                        t = term(desired)
                        idx = len(per_db[d])
                        per_db[d].append(
                            SumQuery(tuple(sorted(src_terms + (t,))))
                        )
                        sources[c] = DesiredSource(d, idx, dp, src_idx)
                # Undesired sums: fresh indices, one per file of each subset.
                for subset in combinations(undesired_files, order):
                    for _ in range((n - 1) ** (order - 1)):
                        terms = tuple(term(j) for j in subset)
                        idx = len(per_db[d])
                        per_db[d].append(SumQuery(terms))
                        new_pool[d].append((idx, terms))
            pool = new_pool

        if counters[desired] != base + block:
            raise ProtocolError(
                f"desired counter ended at {counters[desired]}, "
                f"expected {base + block}"
            )
        if any(counters[j] > base + block for j in undesired_files):
            raise ProtocolError("an undesired counter overran its block")

    return QueryPlan(
        n,
        k,
        desired,
        num_symbols,
        perms,
        tuple(tuple(qs) for qs in per_db),
        tuple(sources),  # type: ignore[arg-type]
    )


def answer_queries(
    queries: Sequence[SumQuery], symbols: Sequence[np.ndarray]
) -> np.ndarray:
    """Evaluate a store's answer string: one GF(2) sum per query, in order.

    ``symbols[j]`` is file ``j``'s symbol array (zero padding included);
    per-file lengths may differ.  Raises :class:`ProtocolError` on a
    reference to a symbol the store cannot resolve.
    """
    arrays = [np.asarray(a, dtype=np.uint8) for a in symbols]
    if not queries:
        return np.zeros(0, dtype=np.uint8)
    lengths = np.asarray([len(a) for a in arrays])
    offsets = np.concatenate(([0], np.cumsum(lengths)))
    flat = (
        np.concatenate(arrays)
        if offsets[-1] > 0
        else np.zeros(0, dtype=np.uint8)
    )

    counts = np.fromiter((q.order for q in queries), dtype=np.int64, count=len(queries))
    files = np.fromiter(
        (f for q in queries for f, _ in q.terms), dtype=np.int64, count=counts.sum()
    )
    idx = np.fromiter(
        (i for q in queries for _, i in q.terms), dtype=np.int64, count=counts.sum()
    )
    if (files < 0).any() or (files >= len(arrays)).any():
        raise ProtocolError("query references an unknown file")
    if (idx < 0).any() or (idx >= lengths[files]).any():
        raise ProtocolError("query references a symbol outside the stored range")

    values = flat[offsets[files] + idx]
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return np.bitwise_xor.reduceat(values, starts).astype(np.uint8)


def decode_desired(plan: QueryPlan, answers: Sequence[np.ndarray]) -> np.ndarray:
    """Recover the desired file's ``num_symbols`` symbols in original order.

    Singleton answers are read directly; each desired sum is decoded by
    XORing in the linked undesired sum's downloaded answer bit.  Undesired
    sums are only ever reused wholesale, never decoded.
    """
    if len(answers) != plan.num_replicas:
        raise ProtocolError(
            f"expected {plan.num_replicas} answer strings, got {len(answers)}"
        )
    arrays = [np.asarray(a, dtype=np.uint8) for a in answers]
    for d, (a, qs) in enumerate(zip(arrays, plan.per_database)):
        if len(a) != len(qs):
            raise ProtocolError(
                f"store {d} answered {len(a)} bits for {len(qs)} queries"
            )
    if plan.num_symbols == 0:
        return np.zeros(0, dtype=np.uint8)

    offsets = np.concatenate(([0], np.cumsum([len(a) for a in arrays])))
    flat = np.concatenate(arrays) if offsets[-1] > 0 else np.zeros(0, dtype=np.uint8)
    src = np.asarray(plan.desired_sources, dtype=np.int64)
    bits = flat[offsets[src[:, 0]] + src[:, 1]].copy()
    linked = src[:, 2] >= 0
    if linked.any():
        bits[linked] ^= flat[offsets[src[linked, 2]] + src[linked, 3]]

    out = np.empty(plan.num_symbols, dtype=np.uint8)
    out[plan.permutations[plan.desired]] = bits
    return out


def structural_privacy_histogram(plan: QueryPlan) -> tuple[dict[frozenset, int], ...]:
    """Per-store counts of sum queries keyed by their exact file set.

    The histogram is the store-visible request "shape"; by construction it
    does not depend on which file is desired.
    """
    out = []
    for queries in plan.per_database:
        counts: dict[frozenset, int] = {}
        for q in queries:
            counts[q.files] = counts.get(q.files, 0) + 1
        out.append(counts)
    return tuple(out)


def serialize_query(query: SumQuery) -> str:
    return " ".join(f"{f}:{i}" for f, i in query.terms)


def serialize_transcript(queries: Sequence[SumQuery], sort: bool = False) -> str:
    """Canonical text form of one store's query list, one query per line.

    Queries appear in generation order (the wire/golden-file format); with
    ``sort=True`` the lines are sorted, which drops the ordering and is the
    store-visible view used for distribution testing.
    """
    lines = [serialize_query(q) for q in queries]
    if sort:
        lines.sort()
    return "\n".join(lines)


def plan_transcripts(plan: QueryPlan, sort: bool = False) -> tuple[str, ...]:
    return tuple(serialize_transcript(qs, sort=sort) for qs in plan.per_database)
