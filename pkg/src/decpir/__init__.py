"""Private information retrieval from decentralized uncoded caching databases.

Two-phase simulator and analysis toolkit: databases independently cache
uniformly random bit subsets of a data center's files; a retriever then
privately downloads one file across the data center plus N databases by
running a replicated-store sum-query protocol per storage-set partition.
The analysis half evaluates the closed-form expected download cost, the
per-realization lower bound, and optimizes the bound over per-bit caching
marginals.
"""

from .analysis import (
    BoundMinimization,
    CentralizedEnvelope,
    ConverseTerms,
    MarginalProfile,
    capacity_classical,
    capacity_decentralized,
    centralized_envelope,
    converse_bound_k3n2,
    converse_bound_realization,
    expected_converse_bound,
    expected_size_mass,
    minimize_expected_bound,
    uniform_profile,
)
from .errors import (
    BudgetViolation,
    InvariantViolation,
    ProtocolError,
    ReliabilityError,
)
from .model import (
    BitAddress,
    CacheRealization,
    FileStore,
    PartitionEntry,
    StorageSetPartition,
    build_file_store,
    partition_by_storage_set,
    realization_from_addresses,
    realization_from_json,
    realization_to_json,
    storage_budget,
)
from .placement import (
    ExplicitSetsPlacement,
    PlacementPolicy,
    UniformRandomPlacement,
    WholeFilePrefixPlacement,
    empirical_marginals,
    policy_from_dict,
    sample_placement,
    validate_budget,
)
from .privacy import PrivacyTestResult, transcript_distribution_test
from .protocol import (
    QueryPlan,
    SumQuery,
    answer_queries,
    decode_desired,
    generate_query_plan,
    plan_transcripts,
    serialize_transcript,
    structural_privacy_histogram,
)
from .retrieval import (
    CostReport,
    RetrievalResult,
    SimulationResult,
    retrieve_file,
    simulate_trials,
)
from .rng import derive_seed, generator

__all__ = [name for name in dir() if not name.startswith("_")]
