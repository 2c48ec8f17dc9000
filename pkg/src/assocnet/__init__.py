"""Streaming Bayesian association networks from bipartite snapshot sequences.

Feed a time series of sparse bipartite snapshots (source nodes linking target
nodes) through a belief engine that keeps, for every unordered source pair, a
Beta distribution over the probability that a shared opportunity becomes an
actual co-occurrence. The posterior mean of that probability is the projected
association strength; the predictive distribution over future co-occurrence
counts scores competing forgetting rates when the generating process drifts.
"""

from .adaptive import (
    DEFAULT_KAPPA_GRID,
    DEFAULT_SCORE_DISCOUNT,
    BankStepResult,
    ChangepointReport,
    KappaFilterBank,
    changepoint_experiment,
)
from .errors import (
    AssocnetError,
    ConfigError,
    DataError,
    ParseError,
    SequencingError,
)
from .io import (
    ParsedStream,
    RunConfig,
    SnapshotRecord,
    export_frames,
    parse_snapshots,
    read_pair_records,
    write_snapshots,
)
from .model import (
    MIN_PSEUDOCOUNT,
    PairObservation,
    PairPosterior,
    PosteriorSummary,
    beta_binomial_log_pmf,
    beta_log_pdf,
    binomial_log_likelihood,
    expected_weight,
    ml_estimate,
    posterior_mean,
    summarize,
    update_cumulative,
    update_mixed,
)
from .projection import (
    BipartiteSnapshot,
    EngineState,
    NodeRegistry,
    PairActivity,
    ProjectionFrame,
    active_observations,
    co_occurrences,
    opportunities,
)
from .synth import (
    GeneratorConfig,
    SeedMatrix,
    builtin_seeds,
    generate,
    snapshot_at,
)

__version__ = "0.1.0"

__all__ = [
    "AssocnetError",
    "BankStepResult",
    "BipartiteSnapshot",
    "ChangepointReport",
    "ConfigError",
    "DataError",
    "DEFAULT_KAPPA_GRID",
    "DEFAULT_SCORE_DISCOUNT",
    "EngineState",
    "GeneratorConfig",
    "KappaFilterBank",
    "MIN_PSEUDOCOUNT",
    "NodeRegistry",
    "PairActivity",
    "PairObservation",
    "PairPosterior",
    "ParsedStream",
    "ParseError",
    "PosteriorSummary",
    "ProjectionFrame",
    "RunConfig",
    "SeedMatrix",
    "SequencingError",
    "SnapshotRecord",
    "active_observations",
    "beta_binomial_log_pmf",
    "beta_log_pdf",
    "binomial_log_likelihood",
    "builtin_seeds",
    "changepoint_experiment",
    "co_occurrences",
    "expected_weight",
    "export_frames",
    "generate",
    "ml_estimate",
    "opportunities",
    "parse_snapshots",
    "posterior_mean",
    "read_pair_records",
    "snapshot_at",
    "summarize",
    "update_cumulative",
    "update_mixed",
    "write_snapshots",
]
