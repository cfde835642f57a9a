"""Random-walk candidate retrieval over a weighted interaction graph."""
from .builder import (
    CollatedPair,
    Interaction,
    InteractionRecord,
    ListingMeta,
    LogParseError,
    WeightCoefficients,
    build_graph,
    collate,
    edge_weight,
    normalize_query,
    parse_interaction_log,
)
from .model import (
    BadMagicError,
    CsrGraph,
    GraphError,
    GraphLoadError,
    GraphValidationError,
    NodeKind,
    NodeRef,
    TruncatedStreamError,
    UnsupportedVersionError,
    deserialize_graph,
    edge_probability,
    graphs_equal,
    lookup_node,
    serialize_graph,
    validate_graph,
)
from .sampling import (
    DeadEndError,
    EdgeCounter,
    ProbeStats,
    SamplerConfig,
    its_sample,
    mh_step,
    sample_edges,
)
from .walks import (
    ColdStartError,
    RankedResult,
    WalkParams,
    batch_retrieve,
    derive_query_seed,
    retrieve,
    xwalk_bfs,
)

__version__ = "0.1.0"
