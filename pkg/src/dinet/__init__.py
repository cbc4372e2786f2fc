"""Directed-information network inference from corrupt data-streams.

The package simulates networks of strictly causal finite-alphabet agents
with configurable stream corruption, predicts which spurious directed
edges the corruption induces, infers the directed graph from data with a
context-tree-weighting conditional directed-information estimator, and
cross-checks prediction against inference.
"""

from .errors import (
    ConfigError,
    DinetError,
    EstimationError,
    GraphError,
    ModelError,
    OracleError,
)
from .expressions import (
    Const,
    HeldStream,
    Noise,
    Op,
    OwnStream,
    Var,
    parse_corruption_expr,
    parse_rule_expr,
)
from .graphs import (
    DirectedGraph,
    GraphDiff,
    TimedNode,
    TrailQuery,
    UnrolledNetwork,
    corrupted_node,
    d_separated,
    find_active_trail,
    graph_to_dot,
    ideal_node,
    is_active_trail,
    perturbed_graph,
    predicted_vs_inferred,
    spurious_links,
    unroll_dbn,
    unroll_perturbed_dbn,
)
from .sim import (
    AgentRule,
    CorruptionSpec,
    CustomTable,
    GenerativeNetwork,
    ModQuantizer,
    NoiseLaw,
    NoisyFilter,
    PacketDrop,
    RandomDelay,
    RoundClipQuantizer,
    ThresholdQuantizer,
    TrajectorySet,
    apply_delay,
    apply_noisy_filter,
    apply_packet_drop,
    sample,
    sample_batch,
    write_trajectories_csv,
)

__version__ = "0.1.0"
