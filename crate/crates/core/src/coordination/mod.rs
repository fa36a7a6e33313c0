//! Distributed long-term layer: adjacency graph, random maximal matchings,
//! pairwise threshold negotiation over a simulated message bus and the
//! alternating optimisation loop.

pub mod ao;
pub mod bus;
pub mod graph;
pub mod ipc;
pub mod matching;

pub use ao::{ao_run, evaluate_distributed, AoConfig, AoState, CoordinationTrace, EvaluationRecord, TraceEvent};
pub use bus::{BusMessage, MessageBus, MessageKind};
pub use graph::AdjacencyGraph;
pub use ipc::{ipc_candidates, pairwise_search, PairDecision, PairEnv, RateCache};
pub use matching::{is_maximal_matching, random_maximal_matching};
