//! Three-weight message passing over dynamic factor graphs.
//!
//! A [`FactorGraph`] holds variables, factors and the edges between them.
//! An [`Engine`] iterates over the graph, running factor minimizations,
//! variable concurrence and the attached local and global reasoners, and
//! applies graph edits between iterations.

mod arena;
pub mod engine;
pub mod factor;
pub mod graph;
pub mod messages;
pub mod reasoner;
pub mod schedule;
pub mod weight;

pub use engine::{Engine, EngineConfig, EngineError, IterationStatus, PhaseTimings};
pub use factor::{ConstantFactor, EqualityFactor, Factor, FactorError, MinimizeContext, PriorFactor};
pub use graph::{
    EdgeId, EdgeState, EditReport, FactorGraph, FactorId, FactorNode, GraphCounts, GraphEdit, GraphError, VariableId,
    VariableNode,
};
pub use reasoner::{EmissionRequest, GlobalContext, GlobalReasoner, LocalReasoner, LocalReasonerId, LocalView, Outbox};
pub use weight::{InvalidWeight, Message, WeightClass};
