//! Small reverse-mode network engine: a DAG of layers over batched tensors,
//! flat parameter storage and exact analytic gradients.

mod engine;
mod graph;
mod params;
mod tensor;

use alloc::string::String;

pub use engine::{backward, forward, predict, softmax_in_place, ForwardCache, GradAt, Mode};
pub use graph::{param_count, Activation, LayerSpec, NetworkGraph, Node, ParamCounts, INPUT_ID};
pub use params::{init_network, Param, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("shape mismatch at node {0}")]
    ShapeMismatch(usize),
    #[error("parameters do not match the graph at node {0}")]
    ParamMismatch(usize),
    #[error("expected {expected} parameter values, found {found}")]
    ParamLength { expected: usize, found: usize },
    #[error("non-finite values at node {0}")]
    NonFinite(usize),
    #[error("activation cache does not belong to these parameters")]
    StaleCache,
}
