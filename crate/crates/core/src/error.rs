use thiserror::Error;

/// Errors raised while building or evaluating the microgrid model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("node id {node} out of range (graph has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },

    #[error("graph is disconnected: nodes {component:?} are not reachable from node 0")]
    Disconnected { component: Vec<usize> },

    #[error("edge id {edge} out of range ({edge_count} edges)")]
    EdgeOutOfRange { edge: usize, edge_count: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("edge {edge} has non-positive flow {flow} m^3/s; orientation must follow the water flow")]
    FlowNotAligned { edge: usize, flow: f64 },

    #[error("mass balance violated at node {node}: residual {residual} m^3/s")]
    MassImbalance { node: usize, residual: f64 },

    #[error("crossing node {node} has zero total outflow")]
    ZeroOutflow { node: usize },

    #[error("crossing node {node} has no {side} edge")]
    DanglingCrossing { node: usize, side: &'static str },

    #[error("edge {edge} connects two crossings ({from} -> {to}); cascaded crossings are not supported")]
    CascadedCrossing { edge: usize, from: usize, to: usize },

    #[error("edge {edge} has role conflict: {reason}")]
    EdgeRole { edge: usize, reason: String },

    #[error("dimension mismatch in {block}: expected {expected}, got {actual}")]
    Dimension { block: String, expected: usize, actual: usize },

    #[error("singular matrix in {context}")]
    Singular { context: String },

    #[error("power imbalance of {residual} MW exceeds tolerance")]
    Imbalance { residual: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter { name: name.to_string(), reason: reason.into() }
}

pub(crate) fn check_dim(block: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(ModelError::Dimension { block: block.to_string(), expected, actual });
    }
    Ok(())
}
