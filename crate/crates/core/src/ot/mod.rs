//! Discrete optimal transport: exact oracle, entropic Sinkhorn, and the
//! KL-relaxed generalized Sinkhorn.

mod exact;
mod sinkhorn;
mod types;

pub use exact::{exact_transport, EXACT_MAX_SIDE};
pub use sinkhorn::{sinkhorn_plan, unbalanced_sinkhorn_plan};
pub use types::{
    plan_cost_and_marginals, CostMatrix, DiscreteMeasure, Relaxation, SolverConfig, TransportPlan,
};
