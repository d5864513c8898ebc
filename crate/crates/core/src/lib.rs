//! Counterfactual regression regularized by optimal transport between treatment
//! groups in representation space.
//!
//! * [`ot`] balanced and KL-relaxed entropic solvers plus an exact oracle.
//! * [`geometry`] representation costs and the outcome-calibrated cost.
//! * [`nn`] the two-headed outcome network and its gradients.
//! * [`training`] the batch objective, Adam, early stopping.
//! * [`eval`], [`baselines`], [`data`] metrics, reference estimators, datasets.
//!
//! Transport code is generic over [`Scalar`] (`f32`/`f64`); the network and
//! training loop run in `f64`. Aliases below fix the common case.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod ot;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TransportPlan64 = ot::TransportPlan<f64>;
pub type TransportPlan32 = ot::TransportPlan<f32>;
pub type CostMatrix64 = ot::CostMatrix<f64>;
pub type CostMatrix32 = ot::CostMatrix<f32>;
pub type SolverConfig64 = ot::SolverConfig<f64>;
pub type SolverConfig32 = ot::SolverConfig<f32>;
pub type DiscreteMeasure64 = ot::DiscreteMeasure<f64>;
pub type DiscreteMeasure32 = ot::DiscreteMeasure<f32>;
