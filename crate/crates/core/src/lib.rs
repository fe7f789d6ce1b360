//! Inner estimates of the domain of attraction of an asymptotically stable
//! fixed point of a discrete map `x ↦ f(x)` with `f(0) = 0`.
//!
//! The pipeline runs from the Jacobian at the origin ([`linalg`]) to a ball
//! around the origin on which the norm decreases ([`radius`]), then to grid
//! estimates built from that ball ([`estimates`]). The [`oracle`] module
//! supplies brute-force ground truth, and [`series1d`] grows the estimate of a
//! 1-D basin by analytic continuation of the Lyapunov function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod estimates;
pub mod json;
pub mod linalg;
pub mod oracle;
pub mod radius;
pub mod scalar;
pub mod series1d;
pub mod systems;

pub use analysis::{analyze, AnalysisReport};
pub use systems::DiscreteSystem;
