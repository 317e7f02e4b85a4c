//! Information-constrained and entropic-regularized optimal transport against
//! a (quantized) Gaussian marginal, together with the rate-distortion curves
//! and truncated integrals that bound it from both sides.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`measure`] | discrete measures, couplings, monotone curves, Gaussian quantization |
//! | [`sinkhorn`] | log-domain Sinkhorn iteration against the product reference |
//! | [`eot`] | regularized value `f(beta)` and constrained value `w(R)` |
//! | [`rate_distortion`] | Blahut–Arimoto `r(sigma)` and the double-marginal curve `i(sigma)` |
//! | [`integrals`] | truncated rate-distortion integral, `phi`, tail integrals, bound reports |
//! | [`types`] | exact method-of-types combinatorics, cycle rounding, lifting simulation |
//! | [`oracles`] | closed-form Gaussian references |
//!
//! All logarithms are natural; information is measured in nats.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eot;
mod error;
pub mod exec;
pub mod integrals;
pub mod measure;
pub mod oracles;
pub mod quad;
pub mod rate_distortion;
pub mod sinkhorn;
pub mod types;

pub use error::{Error, Result};
pub use exec::Exec;
pub use measure::{CouplingMatrix, DiscreteMeasure, MonotoneCurve};
