//! Analytics and simulation of reputation ramp-up for new marketplace sellers,
//! with and without a deposit-backed insurance certificate.
//!
//! - [`numerics`]: Poisson/Erlang kernels, slot discounting, quadrature.
//! - [`market`]: parameters, feedback and reputation rules, transaction rates.
//! - [`analytics`]: expected ramp-up time, drop-out probability, long-term gains.
//! - [`insurance`]: the certificate protocol, insured measures, pricing bounds.
//! - [`simulator`]: slot-level Monte Carlo of seller lifetimes.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
mod error;
pub mod insurance;
pub mod market;
pub mod numerics;
pub mod simulator;
pub mod stats;

pub use error::{AnalyticsError, NumericsError, ParamError, ProtocolError, SimError};
