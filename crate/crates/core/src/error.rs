use thiserror::Error;

use crate::insurance::CertificateStatus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
}

/// A market or policy parameter violates its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter `{field}`: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub(crate) fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    /// The expectation being evaluated is infinite.
    #[error("divergent expectation: {0}")]
    Divergent(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("certificate is {status:?}; {action} is not allowed")]
    InvalidTransition {
        status: CertificateStatus,
        action: &'static str,
    },
    #[error("clearing requested at day {now} before the window closes at day {closes_at}")]
    PrematureClearing { now: f64, closes_at: f64 },
    #[error("only sellers with an empty reputation profile may subscribe")]
    NotEligible,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(
        "horizon of {horizon_slots} slots is too short: {count} run(s) never ramped up (first: {first:?})"
    )]
    HorizonTooShort {
        horizon_slots: u64,
        count: usize,
        first: Vec<u64>,
    },
    #[error("audit failed in run {run}, slot {slot}: {reason}")]
    AuditFailure { run: u64, slot: u64, reason: String },
}
