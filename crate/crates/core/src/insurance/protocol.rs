//! The certificate lifecycle and per-transaction settlement rules.
//!
//! A certificate moves `Active → {Expired, Revoked} → Cleared`. Leaving
//! `Active` opens a clearing window of length `T_c`; transactions shipped
//! before that moment still settle against the deposit until the window
//! closes, after which the residual deposit is returned.

use serde::{Deserialize, Serialize};

use crate::error::{ParamError, ProtocolError};
use crate::market::{MarketParams, Rating, ReputationProfile};

/// The `(C_I, T_d, T_c, D_I)` contract plus its revocation threshold `Ď_I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsurancePolicy {
    /// `C_I`
    pub price: f64,
    /// `T_d` in days; zero makes the policy a no-op.
    pub duration: f64,
    /// `T_c` in days.
    pub clearing: f64,
    /// `D_I`
    pub deposit: f64,
    /// `Ď_I`: the certificate is revoked once the deposit falls to this level.
    pub revoke_threshold: f64,
}

impl InsurancePolicy {
    /// `C_I = 100, T_d = 100, T_c = 3, D_I = 100, Ď_I = 50`.
    pub fn reference() -> Self {
        Self {
            price: 100.0,
            duration: 100.0,
            clearing: 3.0,
            deposit: 100.0,
            revoke_threshold: 50.0,
        }
    }

    /// Checks the contract on its own.
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.price >= 0.0) || !self.price.is_finite() {
            return Err(ParamError::new(
                "price",
                format!("must be nonnegative, got {}", self.price),
            ));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(ParamError::new(
                "duration",
                format!("must be nonnegative and finite, got {}", self.duration),
            ));
        }
        if !(self.clearing > 0.0) || !self.clearing.is_finite() {
            return Err(ParamError::new(
                "clearing",
                format!("must be positive, got {}", self.clearing),
            ));
        }
        if !(self.deposit > 0.0) || !self.deposit.is_finite() {
            return Err(ParamError::new(
                "deposit",
                format!("must be positive, got {}", self.deposit),
            ));
        }
        if !(self.revoke_threshold >= 0.0 && self.revoke_threshold < self.deposit) {
            return Err(ParamError::new(
                "revoke_threshold",
                format!(
                    "need 0 <= threshold < deposit, got {}",
                    self.revoke_threshold
                ),
            ));
        }
        Ok(())
    }

    /// Checks the contract against a market: the clearing window must cover
    /// one shipment delay so every insured sale settles before clearing.
    pub fn validate_for(&self, params: &MarketParams) -> Result<(), ParamError> {
        self.validate()?;
        if self.clearing < params.slot_length {
            return Err(ParamError::new(
                "clearing",
                format!(
                    "clearing time {} is shorter than the shipment delay {}",
                    self.clearing, params.slot_length
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateStatus {
    Active,
    Expired,
    Revoked,
    Cleared,
}

/// Why a certificate was revoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevocationCause {
    DepositThreshold,
    Consistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateState {
    pub status: CertificateStatus,
    pub remaining_deposit: f64,
    pub issued_at: f64,
    /// When the certificate stopped being `Active`.
    pub left_active_at: Option<f64>,
    pub revocation: Option<RevocationCause>,
    /// Profile seen at the last consistency review.
    pub profile_snapshot: ReputationProfile,
    /// Return costs the operator covered after the deposit ran out.
    pub supplemental: f64,
    /// Deposit returned to the seller at clearing.
    pub refunded: f64,
}

impl CertificateState {
    /// Issues a certificate; only sellers without any history are eligible.
    pub fn issue(
        policy: &InsurancePolicy,
        profile: &ReputationProfile,
        now: f64,
    ) -> Result<Self, ProtocolError> {
        if *profile != ReputationProfile::default() {
            return Err(ProtocolError::NotEligible);
        }
        Ok(Self {
            status: CertificateStatus::Active,
            remaining_deposit: policy.deposit,
            issued_at: now,
            left_active_at: None,
            revocation: None,
            profile_snapshot: *profile,
            supplemental: 0.0,
            refunded: 0.0,
        })
    }

    pub fn expires_at(&self, policy: &InsurancePolicy) -> f64 {
        self.issued_at + policy.duration
    }

    /// End of the clearing window, once the certificate has left `Active`.
    pub fn closes_at(&self, policy: &InsurancePolicy) -> Option<f64> {
        self.left_active_at.map(|t| t + policy.clearing)
    }

    /// True while sales shipped at `t` are backed by this certificate.
    pub fn covers(&self, t: f64) -> bool {
        match self.status {
            CertificateStatus::Active => true,
            CertificateStatus::Cleared => false,
            _ => self.left_active_at.is_some_and(|left| t < left),
        }
    }

    fn revoke(&mut self, now: f64, cause: RevocationCause) {
        self.status = CertificateStatus::Revoked;
        self.left_active_at = Some(now);
        self.revocation = Some(cause);
    }
}

/// Money movements of one settled transaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlementOutcome {
    pub seller_payout: f64,
    pub operator_fee: f64,
    pub buyer_refund: f64,
    /// Taken from the seller's deposit.
    pub deposit_deduction: f64,
    /// Return cost the operator paid because the deposit was exhausted.
    pub supplemental_payment: f64,
}

impl SettlementOutcome {
    /// Ordinary settlement without insurance involvement.
    pub fn uninsured(params: &MarketParams) -> Self {
        Self {
            seller_payout: params.pricing.seller_payout(),
            operator_fee: params.fee(),
            buyer_refund: 0.0,
            deposit_deduction: 0.0,
            supplemental_payment: 0.0,
        }
    }
}

/// Settles one insured transaction at time `now` once its feedback arrives.
///
/// A negative rating revokes the sale: the buyer gets `p` back and the
/// return shipment `C_S` is charged to the deposit (the operator covers any
/// shortfall). The certificate is revoked when the deposit reaches `Ď_I`.
pub fn settle_transaction(
    state: &CertificateState,
    rating: Rating,
    now: f64,
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<(CertificateState, SettlementOutcome), ProtocolError> {
    if state.status == CertificateStatus::Cleared {
        return Err(ProtocolError::InvalidTransition {
            status: state.status,
            action: "settlement",
        });
    }
    let mut next = *state;
    if rating != Rating::Negative {
        return Ok((next, SettlementOutcome::uninsured(params)));
    }

    let cost = params.shipment_cost;
    let deduction = cost.min(next.remaining_deposit);
    let shortfall = cost - deduction;
    next.remaining_deposit -= deduction;
    next.supplemental += shortfall;
    if next.status == CertificateStatus::Active && next.remaining_deposit <= policy.revoke_threshold
    {
        next.revoke(now, RevocationCause::DepositThreshold);
    }
    let outcome = SettlementOutcome {
        seller_payout: 0.0,
        operator_fee: 0.0,
        buyer_refund: params.price(),
        deposit_deduction: deduction,
        supplemental_payment: shortfall,
    };
    Ok((next, outcome))
}

/// End-of-slot consistency review: an active certificate is revoked once
/// the positive fraction of the seller's feedback falls below `θ`.
pub fn review_consistency(
    state: &CertificateState,
    profile: &ReputationProfile,
    theta: f64,
    now: f64,
) -> CertificateState {
    let mut next = *state;
    next.profile_snapshot = *profile;
    if next.status == CertificateStatus::Active
        && profile.total() > 0
        && profile.positive_fraction() < theta
    {
        next.revoke(now, RevocationCause::Consistency);
    }
    next
}

/// Advances the certificate by time alone.
///
/// An active certificate past its duration expires (and is left unchanged
/// before that). An expired or revoked one is cleared once the window has
/// closed, refunding the residual deposit; asking earlier is an error.
pub fn expire_and_clear(
    state: &CertificateState,
    now: f64,
    policy: &InsurancePolicy,
) -> Result<CertificateState, ProtocolError> {
    let mut next = *state;
    match state.status {
        CertificateStatus::Active => {
            let expiry = state.expires_at(policy);
            if now >= expiry {
                next.status = CertificateStatus::Expired;
                next.left_active_at = Some(expiry);
            }
            Ok(next)
        }
        CertificateStatus::Expired | CertificateStatus::Revoked => {
            let closes_at = state.closes_at(policy).unwrap_or(f64::INFINITY);
            if now < closes_at {
                return Err(ProtocolError::PrematureClearing { now, closes_at });
            }
            next.status = CertificateStatus::Cleared;
            next.refunded = next.remaining_deposit;
            next.remaining_deposit = 0.0;
            Ok(next)
        }
        CertificateStatus::Cleared => Err(ProtocolError::InvalidTransition {
            status: state.status,
            action: "clearing",
        }),
    }
}
