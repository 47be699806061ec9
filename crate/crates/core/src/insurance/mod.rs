//! Deposit-backed insurance for new sellers: the certificate protocol, the
//! measures of an insured seller and the pricing and deposit bounds.

mod measures;
mod pricing;
mod protocol;

pub use measures::{
    insured_drop_out_probability, insured_long_term_profit, insured_measures, insured_ramp_up_time,
    insured_ramp_up_time_with, insured_slot_rate, InsuredMeasures,
};
pub use pricing::{
    deposit_bound_warning, max_insurance_price, min_clearing_time, min_deposit_threshold,
};
pub use protocol::{
    expire_and_clear, review_consistency, settle_transaction, CertificateState, CertificateStatus,
    InsurancePolicy, RevocationCause, SettlementOutcome,
};
