//! Bounds on the insurance price, the deposit and the clearing time.

use crate::analytics::{long_term_profit, ProfitMethod};
use crate::error::{AnalyticsError, NumericsError};
use crate::market::{transaction_rate, MarketParams, ParamWarning, SellerLabel};

use super::{insured_long_term_profit, InsurancePolicy};

/// `G_s^I - G_s`. Any price strictly below this leaves an honest seller
/// better off insured.
pub fn max_insurance_price(
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<f64, AnalyticsError> {
    let insured = insured_long_term_profit(params, policy, ProfitMethod::ReducedQuadrature)?;
    let baseline = long_term_profit(params, ProfitMethod::ReducedQuadrature)?;
    Ok(insured.value - baseline.value)
}

/// `C_S · max(ln(1/ε) - λ2·P_br·T_d, e²·λ2·P_br·T_d)`.
///
/// With `Ď_I` at least this large, the return shipments of an insured
/// seller exhaust the threshold with probability at most `ε` (Chernoff
/// bound on the Poisson count of returns during `T_d`).
pub fn min_deposit_threshold(
    epsilon: f64,
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<f64, AnalyticsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(
            NumericsError::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")).into(),
        );
    }
    let mean = transaction_rate(params, SellerLabel::Insured) * policy.duration;
    let e2 = std::f64::consts::E * std::f64::consts::E;
    Ok(params.shipment_cost * ((1.0 / epsilon).ln() - mean).max(e2 * mean))
}

/// Warns when the policy's revocation threshold is below the deposit bound.
pub fn deposit_bound_warning(
    epsilon: f64,
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<Option<ParamWarning>, AnalyticsError> {
    let bound = min_deposit_threshold(epsilon, params, policy)?;
    Ok((policy.revoke_threshold < bound).then(|| ParamWarning {
        field: "revoke_threshold",
        message: format!(
            "revoke threshold {} (deposit {}) is below the bound {bound:.6} for epsilon = {epsilon}",
            policy.revoke_threshold, policy.deposit
        ),
    }))
}

/// The clearing window must last at least one shipment delay.
pub fn min_clearing_time(params: &MarketParams) -> f64 {
    params.slot_length
}
