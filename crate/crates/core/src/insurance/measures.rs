//! Ramp-up time, drop-out probability and gains of an honest insured seller.
//!
//! The certificate makes buyers treat the seller as reputable for `T_d`
//! days, so the pre-ramp intensity is `λ2·P_br` on `[0, T_d)` and `λ1·P_ba`
//! afterwards. The evaluators assume the certificate runs its full duration,
//! which is what happens to an honest seller.

use serde::{Deserialize, Serialize};

use crate::analytics::reduction::{ArrivalProfile, SalesModel};
use crate::analytics::{
    evaluate_sales, infinite_if_divergent, operator_gain, ramp_up_series, AnalyticsSettings,
    GainEstimate, ProfitMethod,
};
use crate::error::AnalyticsError;
use crate::market::{transaction_rate, MarketParams, SellerLabel};
use crate::numerics::{poisson_cdf, DiscountSpec};

use super::InsurancePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsuredMeasures {
    /// Infinite for a seller who never sells.
    pub expected_ramp_up_days: f64,
    pub drop_out_prob: f64,
    pub seller_gain: f64,
    pub operator_gain: f64,
}

fn check(params: &MarketParams, policy: &InsurancePolicy) -> Result<(), AnalyticsError> {
    params.validate()?;
    policy.validate_for(params)?;
    Ok(())
}

/// Pre-ramp transaction intensity of an insured seller.
pub(crate) fn insured_profile(params: &MarketParams, policy: &InsurancePolicy) -> ArrivalProfile {
    ArrivalProfile::switching(
        transaction_rate(params, SellerLabel::Insured),
        policy.duration,
        transaction_rate(params, SellerLabel::Average),
    )
}

/// Expected transactions of an unramped insured seller in slot `slot`.
///
/// The slot containing `T_d` mixes the two rates in proportion to the time
/// spent on either side of it.
pub fn insured_slot_rate(params: &MarketParams, policy: &InsurancePolicy, slot: u64) -> f64 {
    let d = params.slot_length;
    let insured = transaction_rate(params, SellerLabel::Insured);
    let average = transaction_rate(params, SellerLabel::Average);
    let boundary = (policy.duration / d).floor();
    let l = slot as f64;
    if l < boundary {
        insured * d
    } else if l == boundary {
        insured * (policy.duration - d * boundary) + average * (d * boundary + d - policy.duration)
    } else {
        average * d
    }
}

pub fn insured_ramp_up_time(
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<f64, AnalyticsError> {
    insured_ramp_up_time_with(params, policy, &AnalyticsSettings::default())
}

pub fn insured_ramp_up_time_with(
    params: &MarketParams,
    policy: &InsurancePolicy,
    settings: &AnalyticsSettings,
) -> Result<f64, AnalyticsError> {
    check(params, policy)?;
    let profile = insured_profile(params, policy);
    let d = params.slot_length;
    if profile.cumulative(policy.duration) <= 0.0 && profile.final_rate() <= 0.0 {
        return Err(AnalyticsError::Divergent(
            "a seller with no transactions never ramps up".into(),
        ));
    }
    ramp_up_series(
        |slots| profile.cumulative(slots as f64 * d),
        profile.final_rate() * d,
        params.reputation_threshold,
        d,
        settings.survival_cutoff,
    )
}

pub fn insured_drop_out_probability(
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<f64, AnalyticsError> {
    check(params, policy)?;
    let mean: f64 = (0..params.patience_slots()?)
        .map(|l| insured_slot_rate(params, policy, l))
        .sum();
    Ok(poisson_cdf(params.reputation_threshold as i64 - 1, mean)?)
}

fn insured_sales_model(
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<SalesModel, AnalyticsError> {
    Ok(SalesModel {
        profile: insured_profile(params, policy),
        reputable_rate: transaction_rate(params, SellerLabel::Reputable),
        threshold: params.reputation_threshold,
        patience: params.patience,
        discount: DiscountSpec::new(params.gain_discount, params.slot_length)?,
    })
}

/// `G_s^I`, excluding the insurance price.
pub fn insured_long_term_profit(
    params: &MarketParams,
    policy: &InsurancePolicy,
    method: ProfitMethod,
) -> Result<GainEstimate, AnalyticsError> {
    check(params, policy)?;
    let settings = AnalyticsSettings::default();
    let sales = evaluate_sales(&insured_sales_model(params, policy)?, method, &settings)?;
    let u = params.unit_profit();
    Ok(GainEstimate {
        value: u * sales.mean,
        stderr: u.abs() * sales.stderr,
    })
}

pub fn insured_measures(
    params: &MarketParams,
    policy: &InsurancePolicy,
) -> Result<InsuredMeasures, AnalyticsError> {
    check(params, policy)?;
    let settings = AnalyticsSettings::default();
    let sales = insured_sales_model(params, policy)?.expected_sales(settings.quadrature_tol)?;
    let seller_gain = params.unit_profit() * sales;
    Ok(InsuredMeasures {
        expected_ramp_up_days: infinite_if_divergent(insured_ramp_up_time_with(
            params, policy, &settings,
        ))?,
        drop_out_prob: insured_drop_out_probability(params, policy)?,
        seller_gain,
        operator_gain: operator_gain(params, seller_gain, sales),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{
        baseline_measures, drop_out_probability, expected_ramp_up_time, long_term_profit,
    };
    use crate::market::AdoptionModel;
    use proptest::prelude::*;

    fn config(r_h: u64) -> (MarketParams, InsurancePolicy) {
        let mut p = MarketParams::reference();
        p.reputation_threshold = r_h;
        (p, InsurancePolicy::reference())
    }

    #[test]
    fn ramp_up_cells() {
        let (p, policy) = config(100);
        assert!((insured_ramp_up_time(&p, &policy).unwrap() - 21.5).abs() < 0.1);
        let (p, policy) = config(200);
        assert!((insured_ramp_up_time(&p, &policy).unwrap() - 41.5).abs() < 0.1);
    }

    #[test]
    fn drop_out_vanishes() {
        let (p, policy) = config(100);
        assert!(insured_drop_out_probability(&p, &policy).unwrap() < 1e-12);
    }

    #[test]
    fn gain_cells() {
        for (r_h, expected) in [(100, 1485.04), (200, 1485.01)] {
            let (p, policy) = config(r_h);
            let g = insured_long_term_profit(&p, &policy, ProfitMethod::ReducedQuadrature).unwrap();
            assert!(
                (g.value / expected - 1.0).abs() < 0.005,
                "{r_h}: {}",
                g.value
            );
        }
    }

    #[test]
    fn zero_duration_is_the_baseline() {
        let (p, mut policy) = config(150);
        policy.duration = 0.0;
        let base = baseline_measures(&p).unwrap();
        let ins = insured_measures(&p, &policy).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        assert!(close(
            ins.expected_ramp_up_days,
            expected_ramp_up_time(&p).unwrap()
        ));
        assert!(close(ins.drop_out_prob, drop_out_probability(&p).unwrap()));
        assert!(close(ins.seller_gain, base.seller_gain));
        assert!(close(ins.operator_gain, base.operator_gain));
        let g = long_term_profit(&p, ProfitMethod::ReducedQuadrature).unwrap();
        assert!(close(g.value, ins.seller_gain));
    }

    #[test]
    fn both_rates_zero_diverges() {
        let (mut p, policy) = config(100);
        p.adoption = AdoptionModel::Tabulated {
            p_ba: 0.0,
            p_br: 0.0,
        };
        assert!(matches!(
            insured_ramp_up_time(&p, &policy),
            Err(AnalyticsError::Divergent(_))
        ));
        let m = insured_measures(&p, &policy).unwrap();
        assert_eq!(m.expected_ramp_up_days, f64::INFINITY);
        assert_eq!(m.drop_out_prob, 1.0);
        assert_eq!(m.seller_gain, 0.0);
    }

    #[test]
    fn operator_gain_tracks_seller_gain() {
        let (p, policy) = config(150);
        let m = insured_measures(&p, &policy).unwrap();
        assert_eq!(m.operator_gain, p.fee() / p.unit_profit() * m.seller_gain);
    }

    proptest! {
        #[test]
        fn slot_rates_sum_to_piecewise_mean(duration in 0.0..400.0f64, slots in 1u64..120, p_ba in 0.0..0.1f64) {
            let (mut p, mut policy) = config(100);
            p.adoption = AdoptionModel::Tabulated { p_ba, p_br: 0.1 };
            p.patience = slots as f64 * p.slot_length;
            policy.duration = duration;
            let sum: f64 = (0..slots).map(|l| insured_slot_rate(&p, &policy, l)).sum();
            let (r, a) = (transaction_rate(&p, SellerLabel::Insured), transaction_rate(&p, SellerLabel::Average));
            let tw = p.patience;
            let direct = r * duration.min(tw) + a * (tw - duration).max(0.0);
            prop_assert!((sum - direct).abs() <= 1e-9 * direct.max(1.0));
        }

        #[test]
        fn insurance_never_hurts(r_h in 20u64..200, duration in 0.0..300.0f64, p_ba in 0.005..0.05f64) {
            let (mut p, mut policy) = config(r_h);
            p.adoption = AdoptionModel::Tabulated { p_ba, p_br: 0.1 };
            policy.duration = duration;
            let base_drop = drop_out_probability(&p).unwrap();
            let ins_drop = insured_drop_out_probability(&p, &policy).unwrap();
            prop_assert!(ins_drop <= base_drop + 1e-15);
            let base = expected_ramp_up_time(&p).unwrap();
            let ins = insured_ramp_up_time(&p, &policy).unwrap();
            prop_assert!(ins <= base + 1e-9 * base);
        }
    }
}
