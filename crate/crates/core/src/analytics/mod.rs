//! Closed-form and quadrature evaluators for the baseline reputation system:
//! expected ramp-up time, drop-out probability and discounted long-term gains
//! of an honest new seller.

pub(crate) mod reduction;

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;
use crate::market::{transaction_rate, MarketParams, SellerLabel};
use crate::numerics::{poisson_cdf, DiscountSpec};
use crate::stats::EstimateWithCI;

use reduction::{ArrivalProfile, SalesModel};

/// Numerical knobs shared by the evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSettings {
    /// The ramp-up series stops once `P[T_r/d ≥ τ]` drops below this.
    pub survival_cutoff: f64,
    /// Absolute tolerance of the outer ramp-up integral.
    pub quadrature_tol: f64,
}

impl Default for AnalyticsSettings {
    fn default() -> Self {
        Self {
            survival_cutoff: 1e-12,
            quadrature_tol: 1e-8,
        }
    }
}

/// How to evaluate the long-term gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfitMethod {
    /// One-dimensional reduction plus adaptive quadrature; exact up to tolerance.
    ReducedQuadrature,
    /// Direct sampling of arrival times; deterministic for a fixed seed.
    MonteCarlo { samples: u64, seed: u64 },
}

/// A gain value with its Monte Carlo standard error (zero for quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMeasures {
    /// Infinite for a seller who never sells.
    pub expected_ramp_up_days: f64,
    pub drop_out_prob: f64,
    pub seller_gain: f64,
    pub operator_gain: f64,
}

const MAX_RAMP_SLOTS: u64 = 50_000_000;

/// `d · Σ_{τ≥1} P[Poisson(Λ_{τ-1}) < r_h]`, where `cumulative(n)` is the
/// expected number of sales in the first `n` slots.
///
/// Reputation in slot `τ` counts sales of slots `0..τ-1`, so `T_r ≥ d`.
pub(crate) fn ramp_up_series<F: Fn(u64) -> f64>(
    cumulative: F,
    final_rate_per_slot: f64,
    threshold: u64,
    slot_length: f64,
    cutoff: f64,
) -> Result<f64, AnalyticsError> {
    let mut survival_sum = 0.0;
    for tau in 1..=MAX_RAMP_SLOTS {
        let mean = cumulative(tau - 1);
        let survival = poisson_cdf(threshold as i64 - 1, mean)?;
        survival_sum += survival;
        if survival < cutoff {
            return Ok(slot_length * survival_sum);
        }
        if final_rate_per_slot <= 0.0 && tau > 1 && mean == cumulative(tau - 2) {
            return Err(AnalyticsError::Divergent(format!(
                "sales stop after {} expected transactions; ramp-up is never certain",
                mean
            )));
        }
    }
    Err(AnalyticsError::Divergent(format!(
        "ramp-up series did not converge within {MAX_RAMP_SLOTS} slots"
    )))
}

/// `E[T_r]` in days.
pub fn expected_ramp_up_time(params: &MarketParams) -> Result<f64, AnalyticsError> {
    expected_ramp_up_time_with(params, &AnalyticsSettings::default())
}

pub fn expected_ramp_up_time_with(
    params: &MarketParams,
    settings: &AnalyticsSettings,
) -> Result<f64, AnalyticsError> {
    params.validate()?;
    let per_slot = transaction_rate(params, SellerLabel::Average) * params.slot_length;
    if per_slot <= 0.0 {
        return Err(AnalyticsError::Divergent(
            "a seller with no transactions never ramps up".into(),
        ));
    }
    ramp_up_series(
        |slots| per_slot * slots as f64,
        per_slot,
        params.reputation_threshold,
        params.slot_length,
        settings.survival_cutoff,
    )
}

/// `P_d = P[fewer than r_h sales in [0, T_w)]`.
pub fn drop_out_probability(params: &MarketParams) -> Result<f64, AnalyticsError> {
    params.validate()?;
    let mean = transaction_rate(params, SellerLabel::Average) * params.patience;
    Ok(poisson_cdf(params.reputation_threshold as i64 - 1, mean)?)
}

pub(crate) fn baseline_sales_model(params: &MarketParams) -> Result<SalesModel, AnalyticsError> {
    Ok(SalesModel {
        profile: ArrivalProfile::constant(transaction_rate(params, SellerLabel::Average)),
        reputable_rate: transaction_rate(params, SellerLabel::Reputable),
        threshold: params.reputation_threshold,
        patience: params.patience,
        discount: DiscountSpec::new(params.gain_discount, params.slot_length)?,
    })
}

pub(crate) fn evaluate_sales(
    model: &SalesModel,
    method: ProfitMethod,
    settings: &AnalyticsSettings,
) -> Result<EstimateWithCI, AnalyticsError> {
    match method {
        ProfitMethod::ReducedQuadrature => Ok(EstimateWithCI::exact(
            model.expected_sales(settings.quadrature_tol)?,
        )),
        ProfitMethod::MonteCarlo { samples, seed } => model.expected_sales_mc(samples, seed),
    }
}

/// `G_s`: expected discounted profit of an honest new seller.
pub fn long_term_profit(
    params: &MarketParams,
    method: ProfitMethod,
) -> Result<GainEstimate, AnalyticsError> {
    long_term_profit_with(params, method, &AnalyticsSettings::default())
}

pub fn long_term_profit_with(
    params: &MarketParams,
    method: ProfitMethod,
    settings: &AnalyticsSettings,
) -> Result<GainEstimate, AnalyticsError> {
    params.validate()?;
    let sales = evaluate_sales(&baseline_sales_model(params)?, method, settings)?;
    let u = params.unit_profit();
    Ok(GainEstimate {
        value: u * sales.mean,
        stderr: u.abs() * sales.stderr,
    })
}

/// `G_e = (αp/u)·G_s`; with zero unit profit the fee is applied to the
/// discounted sales directly.
pub(crate) fn operator_gain(params: &MarketParams, seller_gain: f64, discounted_sales: f64) -> f64 {
    let u = params.unit_profit();
    if u != 0.0 {
        params.fee() / u * seller_gain
    } else {
        params.fee() * discounted_sales
    }
}

/// Maps a divergent expectation to `+∞`.
pub(crate) fn infinite_if_divergent(v: Result<f64, AnalyticsError>) -> Result<f64, AnalyticsError> {
    match v {
        Err(AnalyticsError::Divergent(_)) => Ok(f64::INFINITY),
        v => v,
    }
}

pub fn baseline_measures(params: &MarketParams) -> Result<BaselineMeasures, AnalyticsError> {
    let settings = AnalyticsSettings::default();
    params.validate()?;
    let sales = baseline_sales_model(params)?.expected_sales(settings.quadrature_tol)?;
    let seller_gain = params.unit_profit() * sales;
    Ok(BaselineMeasures {
        expected_ramp_up_days: infinite_if_divergent(expected_ramp_up_time_with(
            params, &settings,
        ))?,
        drop_out_prob: drop_out_probability(params)?,
        seller_gain,
        operator_gain: operator_gain(params, seller_gain, sales),
    })
}
