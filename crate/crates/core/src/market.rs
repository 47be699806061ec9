//! Marketplace domain types and the deterministic rules that drive a seller's
//! reputation: unit profit, feedback ratings, profile updates, the reputable
//! label, buyers' quality estimate and the resulting transaction rates.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// How per-sale money is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pricing {
    /// Price `p`, manufacturing cost `c` and the operator's fee fraction `α`.
    Product {
        price: f64,
        cost: f64,
        fee_fraction: f64,
    },
    /// Unit profit `u` and per-sale fee `T = αp` given directly. The implied
    /// price is `u + T` (zero manufacturing cost).
    Direct { unit_profit: f64, fee: f64 },
}

impl Pricing {
    pub fn unit_profit(&self) -> f64 {
        match *self {
            Pricing::Product {
                price,
                cost,
                fee_fraction,
            } => (1.0 - fee_fraction) * price - cost,
            Pricing::Direct { unit_profit, .. } => unit_profit,
        }
    }

    /// Operator fee per completed sale, `αp`.
    pub fn fee(&self) -> f64 {
        match *self {
            Pricing::Product {
                price,
                fee_fraction,
                ..
            } => fee_fraction * price,
            Pricing::Direct { fee, .. } => fee,
        }
    }

    /// What the buyer pays.
    pub fn price(&self) -> f64 {
        match *self {
            Pricing::Product { price, .. } => price,
            Pricing::Direct { unit_profit, fee } => unit_profit + fee,
        }
    }

    /// What the seller receives for a completed sale, `(1 - α)p`.
    pub fn seller_payout(&self) -> f64 {
        self.price() - self.fee()
    }
}

/// Probability that an arriving buyer purchases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdoptionModel {
    /// Constant purchase probabilities for average- and reputable-labeled sellers.
    Tabulated { p_ba: f64, p_br: f64 },
    /// `clamp(quality_weight · Q_e · (1 - price_sensitivity · p), 0, 1)`.
    Functional {
        quality_weight: f64,
        price_sensitivity: f64,
    },
}

impl AdoptionModel {
    /// The default functional form `Q_e · (1 - p)`.
    pub fn functional_default() -> Self {
        AdoptionModel::Functional {
            quality_weight: 1.0,
            price_sensitivity: 1.0,
        }
    }

    /// Evaluates a functional model at `(Q_e, p)`; `None` for tabulated models.
    pub fn evaluate(&self, estimated_quality: f64, price: f64) -> Option<f64> {
        match *self {
            AdoptionModel::Tabulated { .. } => None,
            AdoptionModel::Functional {
                quality_weight,
                price_sensitivity,
            } => Some(
                (quality_weight * estimated_quality * (1.0 - price_sensitivity * price))
                    .clamp(0.0, 1.0),
            ),
        }
    }

    fn validate(&self) -> Result<(), ParamError> {
        match *self {
            AdoptionModel::Tabulated { p_ba, p_br } => {
                if !(0.0..=1.0).contains(&p_ba) || !(0.0..=1.0).contains(&p_br) || p_ba > p_br {
                    return Err(ParamError::new(
                        "adoption",
                        format!("need 0 <= p_ba <= p_br <= 1, got p_ba={p_ba}, p_br={p_br}"),
                    ));
                }
            }
            AdoptionModel::Functional {
                quality_weight,
                price_sensitivity,
            } => {
                if !(quality_weight >= 0.0) || !(price_sensitivity >= 0.0) {
                    return Err(ParamError::new(
                        "adoption",
                        "functional adoption weights must be nonnegative",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Static model parameters for one product type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub pricing: Pricing,
    /// `Q_a`
    pub advertised_quality: f64,
    /// `Q_i`; buyers perceive exactly this quality.
    pub intrinsic_quality: f64,
    /// `γ`: tolerance band between neutral and negative feedback.
    pub critical_factor: f64,
    /// `β`: how much buyers discount an average seller's advertised quality.
    pub quality_discount: f64,
    /// `θ`: minimum fraction of positive feedback for the reputable label.
    pub consistency: f64,
    /// `r_h`
    pub reputation_threshold: u64,
    /// Buyer arrivals per day before ramp-up (`λ1`).
    pub arrival_before: f64,
    /// Buyer arrivals per day after ramp-up (`λ2`).
    pub arrival_after: f64,
    /// Shipment delay `d`, which is also the reputation update interval.
    pub slot_length: f64,
    /// `T_w`: how long a new seller waits to ramp up before leaving.
    pub patience: f64,
    /// Per-slot discount `δ` applied to long-term gains.
    pub gain_discount: f64,
    /// `C_S`: cost of shipping a returned product back.
    pub shipment_cost: f64,
    pub adoption: AdoptionModel,
}

/// A non-fatal observation about a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamWarning {
    pub field: &'static str,
    pub message: String,
}

fn check_unit(field: &'static str, v: f64) -> Result<(), ParamError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ParamError::new(
            field,
            format!("must lie in [0, 1], got {v}"),
        ));
    }
    Ok(())
}

fn check_positive(field: &'static str, v: f64) -> Result<(), ParamError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(ParamError::new(
            field,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

impl MarketParams {
    /// The configuration used for the profit and insurance-impact tables:
    /// `λ1 = 20, λ2 = 50, u = 1, T = 0.1, δ = 0.99, T_w = 180, d = 3,
    /// P_ba = 0.03, P_br = 0.1, r_h = 100, C_S = 0.5`, with an honest seller.
    pub fn reference() -> Self {
        Self {
            pricing: Pricing::Direct {
                unit_profit: 1.0,
                fee: 0.1,
            },
            advertised_quality: 0.8,
            intrinsic_quality: 0.8,
            critical_factor: 0.1,
            quality_discount: 0.5,
            consistency: 0.9,
            reputation_threshold: 100,
            arrival_before: 20.0,
            arrival_after: 50.0,
            slot_length: 3.0,
            patience: 180.0,
            gain_discount: 0.99,
            shipment_cost: 0.5,
            adoption: AdoptionModel::Tabulated {
                p_ba: 0.03,
                p_br: 0.1,
            },
        }
    }

    /// Checks every invariant; returns warnings for admissible oddities.
    pub fn validate(&self) -> Result<Vec<ParamWarning>, ParamError> {
        let mut warnings = Vec::new();
        match self.pricing {
            Pricing::Product {
                price,
                cost,
                fee_fraction,
            } => {
                check_unit("price", price)?;
                check_unit("cost", cost)?;
                if !(fee_fraction > 0.0 && fee_fraction < 1.0) {
                    return Err(ParamError::new(
                        "fee_fraction",
                        format!("must lie in (0, 1), got {fee_fraction}"),
                    ));
                }
            }
            Pricing::Direct { unit_profit, fee } => {
                if !unit_profit.is_finite() {
                    return Err(ParamError::new("unit_profit", "must be finite"));
                }
                if !(fee >= 0.0) || !fee.is_finite() {
                    return Err(ParamError::new(
                        "fee",
                        format!("must be nonnegative, got {fee}"),
                    ));
                }
            }
        }
        check_unit("advertised_quality", self.advertised_quality)?;
        check_unit("intrinsic_quality", self.intrinsic_quality)?;
        if self.advertised_quality < self.intrinsic_quality {
            return Err(ParamError::new(
                "advertised_quality",
                "sellers never understate: need Q_a >= Q_i",
            ));
        }
        check_unit("critical_factor", self.critical_factor)?;
        check_unit("quality_discount", self.quality_discount)?;
        if !(self.consistency > 0.0 && self.consistency <= 1.0) {
            return Err(ParamError::new(
                "consistency",
                format!("must lie in (0, 1], got {}", self.consistency),
            ));
        }
        if self.reputation_threshold == 0 {
            return Err(ParamError::new(
                "reputation_threshold",
                "must be at least 1",
            ));
        }
        check_positive("arrival_before", self.arrival_before)?;
        check_positive("arrival_after", self.arrival_after)?;
        if self.arrival_before >= self.arrival_after {
            return Err(ParamError::new(
                "arrival_before",
                "ramped-up sellers must attract more buyers: need lambda1 < lambda2",
            ));
        }
        check_positive("slot_length", self.slot_length)?;
        check_positive("patience", self.patience)?;
        self.patience_slots()?;
        if !(self.gain_discount > 0.0 && self.gain_discount <= 1.0) {
            return Err(ParamError::new(
                "gain_discount",
                format!("must lie in (0, 1], got {}", self.gain_discount),
            ));
        }
        if !(self.shipment_cost >= 0.0) || !self.shipment_cost.is_finite() {
            return Err(ParamError::new("shipment_cost", "must be nonnegative"));
        }
        self.adoption.validate()?;

        let u = self.unit_profit();
        if u < 0.0 {
            warnings.push(ParamWarning {
                field: "pricing",
                message: format!("unit profit is negative ({u})"),
            });
        }
        Ok(warnings)
    }

    /// `T_w / d`, which must be a positive integer.
    pub fn patience_slots(&self) -> Result<u64, ParamError> {
        let ratio = self.patience / self.slot_length;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(ParamError::new(
                "patience",
                format!("T_w / d must be a positive integer, got {ratio}"),
            ));
        }
        Ok(rounded as u64)
    }

    pub fn unit_profit(&self) -> f64 {
        unit_profit(self)
    }

    pub fn fee(&self) -> f64 {
        self.pricing.fee()
    }

    pub fn price(&self) -> f64 {
        self.pricing.price()
    }

    /// `(P_ba, P_br)`. Functional models are evaluated for an honest seller
    /// (`Q_a = Q_i`), as the analytics assume.
    pub fn adoption_probabilities(&self) -> (f64, f64) {
        match self.adoption {
            AdoptionModel::Tabulated { p_ba, p_br } => (p_ba, p_br),
            model @ AdoptionModel::Functional { .. } => {
                let q = self.intrinsic_quality;
                let p = self.price();
                let average = model.evaluate(estimated_quality(q, self.quality_discount, false), p);
                let reputable =
                    model.evaluate(estimated_quality(q, self.quality_discount, true), p);
                (average.unwrap_or(0.0), reputable.unwrap_or(0.0))
            }
        }
    }

    /// Ratio `αp / u` linking operator gains to seller gains.
    pub fn fee_to_profit_ratio(&self) -> f64 {
        self.fee() / self.unit_profit()
    }
}

/// `u = (1 - α)p - c`, or the directly supplied unit profit.
pub fn unit_profit(params: &MarketParams) -> f64 {
    params.pricing.unit_profit()
}

/// A buyer's feedback on one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rating {
    Positive,
    Neutral,
    Negative,
}

impl Rating {
    pub fn value(self) -> i64 {
        match self {
            Rating::Positive => 1,
            Rating::Neutral => 0,
            Rating::Negative => -1,
        }
    }
}

/// Rating given by a buyer who perceives quality `q_p` for a product
/// advertised at `q_a`.
pub fn feedback_rating(q_p: f64, q_a: f64, gamma: f64) -> Rating {
    if q_p >= q_a {
        Rating::Positive
    } else if q_p >= q_a - gamma {
        Rating::Neutral
    } else {
        Rating::Negative
    }
}

/// Feedback generated by one slot's transactions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFeedback {
    pub positive: u64,
    pub neutral: u64,
    pub negative: u64,
}

impl SlotFeedback {
    pub fn new(positive: u64, neutral: u64, negative: u64) -> Self {
        Self {
            positive,
            neutral,
            negative,
        }
    }

    pub fn record(&mut self, rating: Rating) {
        match rating {
            Rating::Positive => self.positive += 1,
            Rating::Neutral => self.neutral += 1,
            Rating::Negative => self.negative += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.positive + self.neutral + self.negative
    }
}

/// The public profile `(r, n+, n0, n-)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationProfile {
    pub score: i64,
    pub positive: u64,
    pub neutral: u64,
    pub negative: u64,
}

impl ReputationProfile {
    pub fn is_empty(&self) -> bool {
        self.positive == 0 && self.neutral == 0 && self.negative == 0
    }

    pub fn total(&self) -> u64 {
        self.positive + self.neutral + self.negative
    }

    /// `n+ / (n+ + n0 + n-)`, taken as 0 for a seller with no history.
    pub fn positive_fraction(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.positive as f64 / n as f64,
        }
    }
}

/// Applies one slot's feedback to a profile.
pub fn update_profile(profile: ReputationProfile, fb: SlotFeedback) -> ReputationProfile {
    ReputationProfile {
        score: profile.score + fb.positive as i64 - fb.negative as i64,
        positive: profile.positive + fb.positive,
        neutral: profile.neutral + fb.neutral,
        negative: profile.negative + fb.negative,
    }
}

/// Reputable iff `r ≥ r_h` and the positive fraction is at least `θ`.
pub fn is_reputable(profile: &ReputationProfile, r_h: u64, theta: f64) -> bool {
    profile.score >= r_h as i64 && profile.positive_fraction() >= theta
}

/// Buyers take a reputable seller's advertised quality at face value and
/// discount everyone else's by `β`.
pub fn estimated_quality(q_a: f64, beta: f64, reputable: bool) -> f64 {
    if reputable {
        q_a
    } else {
        beta * q_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SellerLabel {
    Average,
    Reputable,
    /// Holds an active insurance certificate; buyers treat it as reputable.
    Insured,
}

/// Transactions per day attracted by a seller with the given label.
pub fn transaction_rate(params: &MarketParams, label: SellerLabel) -> f64 {
    let (p_ba, p_br) = params.adoption_probabilities();
    match label {
        SellerLabel::Average => params.arrival_before * p_ba,
        SellerLabel::Reputable | SellerLabel::Insured => params.arrival_after * p_br,
    }
}
