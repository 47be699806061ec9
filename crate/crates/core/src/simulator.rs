//! Slot-level Monte Carlo of a seller's lifetime under the baseline and the
//! insured regimes.
//!
//! Each slot `τ` covers `[τd, (τ+1)d)`. Sales are drawn per slot at the rate
//! of the seller's current label and their feedback lands at the next slot
//! boundary, where the sales also settle and get paid (discount `δ^{⌈t/d⌉}`).
//! A seller whose score has not reached `r_h` by `T_w` stops selling.
//!
//! Run `i` draws from ChaCha8 stream `i` of `SimConfig::seed`, so results do
//! not depend on how runs are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::insurance::{
    expire_and_clear, review_consistency, settle_transaction, CertificateState, CertificateStatus,
    InsurancePolicy, RevocationCause, SettlementOutcome,
};
use crate::market::{
    estimated_quality, feedback_rating, is_reputable, update_profile, AdoptionModel, MarketParams,
    Rating, ReputationProfile, SellerLabel, SlotFeedback,
};
use crate::numerics::DiscountSpec;
use crate::stats::EstimateWithCI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    Baseline,
    Insured {
        policy: InsurancePolicy,
    },
    /// An insured seller advertising `advertised_quality` instead of the
    /// market's `Q_a`.
    InsuredAdversarial {
        policy: InsurancePolicy,
        advertised_quality: f64,
    },
}

impl Regime {
    pub fn policy(&self) -> Option<&InsurancePolicy> {
        match self {
            Regime::Baseline => None,
            Regime::Insured { policy } | Regime::InsuredAdversarial { policy, .. } => Some(policy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: u64,
    pub seed: u64,
    /// Slots simulated at most per run. Ramp-up is tracked past `T_w` (as if
    /// the seller stayed) up to this horizon.
    pub horizon_slots: u64,
    pub regime: Regime,
}

impl SimConfig {
    pub fn new(runs: u64, seed: u64, regime: Regime) -> Self {
        Self {
            runs,
            seed,
            horizon_slots: 20_000,
            regime,
        }
    }

    pub fn validate(&self, params: &MarketParams) -> Result<(), SimError> {
        params.validate()?;
        if self.runs == 0 {
            return Err(SimError::Config("runs must be at least 1".into()));
        }
        if (self.horizon_slots as f64) * params.slot_length < params.patience {
            return Err(SimError::Config(format!(
                "horizon of {} slots ends before the patience T_w = {}",
                self.horizon_slots, params.patience
            )));
        }
        if let Some(policy) = self.regime.policy() {
            policy.validate_for(params)?;
        }
        if let Regime::InsuredAdversarial {
            advertised_quality, ..
        } = self.regime
        {
            let mut adjusted = params.clone();
            adjusted.advertised_quality = advertised_quality;
            adjusted.validate()?;
        }
        Ok(())
    }
}

/// One settled transaction, as seen by the protocol audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlementRecord {
    /// Slot boundary at which the sale settled.
    pub slot: u64,
    pub sold_at: f64,
    pub rating: Rating,
    pub covered: bool,
    pub status_before: CertificateStatus,
    pub deposit_before: f64,
    pub status_after: CertificateStatus,
    pub outcome: SettlementOutcome,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SellerTrajectory {
    /// Sale times, strictly increasing. Empty unless recorded.
    pub transaction_times: Vec<f64>,
    /// Entry `τ` holds the feedback on sales of slot `τ` (applied at `τ + 1`).
    pub slot_feedback: Vec<SlotFeedback>,
    /// `T_r`: first slot boundary with score `≥ r_h`, while the seller is active.
    pub ramp_up_day: Option<f64>,
    /// `T_r` had the seller never left; `None` if the horizon was hit first.
    pub uncensored_ramp_up_day: Option<f64>,
    pub dropped_out: bool,
    /// `Σ δ^{⌈t/d⌉}` over paid sales, plus the expected tail once ramped.
    pub discounted_sales: f64,
    pub discounted_gain: f64,
    pub operator_gain: f64,
    /// Certificate after every change of status (empty for the baseline).
    pub certificate_history: Vec<CertificateState>,
    pub settlements: Vec<SettlementRecord>,
    pub supplemental_payments: f64,
    /// Slots actually simulated.
    pub slots: u64,
}

/// Per-label sale sampler for one slot or part of a slot.
struct SaleSampler {
    arrival: [f64; 2],
    adoption: [f64; 2],
    full_slot: [Option<Poisson<f64>>; 2],
    slot_length: f64,
    thinned: bool,
}

fn label_index(label: SellerLabel) -> usize {
    match label {
        SellerLabel::Average => 0,
        SellerLabel::Reputable | SellerLabel::Insured => 1,
    }
}

impl SaleSampler {
    fn new(params: &MarketParams, advertised: f64) -> Self {
        let price = params.price();
        let (arrival, adoption, thinned) = match params.adoption {
            AdoptionModel::Tabulated { p_ba, p_br } => (
                [params.arrival_before * p_ba, params.arrival_after * p_br],
                [1.0, 1.0],
                false,
            ),
            model @ AdoptionModel::Functional { .. } => {
                let prob = |reputable| {
                    model
                        .evaluate(
                            estimated_quality(advertised, params.quality_discount, reputable),
                            price,
                        )
                        .unwrap_or(0.0)
                };
                (
                    [params.arrival_before, params.arrival_after],
                    [prob(false), prob(true)],
                    true,
                )
            }
        };
        let full_slot = [0, 1].map(|i| Poisson::new(arrival[i] * params.slot_length).ok());
        Self {
            arrival,
            adoption,
            full_slot,
            slot_length: params.slot_length,
            thinned,
        }
    }

    /// Sales per day for a label.
    fn rate(&self, label: SellerLabel) -> f64 {
        let i = label_index(label);
        self.arrival[i] * self.adoption[i]
    }

    /// Sale times in `[from, to)`, sorted.
    fn draw<R: Rng>(
        &self,
        rng: &mut R,
        label: SellerLabel,
        from: f64,
        to: f64,
        out: &mut Vec<f64>,
    ) {
        let i = label_index(label);
        let len = to - from;
        if len <= 0.0 || self.arrival[i] <= 0.0 {
            return;
        }
        let arrivals: f64 = if (len - self.slot_length).abs() < 1e-12 * self.slot_length {
            self.full_slot[i].map_or(0.0, |p| p.sample(rng))
        } else {
            Poisson::new(self.arrival[i] * len).map_or(0.0, |p| p.sample(rng))
        };
        let arrivals = arrivals as u64;
        let sales = if self.thinned && arrivals > 0 {
            Binomial::new(arrivals, self.adoption[i]).map_or(0, |b| b.sample(rng))
        } else {
            arrivals
        };
        let start = out.len();
        for _ in 0..sales {
            // uniform on (from, to); 0 is excluded so ⌈t/d⌉ ≥ 1
            let u: f64 = rng.random();
            out.push(from + len * (1.0 - u));
        }
        out[start..].sort_by(f64::total_cmp);
    }
}

fn record_certificate(cert: &CertificateState, history: &mut Vec<CertificateState>, record: bool) {
    if record && history.last().is_none_or(|last| last.status != cert.status) {
        history.push(*cert);
    }
}

fn simulate(
    params: &MarketParams,
    config: &SimConfig,
    run_index: u64,
    record: bool,
) -> SellerTrajectory {
    let d = params.slot_length;
    let r_h = params.reputation_threshold as i64;
    let patience_slots = params.patience_slots().expect("validated");
    let policy = config.regime.policy().copied();
    let advertised = match config.regime {
        Regime::InsuredAdversarial {
            advertised_quality, ..
        } => advertised_quality,
        _ => params.advertised_quality,
    };
    let rating = feedback_rating(params.intrinsic_quality, advertised, params.critical_factor);
    let sampler = SaleSampler::new(params, advertised);
    let discount = DiscountSpec::new(params.gain_discount, d).expect("validated");
    let delta = params.gain_discount;
    // an honest ramped seller stays reputable forever, so the rest of its
    // sales can be replaced by their expectation
    let tail_allowed = rating == Rating::Positive && delta < 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(run_index);

    let mut traj = SellerTrajectory::default();
    let mut profile = ReputationProfile::default();
    let mut cert = policy.map(|p| CertificateState::issue(&p, &profile, 0.0).expect("new seller"));
    if let Some(c) = &cert {
        record_certificate(c, &mut traj.certificate_history, record);
    }
    let mut pending: Vec<(f64, bool)> = Vec::new();
    let mut slot_sales: Vec<f64> = Vec::new();
    let mut paid = 0.0;
    let mut real_done = false;
    // score of the would-be seller after a drop-out
    let mut phantom_score: Option<i64> = None;

    let mut tau = 0u64;
    loop {
        let now = tau as f64 * d;

        // sales of slot τ-1 settle and their feedback arrives
        let mut fb = SlotFeedback::default();
        for (t, covered) in pending.drain(..) {
            fb.record(rating);
            let outcome = match (&mut cert, covered) {
                (Some(c), true) => {
                    let policy = policy.as_ref().expect("certificate implies policy");
                    let before = *c;
                    let (next, outcome) = settle_transaction(c, rating, now, params, policy)
                        .expect("covered sales settle before clearing");
                    *c = next;
                    if record {
                        traj.settlements.push(SettlementRecord {
                            slot: tau,
                            sold_at: t,
                            rating,
                            covered,
                            status_before: before.status,
                            deposit_before: before.remaining_deposit,
                            status_after: next.status,
                            outcome,
                        });
                    }
                    outcome
                }
                _ => SettlementOutcome::uninsured(params),
            };
            traj.supplemental_payments += outcome.supplemental_payment;
            if outcome.buyer_refund == 0.0 {
                paid += discount.factor(discount.payment_slot(t));
            }
        }
        if let Some(c) = &cert {
            record_certificate(c, &mut traj.certificate_history, record);
        }
        if tau > 0 && !real_done {
            profile = update_profile(profile, fb);
            if record {
                traj.slot_feedback.push(fb);
            }
        }

        if let (Some(c), Some(p)) = (&mut cert, &policy) {
            if c.status == CertificateStatus::Active && tau > 0 {
                *c = review_consistency(c, &profile, params.consistency, now);
                record_certificate(c, &mut traj.certificate_history, record);
            }
            if c.status == CertificateStatus::Active && now >= c.expires_at(p) {
                *c = expire_and_clear(c, now, p).expect("active certificate");
                record_certificate(c, &mut traj.certificate_history, record);
            }
            if matches!(
                c.status,
                CertificateStatus::Expired | CertificateStatus::Revoked
            ) && c.closes_at(p).is_some_and(|close| now >= close)
            {
                *c = expire_and_clear(c, now, p).expect("window closed");
                record_certificate(c, &mut traj.certificate_history, record);
            }
        }
        let obligations_done = cert
            .as_ref()
            .is_none_or(|c| c.status == CertificateStatus::Cleared);

        if !real_done {
            if traj.ramp_up_day.is_none() && profile.score >= r_h {
                traj.ramp_up_day = Some(now);
                traj.uncensored_ramp_up_day = Some(now);
            }
            if tau == patience_slots && traj.ramp_up_day.is_none() {
                traj.dropped_out = true;
                phantom_score = Some(profile.score);
            }
            if traj.dropped_out && obligations_done {
                real_done = true;
            } else if traj.ramp_up_day.is_some() && tail_allowed && obligations_done {
                // slots τ, τ+1, … at the reputable rate, paid one slot later
                paid += sampler.rate(SellerLabel::Reputable) * d * discount.factor(tau + 1)
                    / (1.0 - delta);
                real_done = true;
            }
        }
        if let Some(score) = phantom_score {
            if traj.uncensored_ramp_up_day.is_none() && score >= r_h {
                traj.uncensored_ramp_up_day = Some(now);
            }
        }
        if real_done && traj.uncensored_ramp_up_day.is_some() {
            break;
        }
        if tau == config.horizon_slots {
            break;
        }

        // sales during slot τ
        let end = now + d;
        let active_until = match (&cert, &policy) {
            (Some(c), Some(p)) if c.status == CertificateStatus::Active => c.expires_at(p).min(end),
            _ => now,
        };
        let fallback = if is_reputable(&profile, params.reputation_threshold, params.consistency) {
            SellerLabel::Reputable
        } else {
            SellerLabel::Average
        };
        slot_sales.clear();
        sampler.draw(
            &mut rng,
            SellerLabel::Insured,
            now,
            active_until,
            &mut slot_sales,
        );
        sampler.draw(
            &mut rng,
            fallback,
            active_until.max(now),
            end,
            &mut slot_sales,
        );
        if !real_done && !traj.dropped_out {
            for &t in &slot_sales {
                let covered = cert
                    .as_ref()
                    .is_some_and(|c| c.covers(t) && t < active_until.max(now));
                pending.push((t, covered));
            }
            if record {
                traj.transaction_times.extend_from_slice(&slot_sales);
            }
        } else if let Some(score) = phantom_score.as_mut() {
            *score += rating.value() * slot_sales.len() as i64;
        }
        tau += 1;
    }

    traj.slots = tau;
    traj.discounted_sales = paid;
    traj.discounted_gain = params.unit_profit() * paid;
    traj.operator_gain = params.fee() * paid;
    traj
}

/// Simulates run `run_index` of `config`, keeping the full record.
pub fn simulate_seller(
    params: &MarketParams,
    config: &SimConfig,
    run_index: u64,
) -> Result<SellerTrajectory, SimError> {
    config.validate(params)?;
    Ok(simulate(params, config, run_index, true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMeasures {
    /// `E[T_r]` over an unbounded patience; `None` if some run hit the horizon.
    pub ramp_up: Option<EstimateWithCI>,
    /// `E[T_r | T_r ≤ T_w]`; `None` if no run ramped in time.
    pub ramp_up_before_patience: Option<EstimateWithCI>,
    pub drop_out: EstimateWithCI,
    pub seller_gain: EstimateWithCI,
    pub operator_gain: EstimateWithCI,
    pub truncated_runs: Vec<u64>,
    pub horizon_slots: u64,
}

impl MonteCarloMeasures {
    /// The uncensored ramp-up estimate, or a diagnostic naming the runs
    /// that never ramped within the horizon.
    pub fn ramp_up_estimate(&self) -> Result<EstimateWithCI, SimError> {
        self.ramp_up.ok_or_else(|| SimError::HorizonTooShort {
            horizon_slots: self.horizon_slots,
            count: self.truncated_runs.len(),
            first: self.truncated_runs.iter().take(10).copied().collect(),
        })
    }
}

struct RunSummary {
    ramp: Option<f64>,
    ramp_in_time: Option<f64>,
    dropped: bool,
    seller_gain: f64,
    operator_gain: f64,
}

/// Aggregates runs `0..config.runs`; needs at least 100 runs.
pub fn monte_carlo_measures(
    params: &MarketParams,
    config: &SimConfig,
) -> Result<MonteCarloMeasures, SimError> {
    config.validate(params)?;
    if config.runs < 100 {
        return Err(SimError::Config(format!(
            "need at least 100 runs, got {}",
            config.runs
        )));
    }
    let summaries: Vec<RunSummary> = (0..config.runs)
        .into_par_iter()
        .map(|i| {
            let t = simulate(params, config, i, false);
            RunSummary {
                ramp: t.uncensored_ramp_up_day,
                ramp_in_time: t.ramp_up_day.filter(|_| !t.dropped_out),
                dropped: t.dropped_out,
                seller_gain: t.discounted_gain,
                operator_gain: t.operator_gain,
            }
        })
        .collect();

    let truncated_runs: Vec<u64> = summaries
        .iter()
        .enumerate()
        .filter(|(_, s)| s.ramp.is_none())
        .map(|(i, _)| i as u64)
        .collect();
    if !truncated_runs.is_empty() {
        log::warn!(
            "{} of {} runs did not ramp up within {} slots",
            truncated_runs.len(),
            config.runs,
            config.horizon_slots
        );
    }
    let ramp_up = truncated_runs.is_empty().then(|| {
        EstimateWithCI::from_samples(&summaries.iter().filter_map(|s| s.ramp).collect::<Vec<_>>())
    });
    let in_time: Vec<f64> = summaries.iter().filter_map(|s| s.ramp_in_time).collect();
    let column = |f: fn(&RunSummary) -> f64| {
        EstimateWithCI::from_samples(&summaries.iter().map(f).collect::<Vec<_>>())
    };
    Ok(MonteCarloMeasures {
        ramp_up,
        ramp_up_before_patience: (!in_time.is_empty())
            .then(|| EstimateWithCI::from_samples(&in_time)),
        drop_out: column(|s| if s.dropped { 1.0 } else { 0.0 }),
        seller_gain: column(|s| s.seller_gain),
        operator_gain: column(|s| s.operator_gain),
        truncated_runs,
        horizon_slots: config.horizon_slots,
    })
}

/// Totals over an audited batch of insured trajectories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub runs: u64,
    pub settlements: u64,
    pub refunds: u64,
    pub deposit_revocations: u64,
    pub consistency_revocations: u64,
    pub full_refunds: u64,
    pub total_deductions: f64,
    pub total_supplemental: f64,
}

impl AuditReport {
    fn merge(mut self, other: Self) -> Self {
        self.runs += other.runs;
        self.settlements += other.settlements;
        self.refunds += other.refunds;
        self.deposit_revocations += other.deposit_revocations;
        self.consistency_revocations += other.consistency_revocations;
        self.full_refunds += other.full_refunds;
        self.total_deductions += other.total_deductions;
        self.total_supplemental += other.total_supplemental;
        self
    }
}

fn audit_run(
    params: &MarketParams,
    policy: &InsurancePolicy,
    run: u64,
    traj: &SellerTrajectory,
) -> Result<AuditReport, SimError> {
    let fail = |slot: u64, reason: String| SimError::AuditFailure { run, slot, reason };
    let tol = 1e-9;
    let price = params.price();
    let cost = params.shipment_cost;
    let mut report = AuditReport {
        runs: 1,
        ..Default::default()
    };
    let mut returns = 0u64;
    let mut deducted = 0.0;
    let mut supplemental = 0.0;

    for rec in &traj.settlements {
        let o = &rec.outcome;
        let slot = rec.slot;
        report.settlements += 1;
        if rec.status_before == CertificateStatus::Cleared {
            return Err(fail(
                slot,
                "settlement after the certificate was cleared".into(),
            ));
        }
        if (o.seller_payout + o.operator_fee + o.buyer_refund - price).abs() > tol * price.max(1.0)
        {
            return Err(fail(slot, format!("payment not conserved: {o:?}")));
        }
        if rec.rating == Rating::Negative {
            report.refunds += 1;
            returns += 1;
            if (o.buyer_refund - price).abs() > tol * price.max(1.0) || o.seller_payout != 0.0 {
                return Err(fail(
                    slot,
                    format!("returned sale not refunded in full: {o:?}"),
                ));
            }
            let expected = cost.min(rec.deposit_before);
            if (o.deposit_deduction - expected).abs() > tol
                || (o.deposit_deduction + o.supplemental_payment - cost).abs() > tol
            {
                return Err(fail(slot, format!("return cost {cost} charged as {o:?}")));
            }
        } else if o.buyer_refund != 0.0 || o.deposit_deduction != 0.0 {
            return Err(fail(
                slot,
                format!("sale rated {:?} was refunded: {o:?}", rec.rating),
            ));
        }
        deducted += o.deposit_deduction;
        supplemental += o.supplemental_payment;
        let charged = cost * returns as f64;
        if (deducted - charged.min(policy.deposit)).abs() > tol * policy.deposit.max(1.0) {
            return Err(fail(
                slot,
                format!("deposit ledger drift: deducted {deducted}, charged {charged}"),
            ));
        }
        if deducted + tol < policy.revoke_threshold.min(charged) {
            return Err(fail(
                slot,
                format!("loss {deducted} below min(threshold, {charged})"),
            ));
        }
    }
    if (deducted + supplemental - cost * returns as f64).abs() > tol * (1.0 + cost * returns as f64)
    {
        return Err(fail(
            traj.slots,
            "supplemental payments do not cover the shortfall".into(),
        ));
    }

    let slot_of =
        |t: Option<f64>| t.map_or(traj.slots, |t| (t / params.slot_length).round() as u64);
    let mut cleared = None;
    for c in &traj.certificate_history {
        let slot = slot_of(c.left_active_at);
        match (c.status, c.revocation) {
            (CertificateStatus::Revoked, Some(RevocationCause::DepositThreshold)) => {
                report.deposit_revocations += 1;
                if c.remaining_deposit > policy.revoke_threshold {
                    return Err(fail(
                        slot,
                        format!("revoked with deposit {} left", c.remaining_deposit),
                    ));
                }
            }
            (CertificateStatus::Revoked, Some(RevocationCause::Consistency)) => {
                report.consistency_revocations += 1;
                if c.profile_snapshot.positive_fraction() >= params.consistency {
                    return Err(fail(
                        slot,
                        "revoked for consistency with enough positive feedback".into(),
                    ));
                }
            }
            (CertificateStatus::Revoked, None) => {
                return Err(fail(slot, "revocation without a cause".into()))
            }
            (CertificateStatus::Cleared, _) => cleared = Some(*c),
            _ => {}
        }
    }

    if traj
        .settlements
        .iter()
        .all(|r| r.rating == Rating::Positive)
    {
        if returns != 0 || report.deposit_revocations + report.consistency_revocations != 0 {
            return Err(fail(
                traj.slots,
                "honest seller lost deposit or certificate".into(),
            ));
        }
        match cleared {
            Some(c) if c.refunded == policy.deposit => report.full_refunds += 1,
            Some(c) => {
                return Err(fail(
                    traj.slots,
                    format!("honest seller refunded {} only", c.refunded),
                ))
            }
            None => {
                return Err(fail(
                    traj.slots,
                    "certificate never cleared within the horizon".into(),
                ))
            }
        }
    }
    report.total_deductions = deducted;
    report.total_supplemental = supplemental;
    Ok(report)
}

/// Replays `config.runs` insured trajectories and checks the protocol:
/// returned sales are refunded in full and charged `C_S` against the
/// deposit, payments are conserved, nothing settles after clearing, every
/// revocation is justified, and honest sellers get their whole deposit back.
pub fn adversarial_protocol_audit(
    params: &MarketParams,
    config: &SimConfig,
) -> Result<AuditReport, SimError> {
    config.validate(params)?;
    let policy = *config
        .regime
        .policy()
        .ok_or_else(|| SimError::Config("the protocol audit needs an insured regime".into()))?;
    let reports: Vec<Result<AuditReport, SimError>> = (0..config.runs)
        .into_par_iter()
        .map(|i| audit_run(params, &policy, i, &simulate(params, config, i, true)))
        .collect();
    reports
        .into_iter()
        .try_fold(AuditReport::default(), |acc, r| Ok(acc.merge(r?)))
}
