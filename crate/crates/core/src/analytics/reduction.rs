//! Expected discounted sales of a new seller whose pre-ramp transactions
//! arrive as a Poisson process with piecewise-constant intensity.
//!
//! Conditioned on the `k`-th arrival time `t`, the earlier `k - 1` arrival
//! times are i.i.d. with density `ρ(s)/Λ(t)` on `(0, t)` (uniform order
//! statistics after the time change `Λ`). That collapses the nested
//! `r_h`-fold integrals into one outer integral over `t` whose integrand
//! uses only `Λ` and `J(t) = ∫_0^t ρ(s) δ^{⌈s/d⌉} ds`, both exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{AnalyticsError, NumericsError};
use crate::numerics::{integrate_slotted, DiscountSpec, PoissonDist};
use crate::stats::EstimateWithCI;

/// Piecewise-constant transaction intensity before ramp-up.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArrivalProfile {
    /// `(start, rate)`, sorted, first start at 0; the last segment never ends.
    segments: Vec<(f64, f64)>,
}

impl ArrivalProfile {
    pub(crate) fn constant(rate: f64) -> Self {
        Self {
            segments: vec![(0.0, rate)],
        }
    }

    /// `first` on `[0, switch_at)`, then `then`. A non-positive switch time
    /// yields the constant profile.
    pub(crate) fn switching(first: f64, switch_at: f64, then: f64) -> Self {
        if switch_at <= 0.0 {
            Self::constant(then)
        } else {
            Self {
                segments: vec![(0.0, first), (switch_at, then)],
            }
        }
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.0).collect()
    }

    pub(crate) fn final_rate(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.1)
    }

    fn segment_end(&self, i: usize) -> f64 {
        self.segments.get(i + 1).map_or(f64::INFINITY, |s| s.0)
    }

    pub(crate) fn rate_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|s| s.0 <= t)
            .map_or(0.0, |s| s.1)
    }

    /// `Λ(t) = ∫_0^t ρ`.
    pub(crate) fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, rate)) in self.segments.iter().enumerate() {
            if t <= start {
                break;
            }
            total += rate * (t.min(self.segment_end(i)) - start);
        }
        total
    }

    /// Smallest `t` with `Λ(t) = target`, if the profile ever gets there.
    pub(crate) fn time_at(&self, target: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (i, &(start, rate)) in self.segments.iter().enumerate() {
            let end = self.segment_end(i);
            let mass = rate * (end - start);
            if acc + mass >= target && rate > 0.0 {
                return Some(start + (target - acc) / rate);
            }
            acc += mass;
        }
        None
    }

    /// `∫_a^b ρ(s) δ^{⌈s/d⌉} ds`.
    pub(crate) fn weighted_discount(&self, spec: &DiscountSpec, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, rate)) in self.segments.iter().enumerate() {
            let lo = a.max(start);
            let hi = b.min(self.segment_end(i));
            if hi > lo && rate > 0.0 {
                total += rate * spec.ceil_discount_integral(lo, hi);
            }
        }
        total
    }
}

/// Inputs of the discounted-sales reduction.
#[derive(Debug, Clone)]
pub(crate) struct SalesModel {
    pub profile: ArrivalProfile,
    /// Transactions per day once ramped up.
    pub reputable_rate: f64,
    pub threshold: u64,
    pub patience: f64,
    pub discount: DiscountSpec,
}

const TAIL_MASS: f64 = 1e-12;

impl SalesModel {
    /// `E[δ^{⌈t/d⌉+1} + δ^{⌈t/d⌉+2} + …]` sales after ramping at `t`: the rest
    /// of the current slot at the pre-ramp rate, then reputable slots forever.
    fn post_ramp(&self, t: f64) -> f64 {
        let d = self.discount.slot_length;
        let delta = self.discount.delta;
        let slot = self.discount.payment_slot(t);
        let factor = self.discount.factor(slot);
        let rest_of_slot = self.profile.cumulative(slot as f64 * d) - self.profile.cumulative(t);
        factor * rest_of_slot + self.reputable_rate * d * factor * delta / (1.0 - delta)
    }

    fn ramp_probability(&self) -> f64 {
        PoissonDist::new(self.profile.cumulative(self.patience))
            .map_or(0.0, |p| p.sf(self.threshold as i64 - 1))
    }

    fn check_convergent(&self) -> Result<(), AnalyticsError> {
        if self.discount.delta >= 1.0 && self.ramp_probability() > 0.0 {
            return Err(AnalyticsError::Divergent(
                "undiscounted gains of a seller who can ramp up are infinite".into(),
            ));
        }
        Ok(())
    }

    /// Sales discounted by payment slot, from sellers who never ramp up.
    pub(crate) fn drop_out_part(&self) -> Result<f64, AnalyticsError> {
        let mass = self.profile.cumulative(self.patience);
        if mass <= 0.0 {
            return Ok(0.0);
        }
        let per_sale = self
            .profile
            .weighted_discount(&self.discount, 0.0, self.patience)
            / mass;
        let expected_sales = PoissonDist::new(mass)?.partial_expectation(self.threshold as i64 - 1);
        Ok(per_sale * expected_sales)
    }

    /// Sales from sellers who ramp up before their patience runs out.
    pub(crate) fn ramp_part(&self, tol: f64) -> Result<f64, AnalyticsError> {
        self.check_convergent()?;
        let k = self.threshold;
        let Some((lo, hi)) = self.ramp_window() else {
            return Ok(0.0);
        };
        let first_slot_factor = self.discount.factor(1);
        let integrand = |t: f64| {
            let mass = self.profile.cumulative(t);
            let density =
                self.profile.rate_at(t) * PoissonDist::new(mass).map_or(0.0, |p| p.pmf(k - 1));
            if density == 0.0 {
                return 0.0;
            }
            let earlier = if mass > 0.0 {
                self.profile.weighted_discount(&self.discount, 0.0, t) / mass
            } else {
                first_slot_factor
            };
            let own = self.discount.factor(self.discount.payment_slot(t));
            density * ((k - 1) as f64 * earlier + own + self.post_ramp(t))
        };
        let mut breaks = self.profile.breakpoints();
        breaks.retain(|&b| b > lo && b < hi);
        Ok(integrate_slotted(
            integrand,
            lo,
            hi,
            self.discount.slot_length,
            &breaks,
            tol,
        )?)
    }

    /// Range of `t_{r_h}` outside which the arrival-time density carries
    /// less than `TAIL_MASS` on either side; `None` when ramp-up is impossible.
    fn ramp_window(&self) -> Option<(f64, f64)> {
        let k = self.threshold as i64;
        let reached_by =
            |t: f64| PoissonDist::new(self.profile.cumulative(t)).map_or(0.0, |p| p.sf(k - 1));
        if reached_by(self.patience) == 0.0 {
            return None;
        }
        let bisect = |pred: &dyn Fn(f64) -> bool| {
            // smallest t in [0, T_w] with pred(t) true, pred monotone
            let (mut a, mut b) = (0.0, self.patience);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if pred(m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            a
        };
        let lo = if reached_by(0.0) >= TAIL_MASS {
            0.0
        } else {
            bisect(&|t| reached_by(t) >= TAIL_MASS)
        };
        let total = reached_by(self.patience);
        let hi = if reached_by(self.patience) - reached_by(0.0) < TAIL_MASS {
            self.patience
        } else {
            // beyond hi the remaining ramp mass before T_w is below TAIL_MASS
            let h = bisect(&|t| total - reached_by(t) < TAIL_MASS);
            (h + 1e-9 * self.patience).min(self.patience)
        };
        if hi > lo {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Expected discounted number of sales via the one-dimensional reduction.
    pub(crate) fn expected_sales(&self, tol: f64) -> Result<f64, AnalyticsError> {
        Ok(self.drop_out_part()? + self.ramp_part(tol)?)
    }

    /// One draw of the discounted sales, sampling the arrival process
    /// directly by time change of a unit-rate process.
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut clock = 0.0;
        let mut total = 0.0;
        for j in 1..=self.threshold {
            let gap: f64 = Exp1.sample(rng);
            clock += gap;
            let t = match self.profile.time_at(clock) {
                Some(t) if t < self.patience => t,
                _ => return total,
            };
            total += self.discount.factor(self.discount.payment_slot(t));
            if j == self.threshold {
                total += self.post_ramp(t);
            }
        }
        total
    }

    /// Monte Carlo estimate of the expected discounted sales. Chunk `c` of
    /// `CHUNK` samples draws from ChaCha8 stream `c` of `seed`.
    pub(crate) fn expected_sales_mc(
        &self,
        samples: u64,
        seed: u64,
    ) -> Result<EstimateWithCI, AnalyticsError> {
        const CHUNK: u64 = 2048;
        if samples == 0 {
            return Err(
                NumericsError::Domain("Monte Carlo needs at least one sample".into()).into(),
            );
        }
        self.check_convergent()?;
        let chunks = samples.div_ceil(CHUNK);
        let draws: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let n = CHUNK.min(samples - c * CHUNK);
                (0..n).map(|_| self.sample(&mut rng)).collect::<Vec<_>>()
            })
            .collect();
        Ok(EstimateWithCI::from_samples(&draws))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_cumulative_and_inverse() {
        let p = ArrivalProfile::switching(5.0, 100.0, 0.6);
        assert_eq!(p.cumulative(0.0), 0.0);
        assert_eq!(p.cumulative(50.0), 250.0);
        assert!((p.cumulative(180.0) - (500.0 + 48.0)).abs() < 1e-12);
        assert_eq!(p.rate_at(99.9), 5.0);
        assert_eq!(p.rate_at(100.0), 0.6);
        assert!((p.time_at(250.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((p.time_at(506.0).unwrap() - 110.0).abs() < 1e-9);
        assert_eq!(
            ArrivalProfile::switching(5.0, 0.0, 0.6),
            ArrivalProfile::constant(0.6)
        );
        assert_eq!(ArrivalProfile::constant(0.0).time_at(1.0), None);
    }

    #[test]
    fn weighted_discount_splits_segments() {
        let spec = DiscountSpec::new(0.9, 3.0).unwrap();
        let p = ArrivalProfile::switching(2.0, 4.0, 1.0);
        let expected =
            2.0 * spec.ceil_discount_integral(0.0, 4.0) + spec.ceil_discount_integral(4.0, 10.0);
        assert!((p.weighted_discount(&spec, 0.0, 10.0) - expected).abs() < 1e-14);
    }
}
