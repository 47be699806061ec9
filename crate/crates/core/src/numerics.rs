//! Probability and integration primitives shared by the analytic evaluators.
//!
//! The Poisson kernel follows Loader's saddle-point formulation
//! (`exp(-stirlerr(k) - bd0(k, m)) / sqrt(2πk)`), which keeps relative
//! accuracy near machine precision for means in the thousands where the
//! naive `e^{-m} m^k / k!` over- and underflows.
//!
//! Integrands built on `δ^{⌈t/d⌉}` are only piecewise smooth, so
//! [`integrate_slotted`] always splits at multiples of the slot length
//! before handing each smooth piece to the adaptive Gauss-Kronrod rule.

use serde::{Deserialize, Serialize};

use crate::error::NumericsError;

/// Below this size both `k` and the mean are handled by direct evaluation.
const DIRECT_EVAL_LIMIT: f64 = 30.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln k! - (k + 1/2) ln k + k - ln √(2π)` for k = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Error term of Stirling's approximation to `ln k!`.
fn stirlerr(k: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    if k < STIRLERR_TABLE.len() as u64 {
        return STIRLERR_TABLE[k as usize];
    }
    let n = k as f64;
    let nn = n * n;
    if k > 500 {
        (S0 - S1 / nn) / n
    } else if k > 80 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if k > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m - x`, evaluated without cancellation when x ≈ m.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1;
        loop {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s;
            }
            s = s1;
            j += 1;
        }
    }
    x * (x / m).ln() + m - x
}

fn check_mean(mean: f64) -> Result<(), NumericsError> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(NumericsError::Domain(format!(
            "Poisson mean must be finite and nonnegative, got {mean}"
        )));
    }
    Ok(())
}

fn pmf_unchecked(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mean).exp();
    }
    let kf = k as f64;
    if kf <= DIRECT_EVAL_LIMIT && mean <= DIRECT_EVAL_LIMIT {
        let mut p = (-mean).exp();
        for j in 1..=k {
            p *= mean / j as f64;
        }
        return p;
    }
    (-stirlerr(k) - bd0(kf, mean)).exp() / (2.0 * std::f64::consts::PI * kf).sqrt()
}

/// Sum of `pmf(j)` over `j > k`, accumulated upward from `k + 1`.
fn upper_tail_sum(k: u64, mean: f64) -> f64 {
    let mut j = k + 1;
    let mut term = pmf_unchecked(j, mean);
    let mut sum = 0.0;
    while term > 0.0 {
        sum += term;
        j += 1;
        term *= mean / j as f64;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Sum of `pmf(j)` over `0 ≤ j ≤ k`, accumulated downward from `k`.
fn lower_sum(k: u64, mean: f64) -> f64 {
    let mut term = pmf_unchecked(k, mean);
    let mut sum = term;
    let mut j = k;
    while j > 0 && term > 0.0 {
        term *= j as f64 / mean;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        j -= 1;
    }
    sum
}

/// `P[X = k]` for `X ~ Poisson(mean)`.
pub fn poisson_pmf(k: u64, mean: f64) -> Result<f64, NumericsError> {
    check_mean(mean)?;
    Ok(pmf_unchecked(k, mean))
}

/// `ln P[X = k]`; `-inf` where the probability is exactly zero.
pub fn poisson_ln_pmf(k: u64, mean: f64) -> Result<f64, NumericsError> {
    check_mean(mean)?;
    if mean == 0.0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if k == 0 {
        return Ok(-mean);
    }
    let kf = k as f64;
    Ok(-stirlerr(k) - bd0(kf, mean) - LN_SQRT_2PI - 0.5 * kf.ln())
}

/// `P[X ≤ k]` for `X ~ Poisson(mean)`; zero for negative `k`.
pub fn poisson_cdf(k: i64, mean: f64) -> Result<f64, NumericsError> {
    check_mean(mean)?;
    if k < 0 {
        return Ok(0.0);
    }
    if mean == 0.0 {
        return Ok(1.0);
    }
    let k = k as u64;
    if (k as f64) < mean {
        Ok(lower_sum(k, mean).min(1.0))
    } else {
        Ok((1.0 - upper_tail_sum(k, mean)).max(0.0))
    }
}

/// `P[X > k]`, computed directly on whichever side of the mode is the tail.
pub fn poisson_sf(k: i64, mean: f64) -> Result<f64, NumericsError> {
    check_mean(mean)?;
    if k < 0 {
        return Ok(1.0);
    }
    if mean == 0.0 {
        return Ok(0.0);
    }
    let k = k as u64;
    if (k as f64) < mean {
        Ok((1.0 - lower_sum(k, mean)).max(0.0))
    } else {
        Ok(upper_tail_sum(k, mean).min(1.0))
    }
}

/// A Poisson counting distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonDist {
    mean: f64,
}

impl PoissonDist {
    pub fn new(mean: f64) -> Result<Self, NumericsError> {
        check_mean(mean)?;
        Ok(Self { mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn pmf(&self, k: u64) -> f64 {
        pmf_unchecked(k, self.mean)
    }

    pub fn cdf(&self, k: i64) -> f64 {
        poisson_cdf(k, self.mean).expect("mean validated at construction")
    }

    pub fn sf(&self, k: i64) -> f64 {
        poisson_sf(k, self.mean).expect("mean validated at construction")
    }

    /// `E[X; X ≤ k] = Σ_{j ≤ k} j·pmf(j)`.
    pub fn partial_expectation(&self, k: i64) -> f64 {
        if k < 1 {
            return 0.0;
        }
        (0..=k as u64).map(|j| j as f64 * self.pmf(j)).sum()
    }
}

/// Density of the `k`-th arrival time of a Poisson process with the given rate.
pub fn erlang_pdf(k: u64, rate: f64, t: f64) -> Result<f64, NumericsError> {
    if k == 0 {
        return Err(NumericsError::Domain(
            "Erlang shape must be at least 1".into(),
        ));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(NumericsError::Domain(format!(
            "Erlang rate must be positive, got {rate}"
        )));
    }
    if !(t >= 0.0) {
        return Err(NumericsError::Domain(format!(
            "Erlang argument must be nonnegative, got {t}"
        )));
    }
    Ok(rate * pmf_unchecked(k - 1, rate * t))
}

/// Discounting of payments by slot: a payment in slot `τ` is worth `delta^τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    pub delta: f64,
    pub slot_length: f64,
}

impl DiscountSpec {
    pub fn new(delta: f64, slot_length: f64) -> Result<Self, NumericsError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(NumericsError::Domain(format!(
                "discount must lie in (0, 1], got {delta}"
            )));
        }
        if !(slot_length > 0.0) || !slot_length.is_finite() {
            return Err(NumericsError::Domain(format!(
                "slot length must be positive, got {slot_length}"
            )));
        }
        Ok(Self { delta, slot_length })
    }

    /// `⌈t/d⌉`: the slot in which a payment for a sale at time `t` lands.
    pub fn payment_slot(&self, t: f64) -> u64 {
        (t / self.slot_length).ceil().max(0.0) as u64
    }

    pub fn factor(&self, slot: u64) -> f64 {
        self.delta.powf(slot as f64)
    }

    /// `∫_a^b δ^{⌈s/d⌉} ds`, exact.
    pub fn ceil_discount_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let d = self.slot_length;
        // slot of points just above a, and just below b
        let first = (a / d).floor() as u64 + 1;
        let last = ((b / d).ceil() as u64).max(first);
        if first == last {
            return (b - a) * self.factor(first);
        }
        let head = (first as f64 * d - a) * self.factor(first);
        let tail = (b - (last - 1) as f64 * d) * self.factor(last);
        let middle = if last > first + 1 {
            d * discounted_slot_sum(self.delta, first + 1, Some(last - 1))
                .expect("finite range with validated delta")
        } else {
            0.0
        };
        head + middle + tail
    }
}

/// `Σ_{τ=from}^{to} δ^τ`; `to = None` is the infinite tail and needs `δ < 1`.
pub fn discounted_slot_sum(delta: f64, from: u64, to: Option<u64>) -> Result<f64, NumericsError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(NumericsError::Domain(format!(
            "discount must lie in (0, 1], got {delta}"
        )));
    }
    match to {
        None if delta == 1.0 => Err(NumericsError::Domain(
            "infinite discounted sum diverges for delta = 1".into(),
        )),
        None => Ok(delta.powf(from as f64) / (1.0 - delta)),
        Some(to) if to < from => Ok(0.0),
        Some(to) => {
            let terms = (to - from + 1) as f64;
            if delta == 1.0 {
                return Ok(terms);
            }
            let ln_delta = delta.ln();
            // δ^from (1 - δ^n) / (1 - δ), with both differences via expm1
            Ok(delta.powf(from as f64) * (-(terms * ln_delta).exp_m1()) / (-ln_delta.exp_m1()))
        }
    }
}

/// `E[δ^{⌈U/d⌉}]` for `U ~ Uniform(t_lo, t_hi)`.
pub fn uniform_ceil_discount_mean(
    delta: f64,
    d: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<f64, NumericsError> {
    if !(t_lo >= 0.0 && t_lo < t_hi) || !t_hi.is_finite() {
        return Err(NumericsError::Domain(format!(
            "need 0 <= t_lo < t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    let spec = DiscountSpec::new(delta, d)?;
    Ok(spec.ceil_discount_integral(t_lo, t_hi) / (t_hi - t_lo))
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_BISECTIONS: u32 = 48;

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, NumericsError> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(NumericsError::NonFinite { at: x })
    }
}

/// One 15-point Kronrod estimate and its embedded 7-point Gauss error.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), NumericsError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = eval(f, center - dx)? + eval(f, center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, NumericsError> {
    let (value, err) = gk15(f, a, b)?;
    if err <= tol || err <= 50.0 * f64::EPSILON * value.abs() || depth >= MAX_BISECTIONS {
        return Ok(value);
    }
    let mid = 0.5 * (a + b);
    Ok(adapt(f, a, mid, 0.5 * tol, depth + 1)? + adapt(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Adaptive Gauss-Kronrod quadrature of a smooth integrand on `[a, b]`.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::Domain(format!(
            "integration needs a < b, got [{a}, {b}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    adapt(&f, a, b, tol, 0)
}

/// Integrates a piecewise-smooth integrand with kinks at multiples of `d`
/// (and at any extra `breaks`), splitting the range at each kink.
///
/// The tolerance is shared across pieces in proportion to their length.
pub fn integrate_slotted<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    d: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64, NumericsError> {
    if !(d > 0.0) {
        return Err(NumericsError::Domain(format!(
            "slot length must be positive, got {d}"
        )));
    }
    if !(a < b) {
        return Err(NumericsError::Domain(format!(
            "integration needs a < b, got [{a}, {b}]"
        )));
    }
    let mut cuts = vec![a, b];
    let mut k = (a / d).floor() + 1.0;
    while k * d < b {
        cuts.push(k * d);
        k += 1.0;
    }
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * d);

    let width = b - a;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += adapt(&f, w[0], w[1], tol * (w[1] - w[0]) / width, 0)?;
        }
    }
    Ok(total)
}

/// Neumaier-compensated sum; order-fixed callers get reproducible totals.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
