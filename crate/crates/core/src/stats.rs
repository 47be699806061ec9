use serde::{Deserialize, Serialize};

use crate::numerics::compensated_sum;

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n: u64,
}

impl EstimateWithCI {
    /// Summarizes samples in the given order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            };
        }
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            n: n as u64,
        }
    }

    /// An exact value.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n: 0,
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    ///
    /// A zero-variance sample of size `n` is given the resolution of one
    /// event in `n` (scaled by the magnitudes involved), so an all-ones
    /// Bernoulli sample is not reported as infinitely far from 0.99999.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if diff == 0.0 {
            return 0.0;
        }
        let floor = if self.n > 0 {
            self.mean.abs().max(target.abs()) / self.n as f64
        } else {
            0.0
        };
        let se = self.stderr.max(floor);
        if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }

    /// z-score of a sample proportion, measured in binomial standard errors
    /// at `target` (or the sample's own, if larger).
    pub fn proportion_z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if diff == 0.0 {
            return 0.0;
        }
        let null_se = if self.n > 0 {
            (target * (1.0 - target) / self.n as f64).max(0.0).sqrt()
        } else {
            0.0
        };
        let se = self.stderr.max(null_se);
        if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
            n: self.n,
        }
    }
}
