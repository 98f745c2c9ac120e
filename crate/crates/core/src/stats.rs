//! Sample summaries used by the measurement and reporting code.

use serde::{Deserialize, Serialize};

/// Mean, spread and a normal-approximation 95% interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: u64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for n < 2.
    pub std_dev: f64,
    pub std_err: f64,
    /// Half-width: 1.96 standard errors.
    pub ci95: f64,
}

impl SampleStats {
    pub fn from_iter(values: impl IntoIterator<Item = f64>) -> Self {
        // Welford's update keeps the variance stable for long runs.
        let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let std_dev = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
        let std_err = if n > 0 { std_dev / (n as f64).sqrt() } else { 0.0 };
        SampleStats {
            n,
            mean: if n > 0 { mean } else { f64::NAN },
            std_dev,
            std_err,
            ci95: 1.96 * std_err,
        }
    }

    pub fn within(&self, target: f64, k_se: f64) -> bool {
        (self.mean - target).abs() <= k_se * self.std_err
    }
}
