//! Test for sufficient follow-up.

use serde::{Deserialize, Serialize};

use crate::sample::SurvivalSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MZTestResult {
    /// Number of observed times in `interval`.
    pub statistic: usize,
    pub n: usize,
    /// `T_(n) - T¹max`; absent when there is no uncensored observation.
    pub delta: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub pvalue: f64,
    pub no_events: bool,
}

/// Counts the observed times in `(max(0, T¹max - δ), T¹max]` with
/// `δ = T_(n) - T¹max`; the p-value is `(1 - N/n)^n`. Small p-values
/// support sufficient follow-up.
///
/// A sample without uncensored observations gives statistic 0 and p-value 1.
pub fn testmz(sample: &SurvivalSample) -> MZTestResult {
    let n = sample.len();
    let Some(tau) = sample.tmax1() else {
        return MZTestResult {
            statistic: 0,
            n,
            delta: None,
            interval: None,
            pvalue: 1.0,
            no_events: true,
        };
    };
    let delta = sample.max_time() - tau;
    let lo = (tau - delta).max(0.0);
    let statistic = sample
        .time()
        .iter()
        .filter(|&&t| t > lo && t <= tau)
        .count();
    MZTestResult {
        statistic,
        n,
        delta: Some(delta),
        interval: Some((lo, tau)),
        pvalue: mz_pvalue(statistic, n),
        no_events: false,
    }
}

/// `(1 - N/n)^n`.
pub fn mz_pvalue(statistic: usize, n: usize) -> f64 {
    (1.0 - statistic as f64 / n as f64).powi(n as i32)
}
