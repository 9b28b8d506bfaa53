//! Unconditional product-limit estimation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sample::SurvivalSample;

/// Right-continuous, non-increasing step function with values in [0, 1].
///
/// `values[k]` holds on `[times[k], times[k + 1])`; the curve is 1 before the
/// first time and stays flat after the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl StepCurve {
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            k => self.values[k - 1],
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }
}

/// Kaplan-Meier estimate of the survival function, with jumps at the
/// distinct uncensored times.
pub fn km_survival(sample: &SurvivalSample) -> StepCurve {
    let t = sample.time();
    let d = sample.event();
    let n = t.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let at_risk = (n - i) as f64;
        let mut j = i;
        let mut deaths = 0usize;
        while j < n && t[j] == t[i] {
            deaths += d[j] as usize;
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk;
            times.push(t[i]);
            values.push(s);
        }
        i = j;
    }
    StepCurve {
        times,
        values,
        x0: None,
    }
}

/// Unconditional cure estimate: the KM curve at the largest uncensored time
/// (its minimum). 1 when there is no event.
pub fn km_cure(sample: &SurvivalSample) -> f64 {
    km_survival(sample).last_value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCure {
    pub level: String,
    pub n: usize,
    pub events: usize,
    pub cure: f64,
}

/// KM cure estimate within each level of a categorical covariate.
pub fn stratified_cure(sample: &SurvivalSample) -> Result<Vec<StratumCure>> {
    Ok(sample
        .strata()?
        .into_iter()
        .map(|(level, s)| StratumCure {
            level,
            n: s.len(),
            events: s.n_events(),
            cure: km_cure(&s),
        })
        .collect())
}
