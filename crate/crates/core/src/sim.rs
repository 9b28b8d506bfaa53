//! Synthetic logistic/Weibull mixture cure model.
//!
//! `X ~ U(-2, 2)`, cure probability `1 - p(x)` with
//! `p(x) = e^{2x} / (1 + e^{2x})`, uncured lifetimes Weibull with shape
//! `(x + 4) / 2` and scale 1, censoring `Exp(1)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};
use crate::rng;
use crate::sample::SurvivalSample;

/// The generating model's true functions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrueModel;

impl TrueModel {
    /// Probability of being uncured.
    pub fn p(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-2.0 * x).exp())
    }

    pub fn cure(&self, x: f64) -> f64 {
        1.0 - self.p(x)
    }

    pub fn shape(&self, x: f64) -> f64 {
        0.5 * (x + 4.0)
    }

    /// Latency `S0(t | x) = exp(-t^shape(x))`.
    pub fn latency(&self, t: f64, x: f64) -> f64 {
        (-t.max(0.0).powf(self.shape(x))).exp()
    }

    /// Rows `(x, t, cure(x), latency(t, x))` over the product grid.
    pub fn table(&self, xs: &[f64], ts: &[f64]) -> Vec<TrueValue> {
        xs.iter()
            .flat_map(|&x| {
                ts.iter().map(move |&t| TrueValue {
                    x,
                    t,
                    cure: self.cure(x),
                    latency: self.latency(t, x),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueValue {
    pub x: f64,
    pub t: f64,
    pub cure: f64,
    pub latency: f64,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub sample: SurvivalSample,
    pub model: TrueModel,
}

/// Draws `n` subjects from stream 0 of `seed`. Each subject consumes, in
/// order, its covariate, the cure uniform, the Weibull lifetime and the
/// censoring time.
pub fn simulate_model(n: usize, seed: u64) -> Result<Simulated> {
    if n == 0 {
        return Err(CureError::InvalidArgument("n must be at least 1".into()));
    }
    let model = TrueModel;
    let mut rng = rng::stream(seed, 0);
    let censor = Exp::new(1.0).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random_range(-2.0..2.0);
        let u: f64 = rng.random();
        let y = Weibull::new(1.0, model.shape(xi)).unwrap().sample(&mut rng);
        let c = censor.sample(&mut rng);
        let uncured = u < model.p(xi);
        x.push(xi);
        if uncured {
            t.push(y.min(c));
            d.push(y < c);
        } else {
            t.push(c);
            d.push(false);
        }
    }
    let sample = SurvivalSample::new(crate::sample::Covariate::Continuous(x), t, d)?;
    Ok(Simulated { sample, model })
}
