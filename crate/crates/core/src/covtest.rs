//! Covariate significance test for the cure probability.

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beran::{berancv, product_limit_at, product_limit_curve};
use crate::error::{CureError, Result};
use crate::hboot::latency_from;
use crate::kernel::fill_weights;
use crate::km::{km_cure, StepCurve};
use crate::params::ControlParams;
use crate::pilot::pilot;
use crate::rng;
use crate::sample::{Covariate, SurvivalSample};

const MAX_LEVELS: usize = 7;

/// Estimator of the conditional censoring distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringModel {
    /// Kaplan-Meier of the censoring times, ignoring the covariate.
    #[default]
    Unconditional,
    /// Beran with cross-validation bandwidths for a continuous covariate,
    /// stratified Kaplan-Meier for a categorical one.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CovTestOptions {
    /// Censoring estimate entering the synthetic responses.
    pub eta: CensoringModel,
    /// Censoring distribution used to generate bootstrap censoring times.
    pub resample: CensoringModel,
    /// Recompute the cure threshold on every resample instead of keeping the
    /// one from the original sample.
    pub refit_tau: bool,
}

/// Synthetic responses, aligned with the sample's sorted layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaResponse {
    pub eta: Vec<f64>,
    pub tau_hat: f64,
    /// Subjects whose inverse censoring weight was capped at n.
    #[serde(default)]
    pub capped: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovTestResult {
    pub cm_stat: f64,
    pub cm_pvalue: f64,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub covariate_kind: CovariateKind,
    pub options: CovTestOptions,
    /// Number of capped inverse censoring weights in the observed responses.
    pub capped: usize,
}

/// Group index per subject, with groups in ascending covariate order.
struct Groups {
    of: Vec<usize>,
    count: usize,
}

fn groups(x: &Covariate) -> Groups {
    match x {
        Covariate::Continuous(v) => {
            let mut distinct = v.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let of = v
                .iter()
                .map(|a| distinct.partition_point(|b| b < a))
                .collect();
            Groups {
                of,
                count: distinct.len(),
            }
        }
        Covariate::Categorical { levels, codes } => Groups {
            of: codes.clone(),
            count: levels.len(),
        },
    }
}

fn distinct_values(v: &[f64]) -> Vec<f64> {
    let mut d = v.to_vec();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

/// Censoring survival `1 - G(tau | X_i)` per subject (sorted layout).
fn censoring_survival_at(
    sample: &SurvivalSample,
    tau: f64,
    model: CensoringModel,
    params: &ControlParams,
) -> Result<Vec<f64>> {
    let n = sample.len();
    let flags: Vec<bool> = sample.event().iter().map(|e| !e).collect();
    let mut rem = Vec::with_capacity(n + 1);
    let per_group = group_weights(sample, model, params)?;
    let g = groups(sample.covariate());
    let values: Vec<f64> = per_group
        .iter()
        .map(|w| product_limit_at(sample.time(), &flags, w, tau, &mut rem))
        .collect();
    Ok((0..n)
        .map(|i| values[if per_group.len() == 1 { 0 } else { g.of[i] }])
        .collect())
}

/// Weight vectors for the censoring estimate: one shared vector for the
/// unconditional model, otherwise one per covariate group.
fn group_weights(
    sample: &SurvivalSample,
    model: CensoringModel,
    params: &ControlParams,
) -> Result<Vec<Vec<f64>>> {
    let n = sample.len();
    match (model, sample.covariate()) {
        (CensoringModel::Unconditional, _) => Ok(vec![vec![1.0; n]]),
        (CensoringModel::Conditional, Covariate::Categorical { levels, codes }) => Ok((0..levels
            .len())
            .map(|l| {
                codes
                    .iter()
                    .map(|&c| if c == l { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()),
        (CensoringModel::Conditional, Covariate::Continuous(xs)) => {
            let distinct = distinct_values(xs);
            let cv = berancv(sample, &distinct, params)?;
            let mut out = Vec::with_capacity(distinct.len());
            for (&x, &h) in distinct.iter().zip(&cv.h) {
                let mut w = Vec::with_capacity(n);
                if !fill_weights(xs, x, h, &mut w) {
                    return Err(CureError::AllWeightsZero { x0: x, h });
                }
                out.push(w);
            }
            Ok(out)
        }
    }
}

fn eta_from(sample: &SurvivalSample, tau: f64, gbar: &[f64]) -> EtaResponse {
    let n = sample.len();
    let mut capped = Vec::new();
    let eta = (0..n)
        .map(|i| {
            if sample.event()[i] || sample.time()[i] < tau {
                0.0
            } else if gbar[i] > 0.0 {
                (1.0 / gbar[i]).min(n as f64)
            } else {
                capped.push(i);
                n as f64
            }
        })
        .collect();
    EtaResponse {
        eta,
        tau_hat: tau,
        capped,
    }
}

/// Synthetic responses `η_i`: zero for uncensored subjects and for those
/// censored before `τ = T¹max`, `1 / (1 - G(τ | X_i))` otherwise.
///
/// Returns [`CureError::GbarZero`] when `1 - G(τ | X_i) = 0` for a
/// contributing subject.
pub fn estimate_eta(
    sample: &SurvivalSample,
    model: CensoringModel,
    params: &ControlParams,
) -> Result<EtaResponse> {
    let tau = sample.tmax1().ok_or(CureError::NoUncensored)?;
    let gbar = censoring_survival_at(sample, tau, model, params)?;
    let eta = eta_from(sample, tau, &gbar);
    match eta.capped.first() {
        Some(&index) => Err(CureError::GbarZero { index }),
        None => Ok(eta),
    }
}

/// `U_n(X_i) = (1/n) Σ_j (η_j - mean(η)) 1{X_j ≤ X_i}` for every i, with
/// `eta` and `covariate` aligned.
pub fn u_process(eta: &[f64], covariate: &[f64]) -> Result<Vec<f64>> {
    if eta.len() != covariate.len() || eta.is_empty() {
        return Err(CureError::InvalidArgument(
            "eta and covariate must be non-empty and of equal length".into(),
        ));
    }
    let g = groups(&Covariate::Continuous(covariate.to_vec()));
    let order: Vec<usize> = (0..g.count).collect();
    let u = group_process(&centered_group_sums(eta, &g), &order, eta.len());
    Ok(g.of.iter().map(|&k| u[k]).collect())
}

fn centered_group_sums(eta: &[f64], g: &Groups) -> Vec<(f64, usize)> {
    let n = eta.len() as f64;
    let mean = eta.iter().sum::<f64>() / n;
    let mut sums = vec![(0.0, 0usize); g.count];
    for (&e, &k) in eta.iter().zip(&g.of) {
        sums[k].0 += e - mean;
        sums[k].1 += 1;
    }
    sums
}

/// Process value per group when groups are visited in `order`. The final
/// non-empty group closes the sum, where the value is zero by centering.
fn group_process(sums: &[(f64, usize)], order: &[usize], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; sums.len()];
    let last = order.iter().rposition(|&k| sums[k].1 > 0);
    let mut acc = 0.0;
    for (pos, &k) in order.iter().enumerate() {
        acc += sums[k].0;
        u[k] = if Some(pos) >= last {
            0.0
        } else {
            acc / n as f64
        };
    }
    u
}

fn cm_ks(sums: &[(f64, usize)], order: &[usize], n: usize) -> (f64, f64) {
    let u = group_process(sums, order, n);
    let mut cm = 0.0;
    let mut sup: f64 = 0.0;
    for &k in order {
        if sums[k].1 > 0 {
            cm += sums[k].1 as f64 * u[k] * u[k];
            sup = sup.max(u[k].abs());
        }
    }
    (cm, (n as f64).sqrt() * sup)
}

/// Level orderings, each pair of mutually reversed orderings represented once.
fn orderings(levels: usize) -> Vec<Vec<usize>> {
    if levels < 2 {
        return vec![(0..levels).collect()];
    }
    (0..levels)
        .permutations(levels)
        .filter(|p| p[0] < p[levels - 1])
        .collect()
}

fn statistics(x: &Covariate, eta: &[f64], orders: &[Vec<usize>]) -> (f64, f64) {
    let g = groups(x);
    let sums = centered_group_sums(eta, &g);
    orders.iter().fold((0.0f64, 0.0f64), |(cm, ks), o| {
        let (c, k) = cm_ks(&sums, o, eta.len());
        (cm.max(c), ks.max(k))
    })
}

/// Discrete distribution from the drops of a survival step curve, with the
/// mass left beyond the last jump placed at `residual_at`.
struct Atoms {
    times: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Atoms {
    fn from_survival(curve: &StepCurve, residual_at: f64) -> Self {
        let mut times = Vec::with_capacity(curve.times.len() + 1);
        let mut cumulative = Vec::with_capacity(curve.times.len() + 1);
        let mut prev = 1.0;
        for (&t, &v) in curve.times.iter().zip(&curve.values) {
            let v = v.clamp(0.0, prev);
            if v < prev {
                times.push(t);
                cumulative.push(1.0 - v);
            }
            prev = v;
        }
        if prev > 0.0 || times.is_empty() {
            times.push(residual_at);
            cumulative.push(1.0);
        }
        Self { times, cumulative }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.cumulative.last().unwrap();
        let k = self.cumulative.partition_point(|&c| c <= target);
        self.times[k.min(self.times.len() - 1)]
    }
}

/// Generating model for bootstrap resamples under the null hypothesis.
struct NullModel {
    cure: f64,
    latency: Vec<Atoms>,
    censoring: Vec<Atoms>,
    group: Vec<usize>,
}

impl NullModel {
    fn new(
        sample: &SurvivalSample,
        options: &CovTestOptions,
        params: &ControlParams,
    ) -> Result<Self> {
        let n = sample.len();
        let tau = sample.tmax1().ok_or(CureError::NoUncensored)?;
        let tmax = sample.max_time();
        let cure = km_cure(sample);
        let g = groups(sample.covariate());
        let mut rem = Vec::with_capacity(n + 1);

        let pooled = latency_from(product_limit_curve(
            sample.time(),
            sample.event(),
            &vec![1.0; n],
            &mut rem,
        ))
        .ok_or(CureError::NoUncensored)?;
        let latency_weights: Vec<Vec<f64>> = match sample.covariate() {
            Covariate::Continuous(xs) => {
                let distinct = distinct_values(xs);
                let gx = pilot(xs, &distinct, params)?;
                distinct
                    .iter()
                    .zip(&gx)
                    .map(|(&x, &h)| {
                        let mut w = Vec::with_capacity(n);
                        fill_weights(xs, x, h, &mut w);
                        w
                    })
                    .collect()
            }
            Covariate::Categorical { levels, codes } => (0..levels.len())
                .map(|l| {
                    codes
                        .iter()
                        .map(|&c| if c == l { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect(),
        };
        let latency = latency_weights
            .iter()
            .map(|w| {
                let curve = if w.iter().any(|&v| v > 0.0) {
                    latency_from(product_limit_curve(
                        sample.time(),
                        sample.event(),
                        w,
                        &mut rem,
                    ))
                } else {
                    None
                };
                Atoms::from_survival(curve.as_ref().unwrap_or(&pooled), tau)
            })
            .collect();

        let flags: Vec<bool> = sample.event().iter().map(|e| !e).collect();
        let censoring = group_weights(sample, options.resample, params)?
            .iter()
            .map(|w| {
                Atoms::from_survival(
                    &product_limit_curve(sample.time(), &flags, w, &mut rem),
                    tmax,
                )
            })
            .collect();
        Ok(Self {
            cure,
            latency,
            censoring,
            group: g.of,
        })
    }

    fn censoring_for(&self, group: usize) -> &Atoms {
        if self.censoring.len() == 1 {
            &self.censoring[0]
        } else {
            &self.censoring[group]
        }
    }

    /// Steps A and B: resampled subjects (sorted indices) with new
    /// observed times and indicators.
    fn draw<R: Rng>(&self, rng: &mut R) -> (Vec<usize>, Vec<f64>, Vec<bool>) {
        let n = self.group.len();
        let mut who = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let k = self.group[i];
            let cured = rng.random::<f64>() < self.cure;
            let y = self.latency[k].draw(rng);
            let c = self.censoring_for(k).draw(rng);
            let y = if cured { f64::INFINITY } else { y };
            who.push(i);
            t.push(y.min(c));
            d.push(y <= c);
        }
        (who, t, d)
    }
}

fn pvalue(observed: f64, replicates: impl Iterator<Item = f64>, b: usize) -> f64 {
    let exceed = replicates.filter(|&s| s >= observed).count();
    (1 + exceed) as f64 / (b + 1) as f64
}

/// Covariate significance test with the default options.
pub fn testcov(sample: &SurvivalSample, params: &ControlParams) -> Result<CovTestResult> {
    testcov_with(sample, params, &CovTestOptions::default())
}

/// Cramér-von Mises and Kolmogorov-Smirnov tests of `H0: p(x) = p` based
/// on the process [`u_process`], with bootstrap p-values
/// `(1 + #{stat* ≥ stat}) / (B + 1)`.
///
/// For a categorical covariate both statistics are maximized over the
/// orderings of the levels. Capped inverse censoring weights are counted in
/// [`CovTestResult::capped`].
pub fn testcov_with(
    sample: &SurvivalSample,
    params: &ControlParams,
    options: &CovTestOptions,
) -> Result<CovTestResult> {
    params.validate()?;
    let n = sample.len();
    if n < 4 {
        return Err(CureError::DegenerateSample(format!(
            "the covariate test needs at least 4 observations, got {n}"
        )));
    }
    let tau = sample.tmax1().ok_or(CureError::NoUncensored)?;
    let (kind, orders) = match sample.covariate() {
        Covariate::Continuous(_) => (CovariateKind::Continuous, vec![]),
        Covariate::Categorical { levels, .. } => {
            if levels.len() > MAX_LEVELS {
                return Err(CureError::TooManyLevels {
                    levels: levels.len(),
                });
            }
            (CovariateKind::Categorical, orderings(levels.len()))
        }
    };
    let stats_of = |x: &Covariate, eta: &[f64]| match kind {
        CovariateKind::Continuous => {
            let g = groups(x);
            let order: Vec<usize> = (0..g.count).collect();
            cm_ks(&centered_group_sums(eta, &g), &order, eta.len())
        }
        CovariateKind::Categorical => statistics(x, eta, &orders),
    };

    let gbar = censoring_survival_at(sample, tau, options.eta, params)?;
    let eta = eta_from(sample, tau, &gbar);
    let (cm_stat, ks_stat) = stats_of(sample.covariate(), &eta.eta);
    let result = |cm_pvalue, ks_pvalue| CovTestResult {
        cm_stat,
        cm_pvalue,
        ks_stat,
        ks_pvalue,
        b: params.b,
        covariate_kind: kind,
        options: *options,
        capped: eta.capped.len(),
    };
    if groups(sample.covariate()).count == 1 {
        // every resample repeats the single covariate value: all statistics vanish
        return Ok(result(1.0, 1.0));
    }

    let model = NullModel::new(sample, options, params)?;
    let seed = params.seed_or_default();
    let replicates: Vec<Result<(f64, f64)>> = (0..params.b)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b as u64);
            let (who, t, d) = model.draw(&mut rng);
            let x = match sample.covariate() {
                Covariate::Continuous(xs) => {
                    Covariate::Continuous(who.iter().map(|&i| xs[i]).collect())
                }
                Covariate::Categorical { levels, codes } => Covariate::Categorical {
                    levels: levels.clone(),
                    codes: who.iter().map(|&i| codes[i]).collect(),
                },
            };
            let boot = SurvivalSample::new(x, t, d)?;
            let tau = if options.refit_tau {
                match boot.tmax1() {
                    Some(t) => t,
                    None => return Ok((0.0, 0.0)),
                }
            } else {
                tau
            };
            let gbar = match censoring_survival_at(&boot, tau, options.eta, params) {
                Ok(g) => g,
                Err(e) if e.class() == crate::error::ErrorClass::Usage => return Err(e),
                // conditional censoring fit impossible on this resample
                Err(_) => censoring_survival_at(&boot, tau, CensoringModel::Unconditional, params)?,
            };
            let eta = eta_from(&boot, tau, &gbar);
            Ok(stats_of(boot.covariate(), &eta.eta))
        })
        .collect();
    let replicates = replicates.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(result(
        pvalue(cm_stat, replicates.iter().map(|r| r.0), params.b),
        pvalue(ks_stat, replicates.iter().map(|r| r.1), params.b),
    ))
}
