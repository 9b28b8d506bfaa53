//! Weighted bootstrap with fixed covariates.
//!
//! Each subject keeps its covariate value; its (time, indicator) pair is
//! drawn from the kernel-weighted empirical distribution of the original
//! pairs around that covariate value, using the subject's pilot bandwidth.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{CureError, Result};
use crate::kernel::fill_weights;
use crate::params::ControlParams;
use crate::pilot::{pilot, PilotBandwidth};
use crate::rng;
use crate::sample::{Covariate, SurvivalSample};

/// Bootstrap resample in sorted-time layout. `subject[k]` is the sorted
/// index (in the original sample) of the subject whose covariate the k-th
/// resampled observation carries.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Resample {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub subject: Vec<usize>,
}

impl Resample {
    pub fn tmax1(&self) -> Option<f64> {
        self.time
            .iter()
            .zip(&self.event)
            .rev()
            .find(|(_, &e)| e)
            .map(|(&t, _)| t)
    }

    /// Scatter per-subject values into this resample's sorted layout.
    pub fn gather(&self, per_subject: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.subject.iter().map(|&i| per_subject[i]));
    }
}

struct AtomTable {
    atoms: Vec<usize>,
    cumulative: Vec<f64>,
}

impl AtomTable {
    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= target);
        self.atoms[k.min(self.atoms.len() - 1)]
    }
}

/// Pre-computed sampling tables for one sample and one pilot assignment.
pub(crate) struct Resampler<'a> {
    sample: &'a SurvivalSample,
    tables: Vec<AtomTable>,
    table_of: Vec<usize>,
}

impl<'a> Resampler<'a> {
    /// `g[i]` is the pilot bandwidth at the i-th sorted subject's covariate.
    pub fn new(sample: &'a SurvivalSample, g: &[f64]) -> Result<Self> {
        let xs = sample.x()?;
        let n = xs.len();
        let mut keys: Vec<(f64, f64, usize)> = (0..n).map(|i| (xs[i], g[i], i)).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut tables = Vec::new();
        let mut table_of = vec![0; n];
        let mut w = Vec::with_capacity(n);
        let mut prev: Option<(f64, f64)> = None;
        for &(x, gx, i) in &keys {
            if prev != Some((x, gx)) {
                if !fill_weights(xs, x, gx, &mut w) {
                    return Err(CureError::AllWeightsZero { x0: x, h: gx });
                }
                let mut atoms = Vec::new();
                let mut cumulative = Vec::new();
                let mut acc = 0.0;
                for (j, &wj) in w.iter().enumerate() {
                    if wj > 0.0 {
                        acc += wj;
                        atoms.push(j);
                        cumulative.push(acc);
                    }
                }
                tables.push(AtomTable { atoms, cumulative });
                prev = Some((x, gx));
            }
            table_of[i] = tables.len() - 1;
        }
        Ok(Self {
            sample,
            tables,
            table_of,
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Resample {
        let t = self.sample.time();
        let d = self.sample.event();
        let n = t.len();
        let mut drawn: Vec<(f64, bool, usize)> = (0..n)
            .map(|i| {
                let j = self.tables[self.table_of[i]].draw(rng);
                (t[j], d[j], i)
            })
            .collect();
        drawn.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        Resample {
            time: drawn.iter().map(|r| r.0).collect(),
            event: drawn.iter().map(|r| r.1).collect(),
            subject: drawn.iter().map(|r| r.2).collect(),
        }
    }

    /// `count` resamples on streams `0..count` of `seed`.
    pub fn draw_many(&self, seed: u64, count: usize) -> Vec<Resample> {
        (0..count)
            .into_par_iter()
            .map(|b| self.draw(&mut rng::stream(seed, b as u64)))
            .collect()
    }
}

/// Resampler using the configured pilot evaluated at every subject.
pub(crate) fn resampler_for<'a>(
    sample: &'a SurvivalSample,
    params: &ControlParams,
) -> Result<Resampler<'a>> {
    let xs = sample.x()?;
    let g = pilot(xs, xs, params)?;
    Resampler::new(sample, &g)
}

/// One bootstrap resample. `pilot.g[i]` is the pilot bandwidth at the i-th
/// subject in the sample's sorted order. Covariates are carried over
/// unchanged.
pub fn bootstrap_resample<R: Rng>(
    sample: &SurvivalSample,
    pilot: &PilotBandwidth,
    rng: &mut R,
) -> Result<SurvivalSample> {
    if pilot.g.len() != sample.len() {
        return Err(CureError::InvalidArgument(
            "pilot must give one bandwidth per subject".into(),
        ));
    }
    let xs = sample.x()?;
    let r = Resampler::new(sample, &pilot.g)?.draw(rng);
    let mut x = vec![0.0; xs.len()];
    let mut t = vec![0.0; xs.len()];
    let mut d = vec![false; xs.len()];
    for k in 0..r.time.len() {
        let i = r.subject[k];
        x[i] = xs[i];
        t[i] = r.time[k];
        d[i] = r.event[k];
    }
    // input order of the result follows the original sorted order
    SurvivalSample::new(Covariate::Continuous(x), t, d)
}
