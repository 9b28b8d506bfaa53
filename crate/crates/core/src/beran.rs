//! Generalized product-limit (Beran) estimation of the conditional survival
//! and censoring distributions, and the local cross-validation bandwidth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CureError, PointError, Result};
use crate::kernel::{epanechnikov, fill_weights, normalize};
use crate::km::StepCurve;
use crate::params::ControlParams;
use crate::pilot::pilot;
use crate::sample::SurvivalSample;
use crate::stats::standardized_iqr;

/// Smoothing parameters: one per evaluation point, or one shared value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "values", rename_all = "snake_case")]
pub enum BandwidthSpec {
    Local(Vec<f64>),
    Global(f64),
}

impl BandwidthSpec {
    /// One bandwidth per point of an `n_points` grid.
    pub fn resolve(&self, n_points: usize) -> Result<Vec<f64>> {
        let values = match self {
            BandwidthSpec::Global(h) => vec![*h; n_points],
            BandwidthSpec::Local(v) => {
                if v.len() != n_points {
                    return Err(CureError::InvalidArgument(format!(
                        "{} local bandwidths for {} evaluation points",
                        v.len(),
                        n_points
                    )));
                }
                v.clone()
            }
        };
        if let Some(h) = values.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(CureError::InvalidArgument(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        Ok(values)
    }

    pub fn is_local(&self) -> bool {
        matches!(self, BandwidthSpec::Local(_))
    }
}

/// Geometric grid of candidate bandwidths spanning
/// `[hbound.0, hbound.1] * sIQR(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    pub values: Vec<f64>,
    pub hbound: (f64, f64),
    pub hl: usize,
}

impl BandwidthGrid {
    pub fn new(x: &[f64], hbound: (f64, f64), hl: usize) -> Result<Self> {
        if hl == 0 || !(hbound.0 > 0.0 && hbound.0 < hbound.1) {
            return Err(CureError::InvalidArgument(format!(
                "invalid grid: hbound = {hbound:?}, hl = {hl}"
            )));
        }
        let scale = standardized_iqr(x)?;
        let (lo, hi) = (hbound.0 * scale, hbound.1 * scale);
        let values = if hl == 1 {
            vec![lo]
        } else {
            let ratio = (hi / lo).ln() / (hl - 1) as f64;
            let mut v: Vec<f64> = (0..hl).map(|l| lo * (ratio * l as f64).exp()).collect();
            v[hl - 1] = hi;
            v
        };
        Ok(Self { values, hbound, hl })
    }
}

/// Suffix sums: `rem[i] = w[i] + w[i + 1] + ...`, with a trailing zero.
pub(crate) fn suffix_sums(w: &[f64], rem: &mut Vec<f64>) {
    rem.clear();
    rem.resize(w.len() + 1, 0.0);
    for i in (0..w.len()).rev() {
        rem[i] = w[i] + rem[i + 1];
    }
}

#[inline]
fn factor(flag: bool, w: f64, rem: f64) -> f64 {
    if flag && w > 0.0 && rem > 0.0 {
        1.0 - w / rem
    } else {
        1.0
    }
}

/// Product-limit estimate over observations sorted by time, evaluated at
/// ascending `eval` times. Factors with zero weight or zero remaining mass
/// are skipped.
pub(crate) fn product_limit(
    times: &[f64],
    flags: &[bool],
    w: &[f64],
    eval: &[f64],
    rem: &mut Vec<f64>,
) -> Vec<f64> {
    suffix_sums(w, rem);
    let mut out = Vec::with_capacity(eval.len());
    let mut s = 1.0;
    let mut i = 0;
    for &t in eval {
        while i < times.len() && times[i] <= t {
            s *= factor(flags[i], w[i], rem[i]);
            i += 1;
        }
        out.push(s);
    }
    out
}

/// Product-limit estimate at a single time.
pub(crate) fn product_limit_at(
    times: &[f64],
    flags: &[bool],
    w: &[f64],
    t: f64,
    rem: &mut Vec<f64>,
) -> f64 {
    suffix_sums(w, rem);
    let mut s = 1.0;
    for i in 0..times.len() {
        if times[i] > t {
            break;
        }
        s *= factor(flags[i], w[i], rem[i]);
    }
    s
}

/// Full step-function representation: one entry per distinct time at which
/// the curve can move.
pub(crate) fn product_limit_curve(
    times: &[f64],
    flags: &[bool],
    w: &[f64],
    rem: &mut Vec<f64>,
) -> StepCurve {
    suffix_sums(w, rem);
    let mut jt = Vec::new();
    let mut jv = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let mut moved = false;
        while i < times.len() && times[i] == t {
            let f = factor(flags[i], w[i], rem[i]);
            if f != 1.0 {
                s *= f;
                moved = true;
            }
            i += 1;
        }
        if moved {
            jt.push(t);
            jv.push(s);
        }
    }
    StepCurve {
        times: jt,
        values: jv,
        x0: None,
    }
}

fn check_eval_times(eval: &[f64]) -> Result<()> {
    if eval.windows(2).any(|p| !(p[0] <= p[1])) || eval.iter().any(|t| t.is_nan()) {
        return Err(CureError::InvalidArgument(
            "evaluation times must be sorted ascending".into(),
        ));
    }
    Ok(())
}

fn censoring_flags(sample: &SurvivalSample) -> Vec<bool> {
    sample.event().iter().map(|e| !e).collect()
}

/// Beran estimate of S(t | x0) at `eval_times`.
pub fn beran_survival(
    sample: &SurvivalSample,
    x0: f64,
    h: f64,
    eval_times: &[f64],
) -> Result<StepCurve> {
    check_eval_times(eval_times)?;
    let w = crate::kernel::nw_weights(sample, x0, h)?.weights;
    let values = product_limit(
        sample.time(),
        sample.event(),
        &w,
        eval_times,
        &mut Vec::new(),
    );
    Ok(StepCurve {
        times: eval_times.to_vec(),
        values,
        x0: Some(x0),
    })
}

/// Beran estimate with caller-supplied weights (in sorted order).
pub fn beran_survival_weighted(
    sample: &SurvivalSample,
    weights: &[f64],
    eval_times: &[f64],
) -> Result<StepCurve> {
    check_eval_times(eval_times)?;
    if weights.len() != sample.len() {
        return Err(CureError::InvalidArgument(
            "one weight per observation required".into(),
        ));
    }
    let values = product_limit(
        sample.time(),
        sample.event(),
        weights,
        eval_times,
        &mut Vec::new(),
    );
    Ok(StepCurve {
        times: eval_times.to_vec(),
        values,
        x0: None,
    })
}

/// Beran estimate of the censoring survival 1 - G(t | x0): the same product
/// with the indicators complemented and the sort order unchanged.
pub fn beran_censoring(
    sample: &SurvivalSample,
    x0: f64,
    h: f64,
    eval_times: &[f64],
) -> Result<StepCurve> {
    check_eval_times(eval_times)?;
    let w = crate::kernel::nw_weights(sample, x0, h)?.weights;
    let flags = censoring_flags(sample);
    let values = product_limit(sample.time(), &flags, &w, eval_times, &mut Vec::new());
    Ok(StepCurve {
        times: eval_times.to_vec(),
        values,
        x0: Some(x0),
    })
}

/// Beran estimate of S(t | x0) on its own jump points.
pub fn beran_curve(sample: &SurvivalSample, x0: f64, h: f64) -> Result<StepCurve> {
    let w = crate::kernel::nw_weights(sample, x0, h)?.weights;
    let mut c = product_limit_curve(sample.time(), sample.event(), &w, &mut Vec::new());
    c.x0 = Some(x0);
    Ok(c)
}

/// Index of the smallest finite value, preferring the last one on ties.
pub(crate) fn argmin_last(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(b) if v > values[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Output of a grid-search bandwidth selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedBandwidth {
    pub x0: Vec<f64>,
    pub h: Vec<f64>,
    /// Candidate grid, kept when `hsave` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Criterion value per x0 (outer) and grid bandwidth (inner), kept with the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Vec<Vec<f64>>>,
    /// Moving average of `h`, present when a smoothing window above 1 was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hsmooth: Option<Vec<f64>>,
    /// Pilot bandwidth at each x0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot: Option<Vec<f64>>,
    /// Points where no bandwidth could be selected (`h` is NaN there).
    #[serde(default)]
    pub errors: Vec<Option<PointError>>,
}

impl SelectedBandwidth {
    /// Bandwidths to estimate with: the smoothed ones when present.
    pub fn bandwidths(&self) -> &[f64] {
        self.hsmooth.as_deref().unwrap_or(&self.h)
    }

    pub fn spec(&self) -> BandwidthSpec {
        BandwidthSpec::Local(self.bandwidths().to_vec())
    }
}

/// Local cross-validation bandwidth for the Beran estimator.
///
/// For each `x0`, minimizes over the grid
/// `CV(h) = sum_{i,j} w_i w_j (1{T_i <= T_j} - F_h^{(-i)}(T_j | X_i))^2`
/// over identifiable pairs, where `F^{(-i)}` is the leave-one-out Beran
/// distribution estimate and `w` are pilot-bandwidth weights at `x0`.
/// A pair is identifiable when `T_i <= T_j` with `δ_i = 1`, or `T_j < T_i`
/// with `δ_j = 1`. Ties resolve to the largest bandwidth.
pub fn berancv(
    sample: &SurvivalSample,
    x0: &[f64],
    params: &ControlParams,
) -> Result<SelectedBandwidth> {
    params.validate()?;
    let xs = sample.x()?;
    let n = sample.len();
    if n < 4 {
        return Err(CureError::DegenerateSample(format!(
            "cross-validation needs at least 4 observations, got {n}"
        )));
    }
    if sample.n_events() == 0 {
        return Err(CureError::DegenerateSample(
            "no identifiable pair: the sample has no uncensored observation".into(),
        ));
    }
    if x0.is_empty() {
        return Err(CureError::InvalidArgument("empty evaluation grid".into()));
    }
    let grid = BandwidthGrid::new(xs, params.hbound, params.hl)?;
    let g = pilot(xs, x0, params)?;

    let mut local = Vec::with_capacity(x0.len());
    for (&x, &gx) in x0.iter().zip(&g) {
        let mut w = Vec::new();
        if !fill_weights(xs, x, gx, &mut w) {
            return Err(CureError::AllWeightsZero { x0: x, h: gx });
        }
        local.push(w);
    }

    let times = sample.time();
    let events = sample.event();
    // last sorted index sharing each observation's time
    let mut group_end = vec![0usize; n];
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && times[j + 1] == times[i] {
                j += 1;
            }
            group_end[i..=j].fill(j);
            i = j + 1;
        }
    }
    let support: Vec<usize> = (0..n)
        .filter(|&i| local.iter().any(|w| w[i] > 0.0))
        .collect();

    let criterion_by_h: Vec<Vec<f64>> = grid
        .values
        .par_iter()
        .map(|&h| {
            let mut crit = vec![0.0; x0.len()];
            let mut kw = vec![0.0; n];
            let mut rem = Vec::with_capacity(n + 1);
            let mut after = vec![0.0; n];
            let mut term = vec![0.0; n];
            for &i in &support {
                for r in 0..n {
                    kw[r] = if r == i {
                        0.0
                    } else {
                        epanechnikov((xs[i] - xs[r]) / h)
                    };
                }
                if normalize(&mut kw) {
                    suffix_sums(&kw, &mut rem);
                    let mut s = 1.0;
                    for r in 0..n {
                        s *= factor(events[r], kw[r], rem[r]);
                        after[r] = s;
                    }
                } else {
                    after.fill(1.0);
                }
                for &j in &support {
                    let ti_le_tj = times[i] <= times[j];
                    let identifiable =
                        (ti_le_tj && events[i]) || (times[j] < times[i] && events[j]);
                    term[j] = if identifiable {
                        let f = 1.0 - after[group_end[j]];
                        let ind = if ti_le_tj { 1.0 } else { 0.0 };
                        (ind - f) * (ind - f)
                    } else {
                        0.0
                    };
                }
                for (c, w) in crit.iter_mut().zip(&local) {
                    if w[i] > 0.0 {
                        let inner: f64 = support.iter().map(|&j| w[j] * term[j]).sum();
                        *c += w[i] * inner;
                    }
                }
            }
            crit
        })
        .collect();

    let mut criterion = vec![vec![0.0; grid.values.len()]; x0.len()];
    for (l, row) in criterion_by_h.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            criterion[p][l] = c;
        }
    }
    let h = criterion
        .iter()
        .map(|c| grid.values[argmin_last(c).unwrap()])
        .collect();
    Ok(SelectedBandwidth {
        x0: x0.to_vec(),
        h,
        grid: params.hsave.then(|| grid.values.clone()),
        criterion: params.hsave.then_some(criterion),
        hsmooth: None,
        pilot: Some(g),
        errors: vec![None; x0.len()],
    })
}
