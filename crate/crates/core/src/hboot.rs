//! Bootstrap bandwidth selection for the cure-rate and latency estimators.
//!
//! One set of B resamples is generated up front and shared by every grid
//! bandwidth and every evaluation point. Criteria are accumulated over
//! resamples in index order, so the result does not depend on the number
//! of worker threads.

use rayon::prelude::*;

use crate::beran::{
    argmin_last, product_limit_at, product_limit_curve, BandwidthGrid, SelectedBandwidth,
};
use crate::error::{CureError, PointError, Result};
use crate::kernel::{epanechnikov, fill_weights};
use crate::km::StepCurve;
use crate::params::ControlParams;
use crate::pilot::pilot;
use crate::resample::{resampler_for, Resample};
use crate::sample::SurvivalSample;
use crate::stats::quantile;

/// Share of resamples that must give a defined estimate for a candidate
/// bandwidth to be eligible.
const MIN_VALID_FRACTION: f64 = 0.1;

/// Centered moving average; the window is clipped at the ends of the vector.
/// Even windows reach one element further forward than backward. NaN
/// entries are left out of the averages.
pub fn smooth_bandwidths(h: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    if window == 1 {
        return h.to_vec();
    }
    let back = (window - 1) / 2;
    let fwd = window / 2;
    (0..h.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(h.len() - 1);
            let vals: Vec<f64> = h[lo..=hi].iter().copied().filter(|v| !v.is_nan()).collect();
            if vals.is_empty() || h[i].is_nan() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

/// Exact integral over [0, upper] of the squared difference of two
/// right-continuous step functions.
pub fn integrated_squared_difference(a: &StepCurve, b: &StepCurve, upper: f64) -> f64 {
    let mut total = 0.0;
    let mut left = 0.0;
    let (mut i, mut j) = (0, 0);
    let (mut va, mut vb) = (1.0, 1.0);
    // jumps at or before zero set the starting values
    while i < a.times.len() && a.times[i] <= 0.0 {
        va = a.values[i];
        i += 1;
    }
    while j < b.times.len() && b.times[j] <= 0.0 {
        vb = b.values[j];
        j += 1;
    }
    while left < upper {
        let na = a.times.get(i).copied().unwrap_or(f64::INFINITY);
        let nb = b.times.get(j).copied().unwrap_or(f64::INFINITY);
        let right = na.min(nb).min(upper);
        total += (va - vb) * (va - vb) * (right - left);
        left = right;
        if na == right {
            va = a.values[i];
            i += 1;
        }
        if nb == right {
            vb = b.values[j];
            j += 1;
        }
    }
    total
}

pub(crate) fn kernel_column(xs: &[f64], x0: f64, h: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    out.extend(xs.iter().map(|&x| epanechnikov((x0 - x) / h)));
    out.iter().any(|&k| k > 0.0)
}

/// Cure probability from a resample with per-subject kernel values.
pub(crate) fn resample_cure(
    r: &Resample,
    kernel: &[f64],
    w: &mut Vec<f64>,
    rem: &mut Vec<f64>,
) -> f64 {
    r.gather(kernel, w);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    match r.tmax1() {
        Some(t) => product_limit_at(&r.time, &r.event, w, t, rem),
        None => 1.0,
    }
}

/// Latency curve `(S - c) / (1 - c)` with `c` the curve's final value;
/// `None` when the estimated cure probability is 1.
pub(crate) fn latency_from(mut s: StepCurve) -> Option<StepCurve> {
    let cure = s.last_value();
    let p = 1.0 - cure;
    if !(p > 0.0) {
        return None;
    }
    s.values.iter_mut().for_each(|v| *v = (*v - cure) / p);
    Some(s)
}

pub(crate) fn resample_latency(
    r: &Resample,
    kernel: &[f64],
    w: &mut Vec<f64>,
    rem: &mut Vec<f64>,
) -> Option<StepCurve> {
    r.gather(kernel, w);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    latency_from(product_limit_curve(&r.time, &r.event, w, rem))
}

struct Setup<'a> {
    xs: &'a [f64],
    grid: BandwidthGrid,
    g: Vec<f64>,
    resamples: Vec<Resample>,
}

fn setup<'a>(sample: &'a SurvivalSample, x0: &[f64], params: &ControlParams) -> Result<Setup<'a>> {
    params.validate()?;
    let xs = sample.x()?;
    if sample.len() < 4 {
        return Err(CureError::DegenerateSample(format!(
            "bandwidth selection needs at least 4 observations, got {}",
            sample.len()
        )));
    }
    if x0.is_empty() {
        return Err(CureError::InvalidArgument("empty evaluation grid".into()));
    }
    let grid = BandwidthGrid::new(xs, params.hbound, params.hl)?;
    let g = pilot(xs, x0, params)?;
    let resamples = resampler_for(sample, params)?.draw_many(params.seed_or_default(), params.b);
    Ok(Setup {
        xs,
        grid,
        g,
        resamples,
    })
}

/// Per-point criterion evaluation shared by both selectors. `point` returns
/// the criterion over the grid, or a point error.
fn select<F>(x0: &[f64], setup: &Setup<'_>, params: &ControlParams, point: F) -> SelectedBandwidth
where
    F: Fn(usize) -> std::result::Result<Vec<f64>, PointError> + Sync,
{
    let per_point: Vec<std::result::Result<Vec<f64>, PointError>> =
        (0..x0.len()).into_par_iter().map(&point).collect();
    let mut h = Vec::with_capacity(x0.len());
    let mut errors = Vec::with_capacity(x0.len());
    let mut criterion = Vec::with_capacity(x0.len());
    for res in per_point {
        match res {
            Ok(c) => {
                match argmin_last(&c) {
                    Some(l) => {
                        h.push(setup.grid.values[l]);
                        errors.push(None);
                    }
                    None => {
                        h.push(f64::NAN);
                        errors.push(Some(PointError::InsufficientResamples {
                            valid: 0,
                            total: params.b,
                        }));
                    }
                }
                criterion.push(c);
            }
            Err(e) => {
                h.push(f64::NAN);
                errors.push(Some(e));
                criterion.push(vec![f64::NAN; setup.grid.values.len()]);
            }
        }
    }
    let hsmooth = (params.hsmooth > 1).then(|| smooth_bandwidths(&h, params.hsmooth));
    SelectedBandwidth {
        x0: x0.to_vec(),
        h,
        grid: params.hsave.then(|| setup.grid.values.clone()),
        criterion: params.hsave.then_some(criterion),
        hsmooth,
        pilot: Some(setup.g.clone()),
        errors,
    }
}

fn too_few(valid: usize, total: usize) -> bool {
    (valid as f64) < MIN_VALID_FRACTION * total as f64 || valid == 0
}

/// Local bootstrap bandwidth for the cure-rate estimator: the grid value
/// minimizing the bootstrap MSE of the cure estimate against the pilot
/// estimate from the original sample.
pub fn probcure_hboot(
    sample: &SurvivalSample,
    x0: &[f64],
    params: &ControlParams,
) -> Result<SelectedBandwidth> {
    let setup = setup(sample, x0, params)?;
    let xs = setup.xs;
    let n = xs.len();
    let tmax1 = sample.tmax1();
    let b_total = setup.resamples.len();

    Ok(select(x0, &setup, params, |p| {
        let mut w = Vec::with_capacity(n);
        let mut rem = Vec::with_capacity(n + 1);
        if !fill_weights(xs, x0[p], setup.g[p], &mut w) {
            return Err(PointError::AllWeightsZero);
        }
        let reference = match tmax1 {
            Some(t) => product_limit_at(sample.time(), sample.event(), &w, t, &mut rem),
            None => 1.0,
        };
        let mut kernel = Vec::with_capacity(n);
        let crit = setup
            .grid
            .values
            .iter()
            .map(|&h| {
                if !kernel_column(xs, x0[p], h, &mut kernel) {
                    return f64::INFINITY;
                }
                let mut acc = 0.0;
                for r in &setup.resamples {
                    let c = resample_cure(r, &kernel, &mut w, &mut rem);
                    acc += (c - reference) * (c - reference);
                }
                acc / b_total as f64
            })
            .collect();
        Ok(crit)
    }))
}

/// Local bootstrap bandwidth for the latency estimator: the grid value
/// minimizing the bootstrap MISE over [0, u], u the `qt` quantile of the
/// observed times. Resamples with an estimated cure probability of 1 are
/// dropped from the average.
pub fn latency_hboot(
    sample: &SurvivalSample,
    x0: &[f64],
    params: &ControlParams,
) -> Result<SelectedBandwidth> {
    let setup = setup(sample, x0, params)?;
    let xs = setup.xs;
    let n = xs.len();
    let upper = quantile(sample.time(), params.qt);
    let b_total = setup.resamples.len();

    Ok(select(x0, &setup, params, |p| {
        let mut w = Vec::with_capacity(n);
        let mut rem = Vec::with_capacity(n + 1);
        if !fill_weights(xs, x0[p], setup.g[p], &mut w) {
            return Err(PointError::AllWeightsZero);
        }
        let reference = latency_from(product_limit_curve(
            sample.time(),
            sample.event(),
            &w,
            &mut rem,
        ))
        .ok_or(PointError::CureFractionOne)?;
        let mut kernel = Vec::with_capacity(n);
        let crit = setup
            .grid
            .values
            .iter()
            .map(|&h| {
                if !kernel_column(xs, x0[p], h, &mut kernel) {
                    return f64::INFINITY;
                }
                let mut acc = 0.0;
                let mut valid = 0usize;
                for r in &setup.resamples {
                    if let Some(s0) = resample_latency(r, &kernel, &mut w, &mut rem) {
                        acc += integrated_squared_difference(&s0, &reference, upper);
                        valid += 1;
                    }
                }
                if too_few(valid, b_total) {
                    f64::INFINITY
                } else {
                    acc / valid as f64
                }
            })
            .collect();
        Ok(crit)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_examples() {
        let h = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(smooth_bandwidths(&h, 1), h.to_vec());
        assert_eq!(smooth_bandwidths(&h, 3), vec![1.5, 2.0, 3.0, 4.0, 4.5]);
        assert_eq!(smooth_bandwidths(&[2.5; 6], 4), vec![2.5; 6]);
        // even window: one back, two forward
        assert_eq!(smooth_bandwidths(&h, 4), vec![2.0, 2.5, 3.5, 4.0, 4.5]);
    }

    #[test]
    fn integral_hand_case() {
        // a differs from the constant-1 curve by 0.5 on [0, 1)
        let a = StepCurve {
            times: vec![0.0, 1.0],
            values: vec![0.5, 1.0],
            x0: None,
        };
        let b = StepCurve {
            times: vec![],
            values: vec![],
            x0: None,
        };
        assert_eq!(integrated_squared_difference(&a, &b, 2.0), 0.25);
        assert_eq!(integrated_squared_difference(&a, &a, 2.0), 0.0);
    }

    #[test]
    fn integral_against_fine_riemann_sum() {
        let a = StepCurve {
            times: vec![0.3, 0.9, 1.7],
            values: vec![0.8, 0.4, 0.1],
            x0: None,
        };
        let b = StepCurve {
            times: vec![0.5, 1.2],
            values: vec![0.6, 0.2],
            x0: None,
        };
        let upper = 1.5;
        let m = 150_000;
        let dt = upper / m as f64;
        let riemann: f64 = (0..m)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                (a.eval(t) - b.eval(t)).powi(2) * dt
            })
            .sum();
        let exact = integrated_squared_difference(&a, &b, upper);
        let by_hand = 0.3 * 0.0
            + 0.2 * (0.8f64 - 1.0).powi(2)
            + 0.4 * (0.8f64 - 0.6).powi(2)
            + 0.3 * (0.4f64 - 0.6).powi(2)
            + 0.3 * (0.4f64 - 0.2).powi(2);
        assert!((exact - by_hand).abs() < 1e-15);
        assert!((exact - riemann).abs() < 1e-9);
    }

    fn toy() -> SurvivalSample {
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let t: Vec<f64> = (0..n).map(|i| ((i * 17) % n) as f64 / 4.0 + 0.1).collect();
        let d: Vec<u8> = (0..n).map(|i| (i % 4 != 0) as u8).collect();
        SurvivalSample::from_columns(x, t, d).unwrap()
    }

    #[test]
    fn single_candidate_grid() {
        let s = toy();
        let params = ControlParams {
            b: 20,
            hl: 1,
            seed: Some(1),
            ..Default::default()
        };
        let grid = BandwidthGrid::new(s.x().unwrap(), params.hbound, 1).unwrap();
        let sel = probcure_hboot(&s, &[0.3, 0.6], &params).unwrap();
        assert_eq!(sel.h, vec![grid.values[0]; 2]);
        let sel = latency_hboot(&s, &[0.3, 0.6], &params).unwrap();
        assert_eq!(sel.h, vec![grid.values[0]; 2]);
    }

    #[test]
    fn selection_lies_on_grid() {
        let s = toy();
        let params = ControlParams {
            b: 30,
            hl: 12,
            hsave: true,
            seed: Some(3),
            ..Default::default()
        };
        for sel in [
            probcure_hboot(&s, &[0.2, 0.5, 0.8], &params).unwrap(),
            latency_hboot(&s, &[0.2, 0.5, 0.8], &params).unwrap(),
        ] {
            let grid = sel.grid.clone().unwrap();
            for (p, h) in sel.h.iter().enumerate() {
                let l = grid.iter().position(|g| g == h).unwrap();
                let c = &sel.criterion.as_ref().unwrap()[p];
                assert!(c
                    .iter()
                    .filter(|v| v.is_finite())
                    .all(|v| *v >= 0.0 && *v >= c[l]));
            }
        }
    }

    #[test]
    fn hsmooth_is_reported() {
        let s = toy();
        let params = ControlParams {
            b: 10,
            hl: 5,
            hsmooth: 3,
            seed: Some(3),
            ..Default::default()
        };
        let sel = probcure_hboot(&s, &[0.2, 0.4, 0.6, 0.8], &params).unwrap();
        assert_eq!(
            sel.hsmooth.as_deref().unwrap(),
            smooth_bandwidths(&sel.h, 3).as_slice()
        );
        assert_eq!(sel.bandwidths(), sel.hsmooth.as_deref().unwrap());
    }
}
