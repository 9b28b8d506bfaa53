//! Conditional cure probability and latency estimation, with
//! bootstrap-normal confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beran::{
    berancv, product_limit, product_limit_at, product_limit_curve, BandwidthSpec, SelectedBandwidth,
};
use crate::error::{CureError, PointError, Result};
use crate::hboot::{kernel_column, latency_hboot, probcure_hboot, resample_cure, resample_latency};
use crate::kernel::fill_weights;
use crate::params::ControlParams;
use crate::resample::{resampler_for, Resample};
use crate::sample::SurvivalSample;
use crate::stats::{normal_critical, sd};

/// Estimated cure probabilities `1 - p(x0)` on a covariate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureEstimate {
    pub x0: Vec<f64>,
    pub h: Vec<f64>,
    pub local: bool,
    pub cure: Vec<Option<f64>>,
    /// Largest uncensored time, where the curves are evaluated.
    pub tmax1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflevel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<Option<f64>>>,
    pub errors: Vec<Option<PointError>>,
    /// Set when the sample has no uncensored observation; cure is then 1.
    pub no_events: bool,
    /// Bandwidth selection output when `h` was not supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectedBandwidth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Conditional survival S(t | x0).
    Survival,
    /// Survival of the uncured, S0(t | x0).
    Latency,
}

/// Curves in t on a covariate grid; `values[p][k]` is the estimate at
/// `x0[p]` and `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub kind: CurveKind,
    pub x0: Vec<f64>,
    pub h: Vec<f64>,
    pub local: bool,
    pub times: Vec<f64>,
    pub values: Vec<Option<Vec<f64>>>,
    /// Latency before clamping into [0, 1].
    #[serde(skip)]
    pub unclamped: Vec<Option<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflevel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<Option<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<Option<Vec<f64>>>>,
    pub errors: Vec<Option<PointError>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectedBandwidth>,
}

pub type LatencyEstimate = CurveEstimate;

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn check_grid(x0: &[f64]) -> Result<()> {
    if x0.is_empty() {
        return Err(CureError::InvalidArgument("empty evaluation grid".into()));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(CureError::InvalidArgument(
            "evaluation points must be finite".into(),
        ));
    }
    Ok(())
}

fn check_conflevel(conflevel: Option<f64>) -> Result<Option<f64>> {
    conflevel.map(normal_critical).transpose()
}

/// Bandwidths, locality flag, per-point errors and the selection behind them.
type Resolved = (
    Vec<f64>,
    bool,
    Vec<Option<PointError>>,
    Option<SelectedBandwidth>,
);

/// Bandwidths from the caller, or from a selector when absent. Points the
/// selector could not handle come back as errors.
fn bandwidths<S>(x0: &[f64], h: Option<&BandwidthSpec>, select: S) -> Result<Resolved>
where
    S: FnOnce() -> Result<SelectedBandwidth>,
{
    match h {
        Some(spec) => Ok((
            spec.resolve(x0.len())?,
            spec.is_local(),
            vec![None; x0.len()],
            None,
        )),
        None => {
            let sel = select()?;
            let hs = sel.bandwidths().to_vec();
            let errors = sel.errors.clone();
            Ok((hs, true, errors, Some(sel)))
        }
    }
}

fn draw_resamples(sample: &SurvivalSample, params: &ControlParams) -> Result<Vec<Resample>> {
    Ok(resampler_for(sample, params)?.draw_many(params.seed_or_default(), params.b))
}

/// Conditional cure probability on `x0`.
///
/// The estimate is the Beran curve at the largest uncensored time. With
/// `h = None` local bootstrap bandwidths are selected first (smoothed ones
/// when `params.hsmooth > 1`). With a confidence level, bands are
/// `cure ∓ z · se` where `se` is the standard deviation of the estimate
/// over `params.b` weighted-bootstrap resamples, clamped to [0, 1].
pub fn probcure(
    sample: &SurvivalSample,
    x0: &[f64],
    h: Option<&BandwidthSpec>,
    conflevel: Option<f64>,
    params: &ControlParams,
) -> Result<CureEstimate> {
    check_grid(x0)?;
    params.validate()?;
    let xs = sample.x()?;
    let z = check_conflevel(conflevel)?;
    let (hs, local, mut errors, selection) =
        bandwidths(x0, h, || probcure_hboot(sample, x0, params))?;
    let tmax1 = sample.tmax1();
    let n = sample.len();

    let mut rem = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n);
    let mut cure = Vec::with_capacity(x0.len());
    for p in 0..x0.len() {
        if errors[p].is_some() {
            cure.push(None);
            continue;
        }
        if !fill_weights(xs, x0[p], hs[p], &mut w) {
            errors[p] = Some(PointError::AllWeightsZero);
            cure.push(None);
            continue;
        }
        cure.push(Some(match tmax1 {
            Some(t) => product_limit_at(sample.time(), sample.event(), &w, t, &mut rem),
            None => 1.0,
        }));
    }

    let mut est = CureEstimate {
        x0: x0.to_vec(),
        h: hs,
        local,
        cure,
        tmax1,
        conflevel,
        se: None,
        lower: None,
        upper: None,
        errors,
        no_events: tmax1.is_none(),
        selection,
    };

    if let Some(z) = z {
        let resamples = draw_resamples(sample, params)?;
        let se: Vec<Option<f64>> = (0..x0.len())
            .into_par_iter()
            .map(|p| {
                est.cure[p]?;
                let mut kernel = Vec::with_capacity(n);
                let mut w = Vec::with_capacity(n);
                let mut rem = Vec::with_capacity(n + 1);
                kernel_column(xs, x0[p], est.h[p], &mut kernel);
                let reps: Vec<f64> = resamples
                    .iter()
                    .map(|r| resample_cure(r, &kernel, &mut w, &mut rem))
                    .collect();
                Some(sd(&reps))
            })
            .collect();
        let band = |sign: f64| -> Vec<Option<f64>> {
            est.cure
                .iter()
                .zip(&se)
                .map(|(c, s)| Some(clamp01(c.as_ref()? + sign * z * s.as_ref()?)))
                .collect()
        };
        est.lower = Some(band(-1.0));
        est.upper = Some(band(1.0));
        est.se = Some(se);
    }
    Ok(est)
}

/// Default evaluation times: the distinct observed times, ascending.
pub fn default_times(sample: &SurvivalSample) -> Vec<f64> {
    let mut t = sample.time().to_vec();
    t.dedup();
    t
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(CureError::InvalidArgument("no evaluation times".into()));
    }
    if times.windows(2).any(|p| !(p[0] <= p[1])) || times.iter().any(|t| t.is_nan()) {
        return Err(CureError::InvalidArgument(
            "evaluation times must be sorted ascending".into(),
        ));
    }
    Ok(())
}

/// Pointwise standard deviation across replicate curves.
fn curve_se(reps: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut col = Vec::with_capacity(reps.len());
    (0..len)
        .map(|k| {
            col.clear();
            col.extend(reps.iter().map(|r| r[k]));
            sd(&col)
        })
        .collect()
}

fn bands(
    values: &[Option<Vec<f64>>],
    se: &[Option<Vec<f64>>],
    z: f64,
    sign: f64,
) -> Vec<Option<Vec<f64>>> {
    values
        .iter()
        .zip(se)
        .map(|(v, s)| {
            let (v, s) = (v.as_ref()?, s.as_ref()?);
            Some(
                v.iter()
                    .zip(s)
                    .map(|(a, b)| clamp01(a + sign * z * b))
                    .collect(),
            )
        })
        .collect()
}

/// Latency `S0(t | x0) = (S(t | x0) - (1 - p(x0))) / p(x0)` on `x0`, with the
/// same bandwidth in numerator and denominator. Values are clamped into
/// [0, 1]; unclamped values are kept in [`CurveEstimate::unclamped`].
pub fn latency(
    sample: &SurvivalSample,
    x0: &[f64],
    h: Option<&BandwidthSpec>,
    eval_times: Option<&[f64]>,
    conflevel: Option<f64>,
    params: &ControlParams,
) -> Result<CurveEstimate> {
    check_grid(x0)?;
    params.validate()?;
    let xs = sample.x()?;
    let z = check_conflevel(conflevel)?;
    let times = eval_times
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| default_times(sample));
    check_times(&times)?;
    let (hs, local, mut errors, selection) =
        bandwidths(x0, h, || latency_hboot(sample, x0, params))?;
    let n = sample.len();

    let mut rem = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n);
    let mut unclamped = Vec::with_capacity(x0.len());
    for p in 0..x0.len() {
        if errors[p].is_some() {
            unclamped.push(None);
            continue;
        }
        if !fill_weights(xs, x0[p], hs[p], &mut w) {
            errors[p] = Some(PointError::AllWeightsZero);
            unclamped.push(None);
            continue;
        }
        let s = product_limit(sample.time(), sample.event(), &w, &times, &mut rem);
        let cure = match sample.tmax1() {
            Some(t) => product_limit_at(sample.time(), sample.event(), &w, t, &mut rem),
            None => 1.0,
        };
        let prob = 1.0 - cure;
        if !(prob > 0.0) {
            errors[p] = Some(PointError::CureFractionOne);
            unclamped.push(None);
            continue;
        }
        unclamped.push(Some(
            s.iter().map(|v| (v - cure) / prob).collect::<Vec<_>>(),
        ));
    }
    let values: Vec<Option<Vec<f64>>> = unclamped
        .iter()
        .map(|v| v.as_ref().map(|v| v.iter().map(|&a| clamp01(a)).collect()))
        .collect();

    let mut est = CurveEstimate {
        kind: CurveKind::Latency,
        x0: x0.to_vec(),
        h: hs,
        local,
        times,
        values,
        unclamped,
        conflevel,
        lower: None,
        upper: None,
        errors,
        selection,
    };

    if let Some(z) = z {
        let resamples = draw_resamples(sample, params)?;
        let se: Vec<Option<Vec<f64>>> = (0..x0.len())
            .into_par_iter()
            .map(|p| {
                est.values[p].as_ref()?;
                let mut kernel = Vec::with_capacity(n);
                let mut w = Vec::with_capacity(n);
                let mut rem = Vec::with_capacity(n + 1);
                kernel_column(xs, x0[p], est.h[p], &mut kernel);
                let reps: Vec<Vec<f64>> = resamples
                    .iter()
                    .filter_map(|r| resample_latency(r, &kernel, &mut w, &mut rem))
                    .map(|c| est.times.iter().map(|&t| c.eval(t)).collect())
                    .collect();
                Some(curve_se(&reps, est.times.len()))
            })
            .collect();
        est.lower = Some(bands(&est.values, &se, z, -1.0));
        est.upper = Some(bands(&est.values, &se, z, 1.0));
    }
    Ok(est)
}

/// Beran estimate of S(t | x0) on a covariate grid. With `h = None` the
/// local cross-validation bandwidth is used. Optional bootstrap-normal bands
/// as for [`probcure`].
pub fn conditional_survival(
    sample: &SurvivalSample,
    x0: &[f64],
    h: Option<&BandwidthSpec>,
    eval_times: Option<&[f64]>,
    conflevel: Option<f64>,
    params: &ControlParams,
) -> Result<CurveEstimate> {
    check_grid(x0)?;
    params.validate()?;
    let xs = sample.x()?;
    let z = check_conflevel(conflevel)?;
    let times = eval_times
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| default_times(sample));
    check_times(&times)?;
    let (hs, local, mut errors, selection) = bandwidths(x0, h, || berancv(sample, x0, params))?;
    let n = sample.len();

    let mut rem = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(x0.len());
    for p in 0..x0.len() {
        if !fill_weights(xs, x0[p], hs[p], &mut w) {
            errors[p] = Some(PointError::AllWeightsZero);
            values.push(None);
            continue;
        }
        values.push(Some(product_limit(
            sample.time(),
            sample.event(),
            &w,
            &times,
            &mut rem,
        )));
    }

    let mut est = CurveEstimate {
        kind: CurveKind::Survival,
        x0: x0.to_vec(),
        h: hs,
        local,
        times,
        unclamped: values.clone(),
        values,
        conflevel,
        lower: None,
        upper: None,
        errors,
        selection,
    };

    if let Some(z) = z {
        let resamples = draw_resamples(sample, params)?;
        let se: Vec<Option<Vec<f64>>> = (0..x0.len())
            .into_par_iter()
            .map(|p| {
                est.values[p].as_ref()?;
                let mut kernel = Vec::with_capacity(n);
                let mut w = Vec::with_capacity(n);
                let mut rem = Vec::with_capacity(n + 1);
                kernel_column(xs, x0[p], est.h[p], &mut kernel);
                let reps: Vec<Vec<f64>> = resamples
                    .iter()
                    .map(|r| {
                        r.gather(&kernel, &mut w);
                        let total: f64 = w.iter().sum();
                        w.iter_mut().for_each(|v| *v /= total);
                        let c = product_limit_curve(&r.time, &r.event, &w, &mut rem);
                        est.times.iter().map(|&t| c.eval(t)).collect()
                    })
                    .collect();
                Some(curve_se(&reps, est.times.len()))
            })
            .collect();
        est.lower = Some(bands(&est.values, &se, z, -1.0));
        est.upper = Some(bands(&est.values, &se, z, 1.0));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_sample() -> SurvivalSample {
        SurvivalSample::from_columns(
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1, 1, 0, 0],
        )
        .unwrap()
    }

    #[test]
    fn hand_cure_and_latency() {
        let s = hand_sample();
        let h = BandwidthSpec::Global(1.0);
        let params = ControlParams::default();
        let c = probcure(&s, &[0.0], Some(&h), None, &params).unwrap();
        // (1 - 1/4)(1 - 1/3)
        assert!((c.cure[0].unwrap() - 0.5).abs() < 1e-15);

        let l = latency(&s, &[0.0], Some(&h), Some(&[0.0, 1.0, 2.0]), None, &params).unwrap();
        let v = l.values[0].as_ref().unwrap();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 0.5).abs() < 1e-15);
        assert!(v[2].abs() < 1e-15);
    }

    #[test]
    fn all_uncensored_gives_zero_cure() {
        let s = SurvivalSample::from_columns(
            vec![0.1, 0.4, 0.7, 0.9],
            vec![1.0, 3.0, 2.0, 4.0],
            vec![1, 1, 1, 1],
        )
        .unwrap();
        let c = probcure(
            &s,
            &[0.3, 0.6],
            Some(&BandwidthSpec::Global(2.0)),
            None,
            &ControlParams::default(),
        )
        .unwrap();
        assert_eq!(c.cure, vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn no_events_flags_cure_one() {
        let s = SurvivalSample::from_columns(vec![0.1, 0.4], vec![1.0, 3.0], vec![0, 0]).unwrap();
        let c = probcure(
            &s,
            &[0.2],
            Some(&BandwidthSpec::Global(1.0)),
            None,
            &ControlParams::default(),
        )
        .unwrap();
        assert!(c.no_events);
        assert_eq!(c.cure, vec![Some(1.0)]);
        let l = latency(
            &s,
            &[0.2],
            Some(&BandwidthSpec::Global(1.0)),
            None,
            None,
            &ControlParams::default(),
        )
        .unwrap();
        assert_eq!(l.errors[0], Some(PointError::CureFractionOne));
    }

    #[test]
    fn out_of_reach_point_does_not_abort_grid() {
        let s = hand_sample()
            .with_covariate(crate::sample::Covariate::Continuous(vec![
                0.0, 0.1, 0.2, 0.3,
            ]))
            .unwrap();
        let c = probcure(
            &s,
            &[0.1, 50.0, 0.2],
            Some(&BandwidthSpec::Global(1.0)),
            None,
            &ControlParams::default(),
        )
        .unwrap();
        assert!(c.cure[0].is_some() && c.cure[2].is_some());
        assert_eq!(c.cure[1], None);
        assert_eq!(c.errors[1], Some(PointError::AllWeightsZero));
    }

    #[test]
    fn local_bandwidth_length_checked() {
        let s = hand_sample();
        let h = BandwidthSpec::Local(vec![1.0]);
        assert!(probcure(&s, &[0.0, 0.1], Some(&h), None, &ControlParams::default()).is_err());
    }

    #[test]
    fn categorical_rejected() {
        let s = hand_sample()
            .with_covariate(crate::sample::Covariate::categorical(&["a", "b", "a", "b"]))
            .unwrap();
        let err = probcure(
            &s,
            &[0.0],
            Some(&BandwidthSpec::Global(1.0)),
            None,
            &ControlParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CureError::CategoricalCovariate));
    }

    fn ci_sample() -> SurvivalSample {
        let n = 30;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let t: Vec<f64> = (0..n).map(|i| ((i * 11) % n) as f64 + 1.0).collect();
        let d: Vec<u8> = (0..n).map(|i| (i % 3 != 1) as u8).collect();
        SurvivalSample::from_columns(x, t, d).unwrap()
    }

    #[test]
    fn bands_contain_estimate() {
        let s = ci_sample();
        let params = ControlParams {
            b: 50,
            seed: Some(4),
            ..Default::default()
        };
        let h = BandwidthSpec::Global(0.5);
        let c = probcure(&s, &[0.3, 0.5], Some(&h), Some(0.9), &params).unwrap();
        for p in 0..2 {
            let (lo, hi, v) = (
                c.lower.as_ref().unwrap()[p].unwrap(),
                c.upper.as_ref().unwrap()[p].unwrap(),
                c.cure[p].unwrap(),
            );
            assert!(lo <= v && v <= hi && lo >= 0.0 && hi <= 1.0);
        }
        let l = latency(&s, &[0.5], Some(&h), None, Some(0.9), &params).unwrap();
        let (v, lo, hi) = (
            l.values[0].as_ref().unwrap(),
            l.lower.as_ref().unwrap()[0].as_ref().unwrap(),
            l.upper.as_ref().unwrap()[0].as_ref().unwrap(),
        );
        for k in 0..v.len() {
            assert!(lo[k] <= v[k] && v[k] <= hi[k]);
        }
    }

    #[test]
    fn narrow_conflevel_shrinks_band() {
        let s = ci_sample();
        let params = ControlParams {
            b: 50,
            seed: Some(4),
            ..Default::default()
        };
        let h = BandwidthSpec::Global(0.5);
        let wide = probcure(&s, &[0.5], Some(&h), Some(0.95), &params).unwrap();
        let narrow = probcure(&s, &[0.5], Some(&h), Some(1e-9), &params).unwrap();
        let width = |c: &CureEstimate| {
            c.upper.as_ref().unwrap()[0].unwrap() - c.lower.as_ref().unwrap()[0].unwrap()
        };
        assert!(width(&narrow) < 1e-8);
        assert!(width(&narrow) <= width(&wide));
    }
}
