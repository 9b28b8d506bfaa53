use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};
use crate::sample::SurvivalSample;

/// Epanechnikov kernel, supported on [-1, 1].
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Nadaraya-Watson weights at `x0`, aligned with the sample's sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub weights: Vec<f64>,
    pub x0: f64,
    pub h: f64,
}

pub fn nw_weights(sample: &SurvivalSample, x0: f64, h: f64) -> Result<KernelWeights> {
    let xs = sample.x()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(CureError::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let mut weights = Vec::with_capacity(xs.len());
    if !fill_weights(xs, x0, h, &mut weights) {
        return Err(CureError::AllWeightsZero { x0, h });
    }
    Ok(KernelWeights { weights, x0, h })
}

/// Writes normalized weights into `out`. Returns `false` (leaving raw zeros)
/// when every kernel value vanishes.
pub(crate) fn fill_weights(xs: &[f64], x0: f64, h: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    out.extend(xs.iter().map(|&x| epanechnikov((x0 - x) / h)));
    normalize(out)
}

pub(crate) fn normalize(w: &mut [f64]) -> bool {
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.5625);
        assert_eq!(epanechnikov(1.5), 0.0);
    }

    fn sample(x: Vec<f64>) -> SurvivalSample {
        let n = x.len();
        let t = (1..=n).map(|i| i as f64).collect();
        SurvivalSample::from_columns(x, t, vec![1; n]).unwrap()
    }

    #[test]
    fn single_atom() {
        let w = nw_weights(&sample(vec![3.0]), 3.2, 1.0).unwrap();
        assert_eq!(w.weights, vec![1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let w = nw_weights(&sample(vec![0.0, 1.0]), 0.5, 2.0).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn three_point_hand_case() {
        let w = nw_weights(&sample(vec![0.0, 1.0, 2.0]), 0.0, 1.5).unwrap();
        // K(0) = 0.75, K(2/3) = 0.75 * 5/9, K(4/3) = 0
        let k1 = 0.75 * (1.0 - 4.0 / 9.0);
        let total = 0.75 + k1;
        assert!((w.weights[0] - 0.75 / total).abs() < 1e-15);
        assert!((w.weights[1] - k1 / total).abs() < 1e-15);
        assert_eq!(w.weights[2], 0.0);
        assert!((w.weights[0] - 0.6429).abs() < 1e-4);
        assert!((w.weights[1] - 0.3571).abs() < 1e-4);
    }

    #[test]
    fn outside_reach_errors() {
        let err = nw_weights(&sample(vec![0.0, 1.0]), 5.0, 1.0).unwrap_err();
        assert!(matches!(err, CureError::AllWeightsZero { .. }));
        // the support boundary itself carries no weight
        assert!(nw_weights(&sample(vec![0.0]), 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(nw_weights(&sample(vec![0.0]), 0.0, 0.0).is_err());
        assert!(nw_weights(&sample(vec![0.0]), 0.0, -1.0).is_err());
    }
}
