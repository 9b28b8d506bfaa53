use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};
use crate::params::ControlParams;

/// Local pilot bandwidths aligned with an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotBandwidth {
    pub g: Vec<f64>,
    /// Nearest-neighbour order.
    pub k: usize,
}

/// Nearest-neighbour pilot bandwidth
/// `g(x) = (d_k^+(x) + d_k^-(x)) / 2 * (100 / n)^(1/9)`,
/// with `d_k^±` the distance to the k-th covariate value strictly to the
/// right/left of `x` and `k = max(1, round(n * nnfrac))`. A side with fewer
/// than k values borrows the other side's distance.
pub fn hpilot(covariate: &[f64], x0: &[f64], nnfrac: f64) -> Result<PilotBandwidth> {
    let n = covariate.len();
    if n == 0 {
        return Err(CureError::InvalidArgument("empty covariate".into()));
    }
    if !(nnfrac > 0.0 && nnfrac <= 1.0) {
        return Err(CureError::InvalidArgument(format!(
            "nnfrac must lie in (0, 1], got {nnfrac}"
        )));
    }
    let k = ((n as f64 * nnfrac).round() as usize).max(1);
    let mut v = covariate.to_vec();
    v.sort_by(f64::total_cmp);
    let factor = (100.0 / n as f64).powf(1.0 / 9.0);

    let g = x0
        .iter()
        .map(|&x| {
            let right_start = v.partition_point(|&c| c <= x);
            let left_end = v.partition_point(|&c| c < x);
            let right = (right_start + k <= n).then(|| v[right_start + k - 1] - x);
            let left = (left_end >= k).then(|| x - v[left_end - k]);
            let (dr, dl) = match (right, left) {
                (Some(r), Some(l)) => (r, l),
                (Some(r), None) => (r, r),
                (None, Some(l)) => (l, l),
                (None, None) => {
                    let far = (v[n - 1] - x).max(x - v[0]);
                    (far, far)
                }
            };
            let g = 0.5 * (dr + dl) * factor;
            if g > 0.0 {
                Ok(g)
            } else {
                Err(CureError::DegenerateCovariate(
                    "all covariate values are equal; pilot bandwidth undefined".into(),
                ))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PilotBandwidth { g, k })
}

/// Pilot bandwidths at `x0`, honoring a user-supplied pilot procedure.
pub(crate) fn pilot(covariate: &[f64], x0: &[f64], params: &ControlParams) -> Result<Vec<f64>> {
    let g = match &params.fpilot {
        Some(hook) => (hook.0)(covariate, x0, params.nnfrac)?,
        None => hpilot(covariate, x0, params.nnfrac)?.g,
    };
    if g.len() != x0.len() || g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(CureError::InvalidArgument(
            "pilot procedure must return one positive bandwidth per point".into(),
        ));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_spacing_cancels() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = hpilot(&x, &[50.0], 0.25).unwrap();
        assert_eq!(p.k, 25);
        assert_eq!(p.g, vec![25.0]);
    }

    #[test]
    fn symmetric_collapse() {
        let x = [-2.0, -1.0, 1.0, 2.0];
        let p = hpilot(&x, &[0.0], 0.5).unwrap();
        // k = 2, d = 2 on both sides
        let expect = 2.0 * (100.0f64 / 4.0).powf(1.0 / 9.0);
        assert!((p.g[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn one_sided_at_minimum() {
        let x = [0.0, 1.0, 3.0, 6.0];
        let p = hpilot(&x, &[0.0], 0.5).unwrap();
        // k = 2, right neighbour distances 1, 3 -> d+ = 3, no left side
        let expect = 3.0 * (25.0f64).powf(1.0 / 9.0);
        assert!((p.g[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        let err = hpilot(&[1.0, 1.0, 1.0], &[1.0], 0.5).unwrap_err();
        assert!(matches!(err, CureError::DegenerateCovariate(_)));
    }

    #[test]
    fn equivariance() {
        let x = [0.3, 1.7, 2.2, 2.9, 4.1, 5.5, 6.0, 8.4];
        let x0 = [0.3, 2.5, 7.0];
        let base = hpilot(&x, &x0, 0.25).unwrap().g;
        let shift = |v: &[f64]| v.iter().map(|a| a + 10.0).collect::<Vec<_>>();
        let shifted = hpilot(&shift(&x), &shift(&x0), 0.25).unwrap().g;
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
