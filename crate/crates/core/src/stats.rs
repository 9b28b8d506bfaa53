use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CureError, Result};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

/// Standard deviation with divisor n - 1; 0 for fewer than two values.
pub fn sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Standardized interquartile range, IQR / 1.349. Falls back to the standard
/// deviation for a zero IQR.
pub fn standardized_iqr(x: &[f64]) -> Result<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let scale = if iqr > 0.0 { iqr / 1.349 } else { sd(x) };
    if scale > 0.0 {
        Ok(scale)
    } else {
        Err(CureError::DegenerateCovariate(
            "covariate has zero spread; cannot scale the bandwidth grid".into(),
        ))
    }
}

/// Two-sided normal critical value z_{1 - alpha/2} for `conflevel = 1 - alpha`.
pub fn normal_critical(conflevel: f64) -> Result<f64> {
    if !(conflevel > 0.0 && conflevel < 1.0) {
        return Err(CureError::InvalidArgument(format!(
            "conflevel must lie in (0, 1), got {conflevel}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    Ok(normal.inverse_cdf(0.5 + conflevel / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-15);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn siqr_and_fallback() {
        let v: Vec<f64> = (1..=5).map(f64::from).collect();
        assert!((standardized_iqr(&v).unwrap() - 2.0 / 1.349).abs() < 1e-15);
        // IQR zero but nonzero spread
        let w = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
        assert!((standardized_iqr(&w).unwrap() - sd(&w)).abs() < 1e-15);
        assert!(standardized_iqr(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn z_975() {
        let z = normal_critical(0.95).unwrap();
        assert!((z - 1.959964).abs() < 1e-6);
        assert!(normal_critical(0.0).is_err());
        assert!(normal_critical(1.0).is_err());
    }
}
