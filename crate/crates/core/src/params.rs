use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};

/// Alternative pilot-bandwidth procedure: `(covariate, x0_grid, nnfrac) -> g`.
pub type PilotFn = dyn Fn(&[f64], &[f64], f64) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
pub struct PilotHook(pub Arc<PilotFn>);

impl fmt::Debug for PilotHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PilotHook(..)")
    }
}

/// Bootstrap, grid and pilot configuration shared by the selectors, the
/// confidence intervals and the covariate test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlParams {
    /// Number of bootstrap resamples.
    #[serde(rename = "B")]
    pub b: usize,
    /// Grid bounds as multiples of the standardized IQR of the covariate.
    pub hbound: (f64, f64),
    /// Grid length.
    pub hl: usize,
    /// Keep the grid and criterion values in the selector output.
    pub hsave: bool,
    /// Fraction of n giving the nearest-neighbour order of the pilot.
    pub nnfrac: f64,
    #[serde(skip)]
    pub fpilot: Option<PilotHook>,
    /// Quantile of the observed times bounding the latency MISE integral.
    pub qt: f64,
    /// Moving-average window applied to selected local bandwidths.
    pub hsmooth: usize,
    pub seed: Option<u64>,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            b: 999,
            hbound: (0.1, 3.0),
            hl: 100,
            hsave: false,
            nnfrac: 0.25,
            fpilot: None,
            qt: 0.75,
            hsmooth: 1,
            seed: None,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CureError::InvalidArgument(m));
        if self.b < 1 {
            return bad("B must be at least 1".into());
        }
        let (lo, hi) = self.hbound;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("hbound must satisfy 0 < lo < hi, got ({lo}, {hi})"));
        }
        if self.hl < 1 {
            return bad("hl must be at least 1".into());
        }
        if !(self.nnfrac > 0.0 && self.nnfrac <= 1.0) {
            return bad(format!("nnfrac must lie in (0, 1], got {}", self.nnfrac));
        }
        if !(self.qt > 0.0 && self.qt < 1.0) {
            return bad(format!("qt must lie in (0, 1), got {}", self.qt));
        }
        if self.hsmooth < 1 {
            return bad("hsmooth must be at least 1".into());
        }
        Ok(())
    }

    /// The seed actually used: the configured one, or a fixed default.
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = ControlParams::default();
        p.validate().unwrap();
        assert_eq!(p.b, 999);
        assert_eq!(p.hbound, (0.1, 3.0));
        assert_eq!(p.hl, 100);
        assert_eq!(p.nnfrac, 0.25);
        assert_eq!(p.qt, 0.75);
        assert_eq!(p.hsmooth, 1);
    }

    #[test]
    fn rejects_invalid() {
        let cases = [
            ControlParams {
                b: 0,
                ..Default::default()
            },
            ControlParams {
                hbound: (3.0, 0.1),
                ..Default::default()
            },
            ControlParams {
                hl: 0,
                ..Default::default()
            },
            ControlParams {
                nnfrac: 0.0,
                ..Default::default()
            },
            ControlParams {
                qt: 1.0,
                ..Default::default()
            },
            ControlParams {
                hsmooth: 0,
                ..Default::default()
            },
        ];
        for p in cases {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn json_uses_capital_b() {
        let s = serde_json::to_string(&ControlParams::default()).unwrap();
        assert!(s.contains("\"B\":999"));
        let back: ControlParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back.b, 999);
    }
}
