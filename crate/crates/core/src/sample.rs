//! Survival data container.
//!
//! Observations are stored sorted by observed time, ascending, with
//! uncensored observations placed before censored ones at tied times. The
//! permutation back to input order is kept in [`SurvivalSample::order`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CureError, Result};

/// A single covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Covariate {
    Continuous(Vec<f64>),
    Categorical {
        /// Distinct labels in their natural order.
        levels: Vec<String>,
        /// Index into `levels` per subject.
        codes: Vec<usize>,
    },
}

impl Covariate {
    /// Build a categorical covariate from raw labels. Levels are ordered
    /// numerically when every label parses as a number, lexicographically
    /// otherwise.
    pub fn categorical<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut levels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let numeric = levels.iter().all(|s| s.trim().parse::<f64>().is_ok());
        if numeric {
            levels.sort_by(|a, b| {
                let (a, b) = (
                    a.trim().parse::<f64>().unwrap(),
                    b.trim().parse::<f64>().unwrap(),
                );
                a.total_cmp(&b)
            });
        } else {
            levels.sort();
        }
        levels.dedup();
        let codes = labels
            .iter()
            .map(|s| levels.iter().position(|l| l == s.as_ref()).unwrap())
            .collect();
        Covariate::Categorical { levels, codes }
    }

    pub fn len(&self) -> usize {
        match self {
            Covariate::Continuous(v) => v.len(),
            Covariate::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Covariate::Continuous(_))
    }

    fn permuted(&self, order: &[usize]) -> Self {
        match self {
            Covariate::Continuous(v) => {
                Covariate::Continuous(order.iter().map(|&i| v[i]).collect())
            }
            Covariate::Categorical { levels, codes } => Covariate::Categorical {
                levels: levels.clone(),
                codes: order.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

/// Right-censored survival data with a single covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSample {
    x: Covariate,
    time: Vec<f64>,
    event: Vec<bool>,
    order: Vec<usize>,
}

impl SurvivalSample {
    pub fn new(x: Covariate, time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        let n = time.len();
        if n == 0 {
            return Err(CureError::InvalidSample("sample is empty".into()));
        }
        if x.len() != n || event.len() != n {
            return Err(CureError::InvalidSample(format!(
                "column lengths differ: x = {}, t = {}, d = {}",
                x.len(),
                n,
                event.len()
            )));
        }
        if let Some(i) = time.iter().position(|t| !t.is_finite() || *t < 0.0) {
            return Err(CureError::InvalidSample(format!(
                "observed time {} at index {} is negative or not finite",
                time[i], i
            )));
        }
        if let Covariate::Continuous(v) = &x {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(CureError::InvalidSample(format!(
                    "covariate at index {i} is not finite"
                )));
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal (t, d) keep input order
        order.sort_by(|&a, &b| match time[a].total_cmp(&time[b]) {
            Ordering::Equal => event[b].cmp(&event[a]),
            o => o,
        });
        let x = x.permuted(&order);
        let time = order.iter().map(|&i| time[i]).collect();
        let event = order.iter().map(|&i| event[i]).collect();
        Ok(Self {
            x,
            time,
            event,
            order,
        })
    }

    /// Continuous-covariate sample from numeric columns; `d` must be 0 or 1.
    pub fn from_columns(x: Vec<f64>, t: Vec<f64>, d: Vec<u8>) -> Result<Self> {
        let event = indicator(&d)?;
        Self::new(Covariate::Continuous(x), t, event)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Covariate in time-sorted order.
    pub fn covariate(&self) -> &Covariate {
        &self.x
    }

    /// Continuous covariate values in time-sorted order.
    pub fn x(&self) -> Result<&[f64]> {
        match &self.x {
            Covariate::Continuous(v) => Ok(v),
            Covariate::Categorical { .. } => Err(CureError::CategoricalCovariate),
        }
    }

    /// Observed times, ascending.
    pub fn time(&self) -> &[f64] {
        &self.time
    }

    /// Uncensoring indicators aligned with [`Self::time`].
    pub fn event(&self) -> &[bool] {
        &self.event
    }

    /// `order()[k]` is the input index of the k-th sorted observation.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    /// Largest uncensored time.
    pub fn tmax1(&self) -> Option<f64> {
        self.time
            .iter()
            .zip(&self.event)
            .rev()
            .find(|(_, &e)| e)
            .map(|(&t, _)| t)
    }

    pub fn max_time(&self) -> f64 {
        *self.time.last().unwrap()
    }

    /// Same observations with the covariate replaced.
    pub fn with_covariate(&self, x: Covariate) -> Result<Self> {
        let mut t = vec![0.0; self.len()];
        let mut d = vec![false; self.len()];
        for (k, &i) in self.order.iter().enumerate() {
            t[i] = self.time[k];
            d[i] = self.event[k];
        }
        Self::new(x, t, d)
    }

    /// Split a categorical sample into one sub-sample per level.
    pub fn strata(&self) -> Result<Vec<(String, SurvivalSample)>> {
        let Covariate::Categorical { levels, codes } = &self.x else {
            return Err(CureError::InvalidArgument(
                "stratification requires a categorical covariate".into(),
            ));
        };
        let mut out = Vec::with_capacity(levels.len());
        for (code, label) in levels.iter().enumerate() {
            let idx: Vec<usize> = (0..self.len()).filter(|&k| codes[k] == code).collect();
            if idx.is_empty() {
                continue;
            }
            let sub = SurvivalSample::new(
                Covariate::Categorical {
                    levels: vec![label.clone()],
                    codes: vec![0; idx.len()],
                },
                idx.iter().map(|&k| self.time[k]).collect(),
                idx.iter().map(|&k| self.event[k]).collect(),
            )?;
            out.push((label.clone(), sub));
        }
        Ok(out)
    }
}

pub(crate) fn indicator(d: &[u8]) -> Result<Vec<bool>> {
    d.iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(CureError::InvalidSample(format!(
                "indicator {v} at index {i} is not 0 or 1"
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_events_before_censored_at_ties() {
        let s = SurvivalSample::from_columns(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![5.0, 2.0, 5.0, 1.0],
            vec![0, 1, 1, 0],
        )
        .unwrap();
        assert_eq!(s.time(), &[1.0, 2.0, 5.0, 5.0]);
        assert_eq!(s.event(), &[false, true, true, false]);
        assert_eq!(s.order(), &[3, 1, 2, 0]);
        assert_eq!(s.x().unwrap(), &[4.0, 2.0, 3.0, 1.0]);
        assert_eq!(s.tmax1(), Some(5.0));
    }

    #[test]
    fn sort_is_reproducible() {
        let t = vec![3.0, 1.0, 3.0, 3.0, 2.0, 1.0];
        let d = vec![0, 1, 1, 0, 1, 1];
        let x = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let a = SurvivalSample::from_columns(x.clone(), t.clone(), d.clone()).unwrap();
        let b = SurvivalSample::from_columns(x, t, d).unwrap();
        assert_eq!(a.order(), b.order());
        assert_eq!(a.order(), &[1, 5, 4, 2, 0, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SurvivalSample::from_columns(vec![], vec![], vec![]).is_err());
        assert!(SurvivalSample::from_columns(vec![1.0], vec![-1.0], vec![1]).is_err());
        assert!(SurvivalSample::from_columns(vec![1.0], vec![f64::NAN], vec![1]).is_err());
        assert!(SurvivalSample::from_columns(vec![1.0], vec![1.0], vec![2]).is_err());
        assert!(SurvivalSample::from_columns(vec![1.0, 2.0], vec![1.0], vec![1]).is_err());
        // time zero is admitted
        assert!(SurvivalSample::from_columns(vec![1.0], vec![0.0], vec![1]).is_ok());
    }

    #[test]
    fn no_events_has_no_tmax1() {
        let s = SurvivalSample::from_columns(vec![1.0, 2.0], vec![1.0, 2.0], vec![0, 0]).unwrap();
        assert_eq!(s.tmax1(), None);
    }

    #[test]
    fn categorical_levels_are_ordered_naturally() {
        let c = Covariate::categorical(&["10", "2", "2", "1"]);
        let Covariate::Categorical { levels, codes } = c else {
            unreachable!()
        };
        assert_eq!(levels, vec!["1", "2", "10"]);
        assert_eq!(codes, vec![2, 1, 1, 0]);

        let c = Covariate::categorical(&["b", "a", "c"]);
        let Covariate::Categorical { levels, .. } = c else {
            unreachable!()
        };
        assert_eq!(levels, vec!["a", "b", "c"]);
    }

    #[test]
    fn strata_split_by_level() {
        let s = SurvivalSample::new(
            Covariate::categorical(&["a", "b", "a"]),
            vec![1.0, 2.0, 3.0],
            vec![true, false, true],
        )
        .unwrap();
        let strata = s.strata().unwrap();
        assert_eq!(strata.len(), 2);
        assert_eq!(strata[0].0, "a");
        assert_eq!(strata[0].1.time(), &[1.0, 3.0]);
        assert_eq!(strata[1].1.time(), &[2.0]);
    }
}
