//! Product-limit estimation of the censoring distribution.
//!
//! The censoring survivor `1 - H` is estimated by the Kaplan–Meier estimator
//! with the roles of events and censorings swapped. At a tied time,
//! uncensored observations leave the risk set before censored ones, so the
//! risk set for a censoring at `t` is `#{T_i > t} + #{censored at t}`.

use crate::data::SurvivalDataset;
use crate::error::Result;

/// Right-continuous, non-increasing step function with value 1 to the left
/// of the first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSurvivor {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepSurvivor {
    /// The survivor that is identically one.
    pub fn constant_one() -> Self {
        Self {
            breakpoints: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_value(&self) -> f64 {
        1.0
    }

    /// Value at `s` under the right-continuous convention.
    pub fn value(&self, s: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= s);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `s`: the value on the interval immediately left of `s`.
    pub fn left_limit(&self, s: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < s);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Kaplan–Meier survivor of the censoring time, built from `(T_i, 1 - δ_i)`.
pub fn fit_censoring_survivor(data: &SurvivalDataset) -> Result<StepSurvivor> {
    let n = data.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.times()[a].total_cmp(&data.times()[b]));

    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut at_risk = n;
    let mut i = 0;
    while i < n {
        let t = data.times()[order[i]];
        let mut failures = 0usize;
        let mut censored = 0usize;
        let mut j = i;
        while j < n && data.times()[order[j]] == t {
            if data.events()[order[j]] {
                failures += 1;
            } else {
                censored += 1;
            }
            j += 1;
        }
        if censored > 0 {
            // failures at t have already left the risk set
            let risk = at_risk - failures;
            surv *= 1.0 - censored as f64 / risk as f64;
            breakpoints.push(t);
            values.push(surv);
        }
        at_risk -= failures + censored;
        i = j;
    }
    Ok(StepSurvivor {
        breakpoints,
        values,
    })
}

/// Left-limit evaluation `1 - Ĥ(s⁻)`.
pub fn survivor_left(step: &StepSurvivor, s: f64) -> f64 {
    step.left_limit(s)
}
