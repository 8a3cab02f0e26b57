use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Right-censored observations `(T_i, δ_i, x_i)`.
///
/// `times` may be negative (log-scale survival times are the usual input).
/// `events[i]` is true when observation `i` is uncensored.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: DMatrix<f64>,
}

impl SurvivalDataset {
    pub fn new(times: Vec<f64>, events: Vec<bool>, covariates: DMatrix<f64>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if n < 2 {
            return Err(Error::TooFewObservations(n));
        }
        if events.len() != n {
            return Err(Error::LengthMismatch {
                what: "events",
                got: events.len(),
                expected: n,
            });
        }
        if covariates.nrows() != n {
            return Err(Error::LengthMismatch {
                what: "covariate rows",
                got: covariates.nrows(),
                expected: n,
            });
        }
        if let Some(row) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { what: "times", row });
        }
        for (row, r) in covariates.row_iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "covariates",
                    row,
                });
            }
        }
        Ok(Self {
            times,
            events,
            covariates,
        })
    }

    /// Builds a dataset from numeric event codes, rejecting anything but 0 and 1.
    pub fn from_event_codes(
        times: Vec<f64>,
        codes: &[f64],
        covariates: DMatrix<f64>,
    ) -> Result<Self> {
        let events = codes
            .iter()
            .enumerate()
            .map(|(row, &value)| {
                if value == 1.0 {
                    Ok(true)
                } else if value == 0.0 {
                    Ok(false)
                } else {
                    Err(Error::InvalidEvent { row, value })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, events, covariates)
    }

    /// Dataset without covariates, for when only the censoring law matters.
    pub fn times_only(times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let n = times.len();
        Self::new(times, events, DMatrix::zeros(n, 0))
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn censoring_fraction(&self) -> f64 {
        self.events.iter().filter(|e| !**e).count() as f64 / self.n() as f64
    }

    /// Restriction to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let times = rows.iter().map(|&i| self.times[i]).collect();
        let events = rows.iter().map(|&i| self.events[i]).collect();
        let covariates = self.covariates.select_rows(rows);
        Self::new(times, events, covariates)
    }
}
