//! Leurgans synthetic response and design standardization.
//!
//! The synthetic response is
//!
//! ```text
//! Y*_i = ∫_{-∞}^{U} ( I(T_i ≥ s) / (1 - Ĥ(s⁻)) - I(s < 0) ) ds,   U = max(T_max, 0)
//! ```
//!
//! The integrand is piecewise constant between consecutive points of
//! `{distinct observed times} ∪ {0}` and vanishes below the smallest of them,
//! so the integral is evaluated as a finite sum with no quadrature error.
//! When `T_max ≥ 0` the upper limit is the largest observed time.

use nalgebra::{DMatrix, DVector};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::StepSurvivor;

const CONSTANT_COLUMN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticResponse {
    values: DVector<f64>,
    center: f64,
}

impl SyntheticResponse {
    pub fn new(values: DVector<f64>) -> Self {
        let center = if values.is_empty() {
            0.0
        } else {
            values.mean()
        };
        Self { values, center }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn centered(&self) -> DVector<f64> {
        self.values.add_scalar(-self.center)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::new(DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&i| self.values[i]),
        ))
    }
}

/// Computes `Y*` for every observation of `data` against the censoring
/// survivor `survivor` (usually fitted on the same data).
pub fn leurgans_transform(
    data: &SurvivalDataset,
    survivor: &StepSurvivor,
) -> Result<SyntheticResponse> {
    let times = data.times();
    if times.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // integrating past a negative maximum through 0 keeps the uncensored
    // identity Y* = T for all-negative samples
    let upper = t_max.max(0.0);

    // survivor breakpoints are already observed times when it was fitted on
    // this data or a subset of it; adding them keeps foreign survivors exact
    let mut grid: Vec<f64> = times.to_vec();
    grid.push(0.0);
    grid.extend_from_slice(survivor.breakpoints());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.retain(|&s| s <= upper);

    struct Piece {
        right: f64,
        length: f64,
        inv_surv: f64,
        negative: bool,
    }
    let mut pieces = Vec::with_capacity(grid.len());
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        // past t_max nobody is at risk and the survivor term never enters
        let inv_surv = if b <= t_max {
            let surv = survivor.value(a);
            if surv <= 0.0 {
                return Err(Error::ZeroSurvivor { at: a });
            }
            1.0 / surv
        } else {
            0.0
        };
        pieces.push(Piece {
            right: b,
            length: b - a,
            inv_surv,
            negative: b <= 0.0,
        });
    }

    let values = times
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for piece in &pieces {
                let at_risk = if t >= piece.right {
                    piece.inv_surv
                } else {
                    0.0
                };
                let value = at_risk - if piece.negative { 1.0 } else { 0.0 };
                if value != 0.0 {
                    acc += piece.length * value;
                }
            }
            acc
        })
        .collect::<Vec<_>>();
    Ok(SyntheticResponse::new(DVector::from_vec(values)))
}

/// Design with mean-zero, unit-Euclidean-norm columns plus the constants
/// needed to undo the scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    matrix: DMatrix<f64>,
    col_means: DVector<f64>,
    col_norms: DVector<f64>,
}

impl StandardizedDesign {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn col_means(&self) -> &DVector<f64> {
        &self.col_means
    }

    pub fn col_norms(&self) -> &DVector<f64> {
        &self.col_norms
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    /// Keeps the given columns; the result is still standardized.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select_columns(cols),
            col_means: DVector::from_iterator(cols.len(), cols.iter().map(|&j| self.col_means[j])),
            col_norms: DVector::from_iterator(cols.len(), cols.iter().map(|&j| self.col_norms[j])),
        }
    }
}

pub fn standardize(x: &DMatrix<f64>) -> Result<StandardizedDesign> {
    let (n, p) = x.shape();
    let mut matrix = x.clone();
    let mut col_means = DVector::zeros(p);
    let mut col_norms = DVector::zeros(p);
    for j in 0..p {
        let mut col = matrix.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if !(norm > CONSTANT_COLUMN_TOL) {
            return Err(Error::ConstantColumn(j));
        }
        col /= norm;
        col_means[j] = mean;
        col_norms[j] = norm;
    }
    Ok(StandardizedDesign {
        matrix,
        col_means,
        col_norms,
    })
}

/// Maps standardized-scale coefficients back to the raw covariate scale.
pub fn destandardize_coefficients(
    beta_std: &DVector<f64>,
    design: &StandardizedDesign,
    response_center: f64,
) -> (DVector<f64>, f64) {
    let beta = beta_std.component_div(&design.col_norms);
    let intercept = response_center - beta.dot(&design.col_means);
    (beta, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::km::{fit_censoring_survivor, survivor_left};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn transform(times: &[f64], events: &[bool]) -> Vec<f64> {
        let data = SurvivalDataset::times_only(times.to_vec(), events.to_vec()).unwrap();
        let surv = fit_censoring_survivor(&data).unwrap();
        leurgans_transform(&data, &surv)
            .unwrap()
            .values()
            .iter()
            .copied()
            .collect()
    }

    /// Riemann sum on a grid refined `refine`-fold, evaluating the integrand
    /// at midpoints through the left-limit survivor.
    fn refined_oracle(times: &[f64], events: &[bool], refine: usize) -> Vec<f64> {
        let data = SurvivalDataset::times_only(times.to_vec(), events.to_vec()).unwrap();
        let surv = fit_censoring_survivor(&data).unwrap();
        let upper = times.iter().copied().fold(0.0, f64::max);
        let mut grid: Vec<f64> = times.iter().copied().chain([0.0]).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid.retain(|&s| s <= upper);
        times
            .iter()
            .map(|&t| {
                let mut acc = 0.0;
                for w in grid.windows(2) {
                    let h = (w[1] - w[0]) / refine as f64;
                    for k in 0..refine {
                        let s = w[0] + (k as f64 + 0.5) * h;
                        let neg = if s < 0.0 { 1.0 } else { 0.0 };
                        let risk = if t >= s {
                            1.0 / survivor_left(&surv, s)
                        } else {
                            0.0
                        };
                        acc += h * (risk - neg);
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn identity_without_censoring() {
        assert_eq!(transform(&[1.0, 2.0, 3.0], &[true; 3]), vec![1.0, 2.0, 3.0]);
        assert_eq!(transform(&[-1.0, 2.0], &[true; 2]), vec![-1.0, 2.0]);
    }

    #[test]
    fn hand_integrated_example() {
        assert_eq!(
            transform(&[1.0, 2.0, 3.0], &[true, false, true]),
            vec![1.0, 2.0, 4.0]
        );
    }

    #[test]
    fn all_negative_times() {
        assert_eq!(
            transform(&[-3.0, -2.5, -1.0], &[true; 3]),
            vec![-3.0, -2.5, -1.0]
        );
    }

    #[test]
    fn matches_refined_riemann_sum() {
        let times = [-1.3, 0.4, 0.4, 2.2, -0.2, 3.1, 1.7, 2.2, 5.0];
        let events = [true, false, true, false, true, true, false, true, true];
        let exact = transform(&times, &events);
        let oracle = refined_oracle(&times, &events, 10);
        for (a, b) in exact.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_negative_with_censoring_matches_oracle() {
        let times = [-4.0, -3.5, -2.0, -1.5, -1.0];
        let events = [true, false, true, false, false];
        let exact = transform(&times, &events);
        let oracle = refined_oracle(&times, &events, 10);
        for (a, b) in exact.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_survivor_inside_range_is_an_error() {
        let data = SurvivalDataset::times_only(vec![1.0, 2.0, 3.0], vec![true; 3]).unwrap();
        // a survivor that vanishes before the largest time
        let other = SurvivalDataset::times_only(vec![0.5, 1.5], vec![true, false]).unwrap();
        let surv = fit_censoring_survivor(&other).unwrap();
        assert!(matches!(
            leurgans_transform(&data, &surv),
            Err(Error::ZeroSurvivor { at }) if at == 1.5
        ));
    }

    #[test]
    fn standardize_single_column() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = standardize(&x).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(d.matrix()[(0, 0)], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(d.matrix()[(1, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.matrix()[(2, 0)], s, epsilon = 1e-15);
        assert_eq!(d.col_means()[0], 2.0);
        assert_abs_diff_eq!(d.col_norms()[0], 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, -2.0, 1.1, 0.5, -0.9, 2.5, 4.0]);
        let once = standardize(&x).unwrap();
        let twice = standardize(once.matrix()).unwrap();
        assert!((twice.matrix() - once.matrix()).amax() < 1e-14);
        assert!(twice.col_means().amax() < 1e-14);
        assert!((twice.col_norms().add_scalar(-1.0)).amax() < 1e-14);
    }

    #[test]
    fn constant_column_is_named() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert_eq!(standardize(&x).unwrap_err(), Error::ConstantColumn(1));
    }

    #[test]
    fn destandardize_examples() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = standardize(&x).unwrap();
        let (b, a) = destandardize_coefficients(&DVector::from_element(1, 2f64.sqrt()), &d, 5.0);
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 3.0, epsilon = 1e-14);

        let (b, a) = destandardize_coefficients(&DVector::zeros(1), &d, 5.0);
        assert_eq!(b[0], 0.0);
        assert_eq!(a, 5.0);
    }

    proptest! {
        #[test]
        fn no_censoring_identity(times in prop::collection::vec(-100.0f64..100.0, 2..50)) {
            let events = vec![true; times.len()];
            let ys = transform(&times, &events);
            for (y, t) in ys.iter().zip(&times) {
                prop_assert!((y - t).abs() <= 1e-12);
            }
        }

        #[test]
        fn destandardized_predictions_agree(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 5..20),
            beta in prop::collection::vec(-3.0f64..3.0, 3),
            center in -10.0f64..10.0,
        ) {
            let n = rows.len();
            let x = DMatrix::from_fn(n, 3, |i, j| rows[i][j] + (i * (j + 1)) as f64 * 0.01);
            let Ok(d) = standardize(&x) else { return Ok(()); };
            let beta = DVector::from_vec(beta);
            let (b, a) = destandardize_coefficients(&beta, &d, center);
            let raw = &x * &b;
            let std = d.matrix() * &beta;
            for i in 0..n {
                prop_assert!((raw[i] + a - std[i] - center).abs() < 1e-10);
            }
        }
    }
}
