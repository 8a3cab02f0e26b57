//! K-fold cross-validated choice of `(ξ, λ)`.
//!
//! Both tuning parameters run over the same 10-point log-spaced path on
//! `[1e-4, b]` with `b = max_j (x_jᵀy*)² / (4 x_jᵀx_j)`, and every cell of the
//! Cartesian product is scored by mean held-out squared error against the
//! synthetic response. Each training fold is re-standardized and its
//! coefficients are mapped back before scoring the held-out rows.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bar::{BarConfig, BarFit, Gram};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::fit_censoring_survivor;
use crate::synthetic::{
    destandardize_coefficients, leurgans_transform, standardize, StandardizedDesign,
    SyntheticResponse,
};

pub const GRID_LOWER: f64 = 1e-4;
pub const GRID_POINTS: usize = 10;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningGrid {
    pub xi_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl TuningGrid {
    /// A grid holding a single `(ξ, λ)` cell.
    pub fn single(xi: f64, lambda: f64) -> Self {
        Self {
            xi_values: vec![xi],
            lambda_values: vec![lambda],
            lower: xi.min(lambda),
            upper: xi.max(lambda),
        }
    }
}

/// `count` points equally spaced in log scale from `lower` to `upper` inclusive.
pub fn log_space(lower: f64, upper: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![upper];
    }
    let (a, b) = (lower.ln(), upper.ln());
    (0..count)
        .map(|k| match k {
            0 => lower,
            k if k == count - 1 => upper,
            k => (a + (b - a) * k as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

pub fn make_grid(design: &StandardizedDesign, ystar: &SyntheticResponse) -> Result<TuningGrid> {
    let y = ystar.centered();
    let x = design.matrix();
    let upper = (0..design.p())
        .map(|j| {
            let col = x.column(j);
            col.dot(&y).powi(2) / (4.0 * col.norm_squared())
        })
        .fold(0.0, f64::max);
    if !(upper > GRID_LOWER) {
        return Err(Error::DegenerateGrid {
            lower: GRID_LOWER,
            upper,
        });
    }
    let values = log_space(GRID_LOWER, upper, GRID_POINTS);
    Ok(TuningGrid {
        xi_values: values.clone(),
        lambda_values: values,
        lower: GRID_LOWER,
        upper,
    })
}

/// Seeded random partition of `0..n` into `k` folds whose sizes differ by at
/// most one. Indices inside each fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in perm.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// One training/held-out split, with the training design re-standardized.
#[derive(Debug, Clone)]
pub(crate) struct Fold {
    pub train: StandardizedDesign,
    pub train_y: SyntheticResponse,
    test_x: DMatrix<f64>,
    test_y: DVector<f64>,
}

impl Fold {
    pub(crate) fn new(
        design: &StandardizedDesign,
        ystar: &SyntheticResponse,
        train_y: SyntheticResponse,
        test_rows: &[usize],
    ) -> Result<Self> {
        let n = design.n();
        let mut in_test = vec![false; n];
        for &i in test_rows {
            in_test[i] = true;
        }
        let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let train = standardize(&design.matrix().select_rows(&train_rows))?;
        Ok(Self {
            train,
            train_y,
            test_x: design.matrix().select_rows(test_rows),
            test_y: DVector::from_iterator(
                test_rows.len(),
                test_rows.iter().map(|&i| ystar.values()[i]),
            ),
        })
    }

    pub(crate) fn gram(&self) -> Gram {
        Gram::new(self.train.matrix(), &self.train_y.centered())
    }

    /// Mean squared held-out error of coefficients fitted on the training design.
    pub(crate) fn heldout_mse(&self, beta_train_std: &DVector<f64>) -> f64 {
        let (beta, intercept) =
            destandardize_coefficients(beta_train_std, &self.train, self.train_y.center());
        let resid = &self.test_y - (&self.test_x * beta).add_scalar(intercept);
        resid.norm_squared() / self.test_y.len() as f64
    }
}

pub(crate) fn build_folds(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    folds: &[Vec<usize>],
) -> Vec<Result<Fold>> {
    folds
        .iter()
        .map(|test| {
            let train_rows = complement(design.n(), test);
            Fold::new(design, ystar, ystar.select_rows(&train_rows), test)
        })
        .collect()
}

pub(crate) fn complement(n: usize, rows: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in rows {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    /// `errors[a][b]` is the mean held-out error at `(xi_values[a], lambda_values[b])`.
    pub errors: Vec<Vec<f64>>,
    pub best_xi: f64,
    pub best_lambda: f64,
    pub best_error: f64,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Refit the censoring survivor and synthetic response inside each
    /// training fold instead of using the full-data transform.
    pub per_fold_transform: bool,
    pub bar: BarConfig,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            seed: 0,
            per_fold_transform: false,
            bar: BarConfig::default(),
        }
    }
}

/// Index of the minimal entry of an `rows × cols` error table, with ties
/// going to the larger column index, then the larger row index.
pub(crate) fn argmin_prefer_sparse(errors: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (a, row) in errors.iter().enumerate() {
        for (b, &e) in row.iter().enumerate() {
            if !e.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((ba, bb)) => {
                    let be = errors[ba][bb];
                    e < be || (e == be && (b > bb || (b == bb && a > ba)))
                }
            };
            if better {
                best = Some((a, b));
            }
        }
    }
    best
}

pub fn cross_validate(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    grid: &TuningGrid,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let options = CvOptions {
        folds: k,
        seed,
        ..CvOptions::default()
    };
    cross_validate_with(design, ystar, grid, &options, None)
}

/// Cross-validation with explicit options. `data` is required when
/// `options.per_fold_transform` is set and must be the dataset that produced
/// `design` and `ystar`.
pub fn cross_validate_with(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    grid: &TuningGrid,
    options: &CvOptions,
    data: Option<&SurvivalDataset>,
) -> Result<CvResult> {
    if design.n() != ystar.len() {
        return Err(Error::LengthMismatch {
            what: "synthetic response",
            got: ystar.len(),
            expected: design.n(),
        });
    }
    let folds = kfold_split(design.n(), options.folds, options.seed)?;
    let prepared: Vec<Result<Fold>> = if options.per_fold_transform {
        let data = data.ok_or_else(|| {
            Error::InvalidConfig("per-fold transform needs the source dataset".into())
        })?;
        folds
            .iter()
            .map(|test| {
                let train_rows = complement(design.n(), test);
                let train_data = data.subset(&train_rows)?;
                let surv = fit_censoring_survivor(&train_data)?;
                let train_y = leurgans_transform(&train_data, &surv)?;
                Fold::new(design, ystar, train_y, test)
            })
            .collect()
    } else {
        build_folds(design, ystar, &folds)
    };

    let n_xi = grid.xi_values.len();
    let n_lambda = grid.lambda_values.len();
    // fold-major list of (fold, xi) jobs, each producing one row of errors
    let jobs: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..n_xi).map(move |a| (f, a)))
        .collect();
    let rows: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(f, a)| {
            let Ok(fold) = &prepared[f] else {
                return vec![f64::INFINITY; n_lambda];
            };
            let gram = fold.gram();
            let Ok(init) = gram.ridge(grid.xi_values[a]) else {
                return vec![f64::INFINITY; n_lambda];
            };
            grid.lambda_values
                .iter()
                .map(|&lambda| {
                    let config = BarConfig {
                        xi: grid.xi_values[a],
                        lambda,
                        ..options.bar
                    };
                    match gram.iterate_from(init.clone(), &config) {
                        Ok((beta, ..)) => {
                            let e = fold.heldout_mse(&beta);
                            if e.is_finite() {
                                e
                            } else {
                                f64::INFINITY
                            }
                        }
                        Err(_) => f64::INFINITY,
                    }
                })
                .collect()
        })
        .collect();

    let mut errors = vec![vec![0.0; n_lambda]; n_xi];
    for (&(_, a), row) in jobs.iter().zip(&rows) {
        for (b, e) in row.iter().enumerate() {
            errors[a][b] += e;
        }
    }
    let k = folds.len() as f64;
    for row in &mut errors {
        for e in row.iter_mut() {
            *e /= k;
        }
    }

    let (a, b) = argmin_prefer_sparse(&errors).ok_or(Error::CrossValidationFailed)?;
    Ok(CvResult {
        best_xi: grid.xi_values[a],
        best_lambda: grid.lambda_values[b],
        best_error: errors[a][b],
        errors,
        folds,
        seed: options.seed,
    })
}

/// Cross-validates on the full grid and refits at the selected cell.
pub fn fit_cbar_cv(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    options: &CvOptions,
    data: Option<&SurvivalDataset>,
) -> Result<(CvResult, BarFit)> {
    let grid = make_grid(design, ystar)?;
    let cv = cross_validate_with(design, ystar, &grid, options, data)?;
    let config = BarConfig {
        xi: cv.best_xi,
        lambda: cv.best_lambda,
        ..options.bar
    };
    let fit = crate::bar::bar_fit(design, ystar, &config)?;
    Ok((cv, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bar::bar_fit;
    use approx::assert_relative_eq;

    fn toy(n: usize, p: usize, signal: bool, seed: u64) -> (StandardizedDesign, SyntheticResponse) {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let mut y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        if signal {
            y += x.column(0) * 3.0 - x.column(1) * 2.0;
        }
        (standardize(&x).unwrap(), SyntheticResponse::new(y))
    }

    #[test]
    fn grid_upper_bound_single_column() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = standardize(&x).unwrap();
        let y = SyntheticResponse::new(d.matrix().column(0) * 2.0);
        let g = make_grid(&d, &y).unwrap();
        assert_relative_eq!(g.upper, 1.0, epsilon = 1e-12);
        assert_eq!(g.xi_values.len(), 10);
        assert_eq!(g.xi_values[0], 1e-4);
        assert_eq!(g.xi_values[9], g.upper);
        let ratios: Vec<f64> = g.lambda_values.windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert_relative_eq!(*r, ratios[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_degenerate_cases() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = standardize(&x).unwrap();
        let y = SyntheticResponse::new(DVector::from_vec(vec![1.0, -2.0, 1.0]));
        assert!(matches!(
            make_grid(&d, &y),
            Err(Error::DegenerateGrid { .. })
        ));
        // xᵀy = 0.02 gives b = 1e-4 exactly
        let y = SyntheticResponse::new(d.matrix().column(0) * 0.02);
        assert!(matches!(
            make_grid(&d, &y),
            Err(Error::DegenerateGrid { .. })
        ));
    }

    #[test]
    fn fold_sizes_and_determinism() {
        let f = kfold_split(10, 5, 3).unwrap();
        assert!(f.iter().all(|s| s.len() == 2));
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(f, kfold_split(10, 5, 3).unwrap());

        let sizes: Vec<usize> = kfold_split(7, 5, 1).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);

        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(4, 1, 0).is_err());
    }

    #[test]
    fn single_cell_grid_is_plain_kfold_error() {
        let (d, y) = toy(50, 4, true, 2);
        let grid = TuningGrid::single(0.5, 0.2);
        let cv = cross_validate(&d, &y, &grid, 5, 9).unwrap();
        assert_eq!((cv.best_xi, cv.best_lambda), (0.5, 0.2));

        // recompute the K-fold error by hand
        let mut total = 0.0;
        for test in &cv.folds {
            let train = complement(50, test);
            let td = standardize(&d.matrix().select_rows(&train)).unwrap();
            let ty = y.select_rows(&train);
            let fit = bar_fit(&td, &ty, &BarConfig::new(0.5, 0.2)).unwrap();
            let (b, a) = destandardize_coefficients(&fit.beta_std, &td, ty.center());
            let mut se = 0.0;
            for &i in test {
                let pred = d.matrix().row(i).transpose().dot(&b) + a;
                se += (y.values()[i] - pred).powi(2);
            }
            total += se / test.len() as f64;
        }
        assert_relative_eq!(cv.best_error, total / 5.0, epsilon = 1e-10);
    }

    #[test]
    fn tie_break_prefers_larger_lambda_then_xi() {
        let errors = vec![
            vec![1.0, 0.5, 0.5],
            vec![0.7, 0.5, 0.5],
            vec![2.0, 3.0, f64::INFINITY],
        ];
        assert_eq!(argmin_prefer_sparse(&errors), Some((1, 2)));
        assert_eq!(argmin_prefer_sparse(&[vec![f64::INFINITY]]), None);
    }

    #[test]
    fn cv_is_reproducible_and_selects_minimum() {
        let (d, y) = toy(60, 6, true, 4);
        let grid = make_grid(&d, &y).unwrap();
        let a = cross_validate(&d, &y, &grid, 5, 17).unwrap();
        let b = cross_validate(&d, &y, &grid, 5, 17).unwrap();
        assert_eq!(a, b);
        let min = a
            .errors
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_error, min);
        assert!(a
            .errors
            .iter()
            .flatten()
            .all(|e| e.is_finite() || *e == f64::INFINITY));
    }

    #[test]
    fn per_fold_transform_runs() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 60;
        let x = DMatrix::from_fn(n, 3, |_, _| StandardNormal.sample(&mut rng));
        let times: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * x[(i, 0)] + {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    e
                }
            })
            .collect();
        let events: Vec<bool> = (0..n).map(|i| i % 5 != 0).collect();
        let data = SurvivalDataset::new(times, events, x.clone()).unwrap();
        let surv = fit_censoring_survivor(&data).unwrap();
        let y = leurgans_transform(&data, &surv).unwrap();
        let d = standardize(&x).unwrap();
        let options = CvOptions {
            per_fold_transform: true,
            seed: 3,
            ..CvOptions::default()
        };
        let (cv, fit) = fit_cbar_cv(&d, &y, &options, Some(&data)).unwrap();
        assert!(cv.best_error.is_finite());
        assert!(fit.support.contains(&0));
        assert!(cross_validate_with(&d, &y, &make_grid(&d, &y).unwrap(), &options, None).is_err());
    }
}
