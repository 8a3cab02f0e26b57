//! Broken adaptive ridge on the synthetic response.
//!
//! Starting from a ridge estimate, the map
//!
//! ```text
//! g(b) = argmin_β ‖y* − Xβ‖² + λ Σ_j β_j² / b_j²
//! ```
//!
//! is iterated to a fixed point. Each step is solved in the rescaled form
//! `β_A = Γ (Γ X_Aᵀ X_A Γ + λ I)⁻¹ Γ X_Aᵀ y*` with `Γ = diag(b_A)`, which is the
//! same solution as the reweighted normal equations but never divides by a
//! small coefficient. Coordinates that fall below `zero_threshold` are frozen
//! at exactly zero and dropped from all later solves.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::synthetic::{destandardize_coefficients, StandardizedDesign, SyntheticResponse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarConfig {
    pub xi: f64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub zero_threshold: f64,
}

impl Default for BarConfig {
    fn default() -> Self {
        Self {
            xi: 1.0,
            lambda: 1.0,
            tol: 1e-8,
            max_iter: 1000,
            zero_threshold: 1e-8,
        }
    }
}

impl BarConfig {
    pub fn new(xi: f64, lambda: f64) -> Self {
        Self {
            xi,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "xi and lambda must be nonnegative (xi = {}, lambda = {})",
                self.xi, self.lambda
            )));
        }
        if !(self.tol > 0.0) || !(self.zero_threshold > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "tol and zero_threshold must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarFit {
    pub beta_std: DVector<f64>,
    pub beta_orig: DVector<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub xi: f64,
    pub lambda: f64,
}

impl BarFit {
    /// Embeds a fit on a column subset back into `p` coordinates.
    pub fn embed(&self, kept: &[usize], full: &StandardizedDesign, response_center: f64) -> BarFit {
        let p = full.p();
        let mut beta_std = DVector::zeros(p);
        for (local, &j) in kept.iter().enumerate() {
            beta_std[j] = self.beta_std[local];
        }
        let (beta_orig, intercept) = destandardize_coefficients(&beta_std, full, response_center);
        let support = self.support.iter().map(|&local| kept[local]).collect();
        BarFit {
            beta_std,
            beta_orig,
            intercept,
            support,
            ..self.clone()
        }
    }
}

/// Cross products `XᵀX` and `Xᵀy*`, which are all the iteration needs.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    pub(crate) xtx: DMatrix<f64>,
    pub(crate) xty: DVector<f64>,
}

impl Gram {
    pub(crate) fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self {
            xtx: x.tr_mul(x),
            xty: x.tr_mul(y),
        }
    }

    fn p(&self) -> usize {
        self.xty.len()
    }

    pub(crate) fn ridge(&self, xi: f64) -> Result<DVector<f64>> {
        let mut a = self.xtx.clone();
        for j in 0..a.nrows() {
            a[(j, j)] += xi;
        }
        let chol = Cholesky::new(a).ok_or(Error::SolveFailed { lambda: xi })?;
        Ok(chol.solve(&self.xty))
    }

    /// One application of `g`; coordinates that are zero in `prev` stay zero.
    fn step(&self, lambda: f64, prev: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(j) = prev.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient(j));
        }
        let active: Vec<usize> = (0..self.p()).filter(|&j| prev[j] != 0.0).collect();
        let mut next = DVector::zeros(self.p());
        if active.is_empty() {
            return Ok(next);
        }
        let gamma: Vec<f64> = active.iter().map(|&j| prev[j]).collect();
        let m = active.len();
        let mut a = DMatrix::from_fn(m, m, |r, c| {
            gamma[r] * self.xtx[(active[r], active[c])] * gamma[c]
        });
        for r in 0..m {
            a[(r, r)] += lambda;
        }
        let rhs = DVector::from_fn(m, |r, _| gamma[r] * self.xty[active[r]]);
        let chol = Cholesky::new(a).ok_or(Error::SolveFailed { lambda })?;
        let z = chol.solve(&rhs);
        for (r, &j) in active.iter().enumerate() {
            next[j] = gamma[r] * z[r];
        }
        Ok(next)
    }

    /// Runs the iteration and returns `(beta, iterations, converged, residual)`.
    pub(crate) fn iterate(&self, config: &BarConfig) -> Result<(DVector<f64>, usize, bool, f64)> {
        config.validate()?;
        self.iterate_from(self.ridge(config.xi)?, config)
    }

    /// Iterates from a precomputed ridge estimate.
    pub(crate) fn iterate_from(
        &self,
        mut beta: DVector<f64>,
        config: &BarConfig,
    ) -> Result<(DVector<f64>, usize, bool, f64)> {
        config.validate()?;
        freeze(&mut beta, config.zero_threshold);

        let mut iterations = 0;
        loop {
            let mut next = self.step(config.lambda, &beta)?;
            iterations += 1;
            // residual of the current iterate, measured before freezing
            let residual = sup_change(&beta, &next);
            let frozen_before = count_zeros(&next);
            freeze(&mut next, config.zero_threshold);
            let newly_frozen = count_zeros(&next) > frozen_before;

            if residual <= config.tol && !newly_frozen {
                return Ok((beta, iterations, true, residual));
            }
            if iterations >= config.max_iter {
                return Ok((beta, iterations, false, residual));
            }
            beta = next;
        }
    }
}

fn freeze(beta: &mut DVector<f64>, threshold: f64) {
    for v in beta.iter_mut() {
        if v.abs() < threshold {
            *v = 0.0;
        }
    }
}

fn count_zeros(beta: &DVector<f64>) -> usize {
    beta.iter().filter(|v| **v == 0.0).count()
}

/// Sup-norm of `next - prev` over coordinates active in `prev`.
fn sup_change(prev: &DVector<f64>, next: &DVector<f64>) -> f64 {
    prev.iter()
        .zip(next.iter())
        .filter(|(p, _)| **p != 0.0)
        .map(|(p, q)| (q - p).abs())
        .fold(0.0, f64::max)
}

fn check_rows(design: &StandardizedDesign, ystar: &SyntheticResponse) -> Result<()> {
    if design.n() != ystar.len() {
        return Err(Error::LengthMismatch {
            what: "synthetic response",
            got: ystar.len(),
            expected: design.n(),
        });
    }
    Ok(())
}

/// Initial ridge estimate `(XᵀX + ξI)⁻¹ Xᵀy*`.
pub fn ridge_init(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    xi: f64,
) -> Result<DVector<f64>> {
    check_rows(design, ystar)?;
    Gram::new(design.matrix(), &ystar.centered()).ridge(xi)
}

/// One reweighted ridge step from `beta_prev`.
pub fn bar_step(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    lambda: f64,
    beta_prev: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_rows(design, ystar)?;
    if beta_prev.len() != design.p() {
        return Err(Error::LengthMismatch {
            what: "coefficient vector",
            got: beta_prev.len(),
            expected: design.p(),
        });
    }
    Gram::new(design.matrix(), &ystar.centered()).step(lambda, beta_prev)
}

pub fn bar_fit(
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    config: &BarConfig,
) -> Result<BarFit> {
    check_rows(design, ystar)?;
    let gram = Gram::new(design.matrix(), &ystar.centered());
    let (beta_std, iterations, converged, residual) = gram.iterate(config)?;
    let (beta_orig, intercept) = destandardize_coefficients(&beta_std, design, ystar.center());
    let support = (0..beta_std.len())
        .filter(|&j| beta_std[j] != 0.0)
        .collect();
    Ok(BarFit {
        beta_std,
        beta_orig,
        intercept,
        support,
        iterations,
        converged,
        fixed_point_residual: residual,
        xi: config.xi,
        lambda: config.lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingRow {
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

const GROUPING_SLACK: f64 = 1e-9;

/// Evaluates `|1/β_i − 1/β_j| ≤ ‖y*‖ √(2(1 − r_ij)) / λ` for every same-sign
/// pair in the support.
pub fn grouping_bound_report(
    fit: &BarFit,
    design: &StandardizedDesign,
    ystar: &SyntheticResponse,
    lambda: f64,
) -> Result<Vec<GroupingRow>> {
    if !(lambda > 0.0) {
        return Err(Error::ZeroLambda);
    }
    check_rows(design, ystar)?;
    let y_norm = ystar.centered().norm();
    let x = design.matrix();
    let mut rows = Vec::new();
    for (a, &i) in fit.support.iter().enumerate() {
        for &j in &fit.support[a + 1..] {
            let (bi, bj) = (fit.beta_std[i], fit.beta_std[j]);
            if bi * bj <= 0.0 {
                continue;
            }
            let r = x.column(i).dot(&x.column(j));
            let lhs = (1.0 / bi - 1.0 / bj).abs();
            let rhs = y_norm * (2.0 * (1.0 - r).max(0.0)).sqrt() / lambda;
            rows.push(GroupingRow {
                i,
                j,
                lhs,
                rhs,
                satisfied: lhs <= rhs + GROUPING_SLACK,
            });
        }
    }
    Ok(rows)
}
