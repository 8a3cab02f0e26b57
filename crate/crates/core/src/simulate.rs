//! Monte Carlo harness for the AR(1) Gaussian designs.
//!
//! Covariates are `MVN(0, Σ)` with `Σ_ij = ρ^|i−j|`, errors are standard
//! normal, and censoring times are `N(c, 2)` with `c` calibrated to a target
//! censoring rate. Every replication owns a ChaCha stream keyed by
//! `(master_seed, rep_index)` and can be regenerated alone; reports do not
//! depend on thread count.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparators::{fit_comparator_cv, PenaltyKind};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::fit_censoring_survivor;
use crate::screening::{default_k, marginal_screen};
use crate::synthetic::{destandardize_coefficients, leurgans_transform, standardize};
use crate::tuning::{fit_cbar_cv, CvOptions, DEFAULT_FOLDS};

pub const REPORT_SCHEMA: &str = "cenbar-report/1";
pub const PILOT_SIZE: usize = 100_000;
const PILOT_STREAM: u64 = u64::MAX;
const CALIBRATION_TOL: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CensoringScale {
    /// `N(c, 2)` has variance 2.
    #[default]
    Variance,
    /// `N(c, 2)` has standard deviation 2.
    Sd,
}

impl CensoringScale {
    pub fn sd(self) -> f64 {
        match self {
            Self::Variance => 2f64.sqrt(),
            Self::Sd => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: u8,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub censoring_rate: f64,
    pub beta0: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub censoring_scale: CensoringScale,
}

impl Scenario {
    /// Scenario with the default coefficient vector of `model`.
    pub fn new(model: u8, n: usize, p: usize) -> Result<Self> {
        let scenario = Self {
            model,
            n,
            p,
            rho: 0.5,
            censoring_rate: 0.2,
            beta0: default_beta0(model, p)?,
            reps: 100,
            master_seed: 42,
            censoring_scale: CensoringScale::Variance,
        };
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !matches!(self.model, 1 | 2) {
            return bad(format!("model must be 1 or 2, got {}", self.model));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must be in [0, 1), got {}", self.rho));
        }
        if !(0.0..1.0).contains(&self.censoring_rate) {
            return bad(format!(
                "censoring_rate must be in [0, 1), got {}",
                self.censoring_rate
            ));
        }
        if self.beta0.len() != self.p {
            return bad(format!(
                "beta0 has {} entries, expected p = {}",
                self.beta0.len(),
                self.p
            ));
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        Ok(())
    }

    pub fn true_support(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.beta0[j] != 0.0).collect()
    }
}

pub fn default_beta0(model: u8, p: usize) -> Result<Vec<f64>> {
    let head: &[f64] = match model {
        1 => &[3.0, -2.0, 0.0, 0.0, 6.0],
        2 => &[3.0, -2.0, 6.0, 0.3, -0.2, 0.6],
        m => {
            return Err(Error::InvalidConfig(format!(
                "model must be 1 or 2, got {m}"
            )))
        }
    };
    let nonzero = head.iter().rposition(|b| *b != 0.0).map_or(0, |k| k + 1);
    if p < nonzero {
        return Err(Error::InvalidConfig(format!(
            "model {model} needs p >= {nonzero}, got {p}"
        )));
    }
    let mut beta = vec![0.0; p];
    for (b, h) in beta.iter_mut().zip(head) {
        *b = *h;
    }
    Ok(beta)
}

fn stream(master_seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One covariate row by the AR(1) recursion; only the first `len` entries.
fn ar1_row<R: Rng>(rng: &mut R, rho: f64, len: usize, out: &mut [f64]) {
    let s = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (j, slot) in out.iter_mut().take(len).enumerate() {
        let z = normal(rng);
        prev = if j == 0 { z } else { rho * prev + s * z };
        *slot = prev;
    }
}

/// Mean `c` of the censoring law giving `censoring_rate` on a pilot sample.
pub fn calibrate_censoring_mean(scenario: &Scenario) -> Result<f64> {
    let rate = scenario.censoring_rate;
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Calibration(format!(
            "censoring rate must be in (0, 1), got {rate}"
        )));
    }
    let sd = scenario.censoring_scale.sd();
    let len = scenario
        .beta0
        .iter()
        .rposition(|b| *b != 0.0)
        .map_or(0, |k| k + 1);
    let mut rng = stream(scenario.master_seed, PILOT_STREAM);
    let mut row = vec![0.0; len];
    let mut pairs = Vec::with_capacity(PILOT_SIZE);
    for _ in 0..PILOT_SIZE {
        ar1_row(&mut rng, scenario.rho, len, &mut row);
        let y: f64 = row
            .iter()
            .zip(&scenario.beta0)
            .map(|(x, b)| x * b)
            .sum::<f64>()
            + normal(&mut rng);
        let z = normal(&mut rng);
        pairs.push((y, z));
    }
    let censored_fraction =
        |c: f64| pairs.iter().filter(|(y, z)| *y > c + sd * z).count() as f64 / PILOT_SIZE as f64;

    let (ymin, ymax) = pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (y, _)| {
            (a.min(*y), b.max(*y))
        });
    // the fraction decreases in c
    let mut lo = ymin - 10.0 * sd;
    let mut hi = ymax + 10.0 * sd;
    let mut expand = 0;
    while censored_fraction(lo) < rate || censored_fraction(hi) > rate {
        lo -= 10.0 * sd;
        hi += 10.0 * sd;
        expand += 1;
        if expand > 20 {
            return Err(Error::Calibration(
                "could not bracket the target rate".into(),
            ));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = censored_fraction(mid);
        if (f - rate).abs() <= CALIBRATION_TOL / 10.0 {
            break;
        }
        if f > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (censored_fraction(mid) - rate).abs() > CALIBRATION_TOL {
        return Err(Error::Calibration(format!(
            "pilot censoring fraction {} misses target {rate}",
            censored_fraction(mid)
        )));
    }
    Ok(mid)
}

/// Draws replication `rep_index`. `censoring_mean` is `+∞` for no censoring.
pub fn generate(
    scenario: &Scenario,
    censoring_mean: f64,
    rep_index: u64,
) -> Result<(SurvivalDataset, DVector<f64>)> {
    let (n, p) = (scenario.n, scenario.p);
    let sd = scenario.censoring_scale.sd();
    let mut rng = stream(scenario.master_seed, rep_index);
    let mut x = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        ar1_row(&mut rng, scenario.rho, p, &mut row);
        let y: f64 = row
            .iter()
            .zip(&scenario.beta0)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + normal(&mut rng);
        let c = censoring_mean + sd * normal(&mut rng);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
        times.push(y.min(c));
        events.push(y <= c);
    }
    let data = SurvivalDataset::new(times, events, x)?;
    Ok((data, DVector::from_column_slice(&scenario.beta0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub misc: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tm: f64,
    pub sm: f64,
    pub mspe: f64,
    pub mab: f64,
}

pub fn score_selection(
    support_hat: &[usize],
    support_true: &[usize],
    beta_hat: &DVector<f64>,
    beta_true: &DVector<f64>,
    mspe: f64,
) -> ReplicationRecord {
    let inter = support_hat
        .iter()
        .filter(|j| support_true.contains(j))
        .count();
    let fp = support_hat.len() - inter;
    let fn_ = support_true.len() - inter;
    let sm = match (support_hat.len(), support_true.len()) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        (a, b) => inter as f64 / ((a * b) as f64).sqrt(),
    };
    let p = beta_true.len().max(1);
    let mab = (beta_hat - beta_true).abs().sum() / p as f64;
    ReplicationRecord {
        misc: (fp + fn_) as f64,
        fp: fp as f64,
        fn_: fn_ as f64,
        tm: if fp == 0 && fn_ == 0 { 1.0 } else { 0.0 },
        sm,
        mspe,
        mab,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cbar,
    Lasso,
    Alasso,
    Scad,
    Mcp,
}

impl Method {
    pub const ALL: [Method; 5] = [Self::Cbar, Self::Lasso, Self::Alasso, Self::Scad, Self::Mcp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cbar => "cbar",
            Self::Lasso => "lasso",
            Self::Alasso => "alasso",
            Self::Scad => "scad",
            Self::Mcp => "mcp",
        }
    }

    fn penalty(self) -> Option<PenaltyKind> {
        match self {
            Self::Cbar => None,
            Self::Lasso => Some(PenaltyKind::Lasso),
            Self::Alasso => Some(PenaltyKind::Alasso),
            Self::Scad => Some(PenaltyKind::Scad),
            Self::Mcp => Some(PenaltyKind::Mcp),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown method '{s}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonteCarloOptions {
    /// Screen to this many columns first; `Some(None)` uses the default size.
    pub screening: Option<Option<usize>>,
    pub folds: usize,
}

impl MonteCarloOptions {
    pub fn new() -> Self {
        Self {
            screening: None,
            folds: DEFAULT_FOLDS,
        }
    }

    pub fn with_screening(k: Option<usize>) -> Self {
        Self {
            screening: Some(k),
            ..Self::new()
        }
    }
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub record: ReplicationRecord,
    pub support: Vec<usize>,
    /// Fixed-point residual for CBAR, largest KKT violation for comparators.
    pub stationarity: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep: u64,
    pub censoring_fraction: f64,
    pub outcomes: Vec<Result<MethodOutcome>>,
}

/// Runs every method on replication `rep`.
pub fn run_replication(
    scenario: &Scenario,
    censoring_mean: f64,
    rep: u64,
    methods: &[Method],
    options: &MonteCarloOptions,
) -> ReplicationResult {
    let fail_all = |e: Error, frac: f64| ReplicationResult {
        rep,
        censoring_fraction: frac,
        outcomes: methods.iter().map(|_| Err(e.clone())).collect(),
    };
    let (data, beta0) = match generate(scenario, censoring_mean, rep) {
        Ok(v) => v,
        Err(e) => return fail_all(e, f64::NAN),
    };
    let frac = data.censoring_fraction();
    let prepared = (|| {
        let surv = fit_censoring_survivor(&data)?;
        let ystar = leurgans_transform(&data, &surv)?;
        let design = standardize(data.covariates())?;
        let kept: Vec<usize> = match options.screening {
            None => (0..design.p()).collect(),
            Some(k) => {
                let k = k.unwrap_or_else(|| default_k(data.n())).min(design.p());
                marginal_screen(&design, &ystar, k)?.kept
            }
        };
        Ok::<_, Error>((ystar, design, kept))
    })();
    let (ystar, design, kept) = match prepared {
        Ok(v) => v,
        Err(e) => return fail_all(e, frac),
    };
    let reduced = design.select_columns(&kept);
    let truth = scenario.true_support();
    let cv_seed = cv_seed(scenario.master_seed, rep);

    let outcomes = methods
        .iter()
        .map(|&method| {
            let (beta_local, mspe, stationarity, converged) = match method.penalty() {
                None => {
                    let options = CvOptions {
                        folds: options.folds,
                        seed: cv_seed,
                        ..CvOptions::default()
                    };
                    let (cv, fit) = fit_cbar_cv(&reduced, &ystar, &options, None)?;
                    (
                        fit.beta_std,
                        cv.best_error,
                        fit.fixed_point_residual,
                        fit.converged,
                    )
                }
                Some(kind) => {
                    let fit = fit_comparator_cv(&reduced, &ystar, kind, options.folds, cv_seed)?;
                    (fit.beta_std, fit.cv_error, fit.max_kkt, fit.converged)
                }
            };
            let mut beta_std = DVector::zeros(design.p());
            for (local, &j) in kept.iter().enumerate() {
                beta_std[j] = beta_local[local];
            }
            let (beta_orig, _) = destandardize_coefficients(&beta_std, &design, ystar.center());
            let support: Vec<usize> = (0..beta_std.len())
                .filter(|&j| beta_std[j] != 0.0)
                .collect();
            let record = score_selection(&support, &truth, &beta_orig, &beta0, mspe);
            Ok(MethodOutcome {
                record,
                support,
                stationarity,
                converged,
            })
        })
        .collect();
    ReplicationResult {
        rep,
        censoring_fraction: frac,
        outcomes,
    }
}

/// CV fold seed for a replication (splitmix64 of the pair).
fn cv_seed(master_seed: u64, rep: u64) -> u64 {
    let mut z = master_seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub name: String,
    pub misc: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tm: f64,
    pub sm: f64,
    pub mspe: f64,
    pub mab: f64,
    pub failures: usize,
    pub reps: usize,
    /// Largest fixed-point residual (CBAR) or KKT violation (comparators).
    pub max_stationarity: f64,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scenario: Scenario,
    pub censoring_mean: f64,
    pub observed_censoring: f64,
    pub screening_k: Option<usize>,
    pub methods: Vec<SelectionMetrics>,
}

impl Report {
    pub fn method(&self, name: &str) -> Option<&SelectionMetrics> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,misc,fp,fn,tm,sm,mspe,mab,failures,reps,max_stationarity,nonconverged\n",
        );
        for m in &self.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.name,
                m.misc,
                m.fp,
                m.fn_,
                m.tm,
                m.sm,
                m.mspe,
                m.mab,
                m.failures,
                m.reps,
                m.max_stationarity,
                m.nonconverged
            ));
        }
        out
    }
}

fn summarize(name: &str, outcomes: &[&Result<MethodOutcome>]) -> SelectionMetrics {
    let ok: Vec<&MethodOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let count = ok.len();
    let mean = |f: fn(&ReplicationRecord) -> f64| {
        if count == 0 {
            f64::NAN
        } else {
            ok.iter().map(|o| f(&o.record)).sum::<f64>() / count as f64
        }
    };
    SelectionMetrics {
        name: name.to_string(),
        misc: mean(|r| r.misc),
        fp: mean(|r| r.fp),
        fn_: mean(|r| r.fn_),
        tm: mean(|r| r.tm),
        sm: mean(|r| r.sm),
        mspe: mean(|r| r.mspe),
        mab: mean(|r| r.mab),
        failures: outcomes.len() - count,
        reps: count,
        max_stationarity: ok.iter().map(|o| o.stationarity).fold(0.0, f64::max),
        nonconverged: ok.iter().filter(|o| !o.converged).count(),
    }
}

/// Runs all replications and aggregates per-method means.
pub fn run_monte_carlo(
    scenario: &Scenario,
    methods: &[Method],
    options: &MonteCarloOptions,
) -> Result<(Report, Vec<ReplicationResult>)> {
    scenario.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let censoring_mean = if scenario.censoring_rate > 0.0 {
        calibrate_censoring_mean(scenario)?
    } else {
        f64::INFINITY
    };
    let results: Vec<ReplicationResult> = (0..scenario.reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(scenario, censoring_mean, rep, methods, options))
        .collect();

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let outcomes: Vec<&Result<MethodOutcome>> =
                results.iter().map(|r| &r.outcomes[m]).collect();
            summarize(method.name(), &outcomes)
        })
        .collect();
    let observed_censoring =
        results.iter().map(|r| r.censoring_fraction).sum::<f64>() / results.len() as f64;
    let screening_k = options
        .screening
        .map(|k| k.unwrap_or_else(|| default_k(scenario.n)).min(scenario.p));
    let report = Report {
        schema: REPORT_SCHEMA,
        scenario: scenario.clone(),
        censoring_mean,
        observed_censoring,
        screening_k,
        methods: summaries,
    };
    Ok((report, results))
}
