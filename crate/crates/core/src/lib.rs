//! Broken adaptive ridge (BAR) variable selection for the semiparametric
//! accelerated failure time model with right-censored responses.
//!
//! The pipeline is: estimate the censoring survivor by Kaplan–Meier
//! ([`km`]), map `(T_i, δ_i)` to the Leurgans synthetic response
//! ([`synthetic`]), then fit the iteratively reweighted ridge estimator on the
//! standardized design ([`bar`]) with `(ξ, λ)` chosen by K-fold
//! cross-validation ([`tuning`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bar;
pub mod comparators;
pub mod data;
pub mod error;
pub mod km;
pub mod screening;
pub mod simulate;
pub mod synthetic;
pub mod tuning;

pub use bar::{
    bar_fit, bar_step, grouping_bound_report, ridge_init, BarConfig, BarFit, GroupingRow,
};
pub use comparators::{
    coordinate_descent, fit_comparator_cv, kkt_check, CdFit, ComparatorFit, PenaltyKind,
    PenaltySpec,
};
pub use data::SurvivalDataset;
pub use error::{Error, Result};
pub use km::{fit_censoring_survivor, survivor_left, StepSurvivor};
pub use screening::{
    default_k, marginal_screen, two_step_fit, two_step_fit_with, MarginalScreener, ScreenResult,
    Screener, TwoStepFit,
};
pub use simulate::{
    calibrate_censoring_mean, default_beta0, generate, run_monte_carlo, run_replication,
    score_selection, CensoringScale, Method, MethodOutcome, MonteCarloOptions, ReplicationRecord,
    ReplicationResult, Report, Scenario, SelectionMetrics,
};
pub use synthetic::{
    destandardize_coefficients, leurgans_transform, standardize, StandardizedDesign,
    SyntheticResponse,
};
pub use tuning::{
    cross_validate, cross_validate_with, fit_cbar_cv, kfold_split, make_grid, CvOptions, CvResult,
    TuningGrid,
};
