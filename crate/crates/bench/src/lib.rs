//! Seeded inputs shared by the benchmarks.

use cenbar::{
    fit_censoring_survivor, leurgans_transform, standardize, StandardizedDesign, SurvivalDataset,
    SyntheticResponse,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Sparse linear model with about a quarter of the rows censored.
pub fn dataset(n: usize, p: usize, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let noise: f64 = rng.sample(StandardNormal);
        let y = 3.0 * x[(i, 0)] - 2.0 * x[(i, 1 % p)] + noise;
        let c = 2.0 + 3.0 * rng.sample::<f64, _>(StandardNormal);
        times.push(y.min(c));
        events.push(y <= c);
    }
    SurvivalDataset::new(times, events, x).expect("valid dataset")
}

pub fn prepared(n: usize, p: usize, seed: u64) -> (StandardizedDesign, SyntheticResponse) {
    let data = dataset(n, p, seed);
    let surv = fit_censoring_survivor(&data).expect("survivor");
    let y = leurgans_transform(&data, &surv).expect("transform");
    (standardize(data.covariates()).expect("design"), y)
}
