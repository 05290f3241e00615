//! Self-test report over the region-averaging checks in [`crate::theory`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::theory::{discrete_norm_reduction_check, indicator_fourier_factor, random_grid_function, GridKernel};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// `|sinc|` bound of the box-indicator Fourier factor on `n` random (frequency, length) draws.
pub fn fourier_factor_bound(n: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let dim = rng.random_range(1..=5);
        let omega: Vec<f64> = (0..dim).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        let lengths: Vec<f64> = (0..dim).map(|_| rng.random_range(1e-3..2.0)).collect();
        worst = worst.max(indicator_fourier_factor(&omega, &lengths).abs());
    }
    CheckOutcome {
        name: "indicator Fourier factor bounded by 1".into(),
        passed: worst <= 1.0,
        detail: format!("{n} draws, max |factor| = {worst:.6}"),
    }
}

/// `‖Sf‖ ≤ ‖f‖` on `n` random periodic grid functions.
pub fn norm_reduction(n: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..n {
        let m = [64, 128, 256][rng.random_range(0..3)];
        // squared-exponential weights underflow unless the lengthscale is about a grid cell
        let kernel = if i % 2 == 0 {
            GridKernel::Matern52 { lengthscale: rng.random_range(0.03..0.2) }
        } else {
            GridKernel::SquaredExponential { lengthscale: rng.random_range(0.5..1.5) / m as f64 }
        };
        let terms = rng.random_range(1..=12);
        let length = [0.1, 0.3, 0.5][rng.random_range(0..3)];
        let f = random_grid_function(kernel, m, terms, rng.random())?;
        let r = discrete_norm_reduction_check(&f, length)?;
        if !r.passed {
            failures += 1;
        }
        if r.norm_f > 0.0 {
            worst_ratio = worst_ratio.max(r.norm_sf / r.norm_f);
        }
    }
    Ok(CheckOutcome {
        name: "region averaging does not increase the RKHS norm".into(),
        passed: failures == 0,
        detail: format!("{n} instances, {failures} failures, max ratio = {worst_ratio:.6}"),
    })
}

pub fn run_selftest(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![fourier_factor_bound(100_000, seed), norm_reduction(100, seed)?])
}
