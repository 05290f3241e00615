//! Log-regret transform and greedy max-min selection of representative training points.

use crate::error::{Error, Result};
use crate::problem::Dataset;

/// Default cap on GP training-set size.
pub const DEFAULT_N_GP: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct RegretScores {
    /// Log regret per sample, in `[0, 1]`.
    pub r: Vec<f64>,
    /// Min-max normalized values.
    pub normalized: Vec<f64>,
    /// Smallest strictly positive normalized value.
    pub normalized_min_positive: f64,
}

pub fn log_regret(values: &[f64]) -> Result<RegretScores> {
    if values.len() < 2 {
        return Err(Error::Degenerate("log regret needs at least two values".into()));
    }
    let f_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let f_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(f_max > f_min) {
        return Err(Error::Degenerate("log regret is undefined when all values are equal".into()));
    }
    let normalized: Vec<f64> = values.iter().map(|f| (f - f_min) / (f_max - f_min)).collect();
    let fm = normalized.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let denom = (1.0 + fm).ln() - fm.ln();
    let r = normalized.iter().map(|v| (((v + fm).ln() - fm.ln()) / denom).clamp(0.0, 1.0)).collect();
    Ok(RegretScores { r, normalized, normalized_min_positive: fm })
}

/// Indices of at most `n_gp` representative samples.
///
/// Points live in `(x, r)` space. The first pick is the lowest-index minimizer
/// of the objective; each further pick maximizes its distance to the nearest
/// point already chosen (ties to the lowest index).
pub fn select_representatives(data: &Dataset, n_gp: usize) -> Vec<usize> {
    let n = data.len();
    if n <= n_gp {
        return (0..n).collect();
    }
    if n_gp == 0 {
        return Vec::new();
    }
    let r = match log_regret(data.values()) {
        Ok(s) => s.r,
        Err(_) => vec![0.0; n],
    };
    let aug: Vec<Vec<f64>> =
        data.points().iter().zip(&r).map(|(p, ri)| p.iter().copied().chain(std::iter::once(*ri)).collect()).collect();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let first = data.best().map(|(i, _)| i).unwrap_or(0);
    let mut chosen = vec![first];
    let mut taken = vec![false; n];
    taken[first] = true;
    let mut nearest: Vec<f64> = aug.iter().map(|p| dist2(p, &aug[first])).collect();
    while chosen.len() < n_gp {
        let mut best = usize::MAX;
        for i in 0..n {
            if !taken[i] && (best == usize::MAX || nearest[i] > nearest[best]) {
                best = i;
            }
        }
        taken[best] = true;
        chosen.push(best);
        for i in 0..n {
            if !taken[i] {
                nearest[i] = nearest[i].min(dist2(&aug[i], &aug[best]));
            }
        }
    }
    chosen
}

/// The dataset itself when small enough, otherwise its representative subset.
pub fn reduce_dataset(data: &Dataset, n_gp: usize) -> Dataset {
    if data.len() <= n_gp {
        data.clone()
    } else {
        data.select(&select_representatives(data, n_gp))
    }
}
