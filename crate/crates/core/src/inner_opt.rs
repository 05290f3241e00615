//! Acquisition maximization: multi-start bounded quasi-Newton search for smooth
//! acquisitions and discrete candidate search for Thompson sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::lbfgs::{minimize_bounded, LbfgsConfig};
use crate::problem::sobol_in_box;

/// A scalar field to maximize. `value_grad` may return `None`, in which case
/// a central finite-difference gradient is used.
pub trait SmoothObjective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_grad(&self, _x: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }
}

/// Wraps a plain closure (value only).
pub struct FnObjective<F: Fn(&[f64]) -> f64 + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> SmoothObjective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiStartConfig {
    pub n_raw: usize,
    pub n_restarts: usize,
    pub max_iters: usize,
    pub gtol: f64,
    /// Central-difference step when no analytic gradient is available.
    pub fd_step: f64,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self { n_raw: 512, n_restarts: 10, max_iters: 200, gtol: 1e-9, fd_step: 1e-4 }
    }
}

fn fd_value_grad<O: SmoothObjective + ?Sized>(obj: &O, x: &[f64], lo: &[f64], hi: &[f64], h: f64) -> (f64, Vec<f64>) {
    let f0 = obj.value(x);
    let mut xp = x.to_vec();
    let grad = (0..x.len())
        .map(|d| {
            let up = (x[d] + h).min(hi[d]);
            let dn = (x[d] - h).max(lo[d]);
            if up <= dn {
                return 0.0;
            }
            xp[d] = up;
            let fu = obj.value(&xp);
            xp[d] = dn;
            let fd = obj.value(&xp);
            xp[d] = x[d];
            (fu - fd) / (up - dn)
        })
        .collect();
    (f0, grad)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Returns true if `(va, a)` beats `(vb, b)`: higher value, ties to the lexicographically smaller point.
fn better(va: f64, a: &[f64], vb: f64, b: &[f64]) -> bool {
    va > vb || (va == vb && lex_less(a, b))
}

/// Multi-start maximization of `obj` over the box `[lower, upper]`.
///
/// Scores `n_raw` scrambled Sobol points, runs bounded L-BFGS from the best
/// `n_restarts` of them, and returns the overall best `(point, value)`.
pub fn maximize_smooth<O: SmoothObjective + ?Sized>(
    obj: &O,
    lower: &[f64],
    upper: &[f64],
    cfg: &MultiStartConfig,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let dim = obj.dim();
    if lower.len() != dim || upper.len() != dim || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::Config("maximize_smooth needs a valid box of the objective's dimension".into()));
    }
    if cfg.n_raw == 0 || cfg.n_restarts > cfg.n_raw {
        return Err(Error::Config("maximize_smooth needs 1 <= n_restarts <= n_raw".into()));
    }
    let raw = sobol_in_box(cfg.n_raw, lower, upper, seed)?;
    let values: Vec<f64> = raw
        .par_iter()
        .map(|x| {
            let v = obj.value(x);
            if v.is_nan() { f64::NEG_INFINITY } else { v }
        })
        .collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        if better(values[a], &raw[a], values[b], &raw[b]) {
            std::cmp::Ordering::Less
        } else if better(values[b], &raw[b], values[a], &raw[a]) {
            std::cmp::Ordering::Greater
        } else {
            a.cmp(&b)
        }
    });
    let (mut best_x, mut best_v) = (raw[order[0]].clone(), values[order[0]]);

    let lcfg = LbfgsConfig { max_iters: cfg.max_iters, pgtol: cfg.gtol, ..Default::default() };
    let locals: Vec<(Vec<f64>, f64)> = order[..cfg.n_restarts]
        .par_iter()
        .map(|&i| {
            let neg = |x: &[f64]| {
                let (v, g) = obj
                    .value_grad(x)
                    .unwrap_or_else(|| fd_value_grad(obj, x, lower, upper, cfg.fd_step));
                (-v, g.into_iter().map(|gi| -gi).collect())
            };
            let r = minimize_bounded(neg, &raw[i], lower, upper, &lcfg);
            let v = obj.value(&r.x);
            (r.x, if v.is_nan() { f64::NEG_INFINITY } else { v })
        })
        .collect();
    for (x, v) in locals {
        if better(v, &x, best_v, &best_x) {
            best_x = x;
            best_v = v;
        }
    }
    Ok((best_x, best_v))
}

/// Default Thompson-sampling candidate count: 2000 up to D = 50, rising linearly to 5000 at D = 200.
pub fn default_ts_candidates(dim: usize) -> usize {
    (2000 + 20 * dim.saturating_sub(50)).clamp(2000, 5000)
}

/// Candidate points built by replacing some center coordinates with Sobol values inside the box.
pub fn ts_candidates(lower: &[f64], upper: &[f64], center: &[f64], n_candidates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let dim = center.len();
    let sobol = sobol_in_box(n_candidates, lower, upper, seed)?;
    let prob = (20.0 / dim as f64).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    Ok(sobol
        .into_iter()
        .map(|s| {
            let mut mask: Vec<bool> = (0..dim).map(|_| rng.random::<f64>() < prob).collect();
            if !mask.iter().any(|&m| m) {
                mask[rng.random_range(0..dim)] = true;
            }
            (0..dim).map(|d| if mask[d] { s[d] } else { center[d].clamp(lower[d], upper[d]) }).collect()
        })
        .collect())
}

/// Thompson sampling: the candidate minimizing one joint posterior draw.
pub fn ts_candidate_argmin(
    model: &GpModel,
    lower: &[f64],
    upper: &[f64],
    center: &[f64],
    n_candidates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(ts_batch_argmin(model, lower, upper, center, n_candidates, 1, seed)?.remove(0))
}

/// Batch Thompson sampling: `batch` independent joint draws over a shared
/// candidate set, each contributing its distinct minimizer.
pub fn ts_batch_argmin(
    model: &GpModel,
    lower: &[f64],
    upper: &[f64],
    center: &[f64],
    n_candidates: usize,
    batch: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_candidates < batch || batch == 0 {
        return Err(Error::Config("Thompson sampling needs 1 <= batch <= n_candidates".into()));
    }
    let cands = ts_candidates(lower, upper, center, n_candidates, seed)?;
    let draws = model.sample_posterior(&cands, batch, seed.wrapping_add(1))?;
    let mut taken = vec![false; cands.len()];
    let mut out = Vec::with_capacity(batch);
    for k in 0..batch {
        let mut best: Option<usize> = None;
        for j in 0..cands.len() {
            if taken[j] {
                continue;
            }
            if best.is_none_or(|b| draws[(k, j)] < draws[(k, b)]) {
                best = Some(j);
            }
        }
        let b = best.expect("candidate available");
        taken[b] = true;
        out.push(cands[b].clone());
    }
    Ok(out)
}
