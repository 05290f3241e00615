//! Box-constrained limited-memory BFGS (projected-gradient variant).
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the iteration; the two-loop recursion runs on the remaining free
//! variables and trial points are projected back onto the box during a
//! backtracking Armijo line search.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub pgtol: f64,
    /// Stop when the relative decrease of the objective drops below this.
    pub ftol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { max_iters: 200, memory: 10, pgtol: 1e-8, ftol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` returns the objective value and its gradient. Non-finite values are
/// treated as infeasible and rejected by the line search.
pub fn minimize_bounded<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x);
    let mut evals = 1;
    if !fx.is_finite() {
        return LbfgsResult { x, f: f64::INFINITY, iters: 0, evals };
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iters = 0;

    while iters < cfg.max_iters {
        iters += 1;
        let mut pg_norm: f64 = 0.0;
        let mut free = vec![true; n];
        for i in 0..n {
            let stepped = (x[i] - g[i]).clamp(lower[i], upper[i]);
            pg_norm = pg_norm.max((stepped - x[i]).abs());
            if (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                free[i] = false;
            }
        }
        if pg_norm < cfg.pgtol {
            break;
        }

        // two-loop recursion on the free variables
        let mut q: Vec<f64> = g.iter().zip(&free).map(|(gi, &fr)| if fr { *gi } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().zip(&free).map(|(v, &fr)| if fr { -v } else { 0.0 }).collect();
        let gd = dot(&g, &d);
        if !(gd < 0.0) || hist.is_empty() {
            d = g.iter().zip(&free).map(|(gi, &fr)| if fr { -gi } else { 0.0 }).collect();
            hist.clear();
        }
        let mut alpha = if hist.is_empty() {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax > 0.0 { (1.0 / dmax).min(1.0) } else { 1.0 }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut xn, lower, upper);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| s.abs() <= 1e-300) {
                break;
            }
            let (fn_, gn) = f(&xn);
            evals += 1;
            if fn_.is_finite() && fn_ <= fx + 1e-4 * dot(&g, &step) {
                accepted = Some((xn, fn_, gn, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if decrease <= cfg.ftol * fx.abs().max(1.0) {
            break;
        }
    }
    LbfgsResult { x, f: fx, iters, evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained_interior() {
        let f = |x: &[f64]| {
            let v = 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
            let g = vec![
                -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ];
            (v, g)
        };
        let r = minimize_bounded(f, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &LbfgsConfig { max_iters: 500, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn active_bound() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,1]^2 is (1, 0)
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]);
        let r = minimize_bounded(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &LbfgsConfig::default());
        assert_eq!(r.x, vec![1.0, 0.0]);
    }

    #[test]
    fn infinite_start_returns_immediately() {
        let r = minimize_bounded(|_| (f64::NAN, vec![0.0]), &[0.5], &[0.0], &[1.0], &LbfgsConfig::default());
        assert_eq!(r.iters, 0);
        assert!(r.f.is_infinite());
    }
}
