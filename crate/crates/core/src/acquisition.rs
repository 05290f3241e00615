//! Pointwise acquisition functions in standardized objective space (minimization).

use nalgebra::DMatrix;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_PI_2: f64 = 1.253_314_137_315_500_3;
/// Below this standardized improvement the log-EI tail switches to its asymptotic series.
const ASYMPTOTIC_Z: f64 = -30.0;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 26.0 {
        // split x so that hi² is exact and exp(x²) keeps full relative precision
        let hi = (x * 1_048_576.0).floor() / 1_048_576.0;
        let lo = x - hi;
        (hi * hi).exp() * (lo * (2.0 * hi + lo)).exp() * libm::erfc(x)
    } else {
        let inv = 1.0 / (2.0 * x * x);
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..12 {
            term *= -((2 * k - 1) as f64) * inv;
            sum += term;
        }
        sum / (x * PI.sqrt())
    }
}

/// `h(z) = φ(z) + zΦ(z)` split as `(ln h(z), φ(z)/h(z), Φ(z)/h(z))`.
fn log_h(z: f64) -> (f64, f64, f64) {
    if z > -1.0 {
        let (pdf, cdf) = (norm_pdf(z), norm_cdf(z));
        let h = pdf + z * cdf;
        (h.ln(), pdf / h, cdf / h)
    } else if z >= ASYMPTOTIC_Z {
        let t = -z;
        // Mills ratio Φ(-t)/φ(t)
        let mills = SQRT_PI_2 * erfcx(t * FRAC_1_SQRT_2);
        let one_minus_c = 1.0 - t * mills;
        (-0.5 * t * t - LN_SQRT_2PI + one_minus_c.ln(), 1.0 / one_minus_c, mills / one_minus_c)
    } else {
        let t = -z;
        let inv2 = 1.0 / (t * t);
        // h/φ = Σ_{k≥1} (-1)^{k+1} (2k-1)!! t^{-2k};  Φ/φ = Σ_{k≥0} (-1)^k (2k-1)!! t^{-2k-1}
        let (mut term, mut ratio) = (inv2, 0.0);
        let (mut mterm, mut mills) = (1.0 / t, 0.0);
        for k in 1..16 {
            ratio += term;
            mills += mterm;
            term *= -((2 * k + 1) as f64) * inv2;
            mterm *= -((2 * k - 1) as f64) * inv2;
        }
        (-0.5 * t * t - LN_SQRT_2PI + ratio.ln(), 1.0 / ratio, mills / ratio)
    }
}

/// Expected improvement `E[max(f_ref - f, 0)]` under `f ~ N(mean, variance)`.
pub fn ei(mean: f64, variance: f64, f_ref: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (f_ref - mean).max(0.0);
    }
    let z = (f_ref - mean) / sigma;
    if z > -1.0 {
        (f_ref - mean) * norm_cdf(z) + sigma * norm_pdf(z)
    } else {
        sigma * log_h(z).0.exp()
    }
}

/// Log-EI value and its partial derivatives with respect to the mean and the standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEi {
    pub value: f64,
    pub d_mean: f64,
    pub d_sigma: f64,
}

/// Numerically stable `ln EI` with gradient.
///
/// For `σ = 0` the value is `ln max(f_ref - μ, 0)`, which is `-∞` without improvement.
pub fn log_ei_grad(mean: f64, variance: f64, f_ref: f64) -> LogEi {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        let imp = f_ref - mean;
        return if imp > 0.0 {
            LogEi { value: imp.ln(), d_mean: -1.0 / imp, d_sigma: 0.0 }
        } else {
            LogEi { value: f64::NEG_INFINITY, d_mean: 0.0, d_sigma: 0.0 }
        };
    }
    let z = (f_ref - mean) / sigma;
    let (lh, pdf_ratio, cdf_ratio) = log_h(z);
    LogEi { value: lh + sigma.ln(), d_mean: -cdf_ratio / sigma, d_sigma: pdf_ratio / sigma }
}

pub fn log_ei(mean: f64, variance: f64, f_ref: f64) -> f64 {
    log_ei_grad(mean, variance, f_ref).value
}

/// Default exploration weight `β` for UCB-type acquisitions.
pub const DEFAULT_UCB_BETA: f64 = 4.0;

/// Upper confidence bound for minimization: `-μ + √β·σ`.
pub fn ucb_min(mean: f64, variance: f64, beta: f64) -> f64 {
    -mean + beta.sqrt() * variance.max(0.0).sqrt()
}

/// Monte-Carlo improvement of a joint draw matrix (`n_f × q`): the mean over
/// rows of `max(f_ref - min_j draw_j, 0)`.
pub fn q_improvement(draws: &DMatrix<f64>, f_ref: f64) -> f64 {
    if draws.nrows() == 0 {
        return 0.0;
    }
    let total: f64 = draws
        .row_iter()
        .map(|row| (f_ref - row.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0))
        .sum();
    total / draws.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_examples() {
        assert_eq!(ei(-1.0, 0.0, 0.0), 1.0);
        assert!((ei(0.3, 1.0, 0.3) - norm_pdf(0.0)).abs() < 1e-15);
        assert!(ei(5.0, 0.01, 0.0) < 1e-10);
    }

    #[test]
    fn ei_monotone_on_grid() {
        for i in 0..40 {
            let mu = -3.0 + 0.15 * i as f64;
            let mut prev = 0.0;
            for j in 1..60 {
                let s = 0.05 * j as f64;
                let v = ei(mu, s * s, 0.0);
                assert!(v >= 0.0 && v >= prev - 1e-15);
                prev = v;
            }
        }
        for j in 1..30 {
            let s = 0.1 * j as f64;
            let mut prev = f64::INFINITY;
            for i in 0..80 {
                let v = ei(-4.0 + 0.1 * i as f64, s * s, 0.0);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn log_ei_small_sigma_limit() {
        assert!(log_ei(-1.0, 1e-18, 0.0).abs() < 1e-6);
    }

    #[test]
    fn log_ei_deep_tail_finite() {
        let v = log_ei(40.0, 1.0, 0.0);
        assert!(v.is_finite() && v < -700.0, "{v}");
        // leading asymptotics: ln φ(t) - 2 ln t
        let t: f64 = 40.0;
        let asym = -0.5 * t * t - LN_SQRT_2PI - 2.0 * t.ln();
        assert!((v - asym).abs() < 1e-2);
        assert!(log_ei(1e3, 1.0, 0.0).is_finite());
        assert!(log_ei(41.0, 1.0, 0.0) < v);
    }

    #[test]
    fn log_ei_branches_are_continuous() {
        for &z in &[-1.0, ASYMPTOTIC_Z] {
            let a = log_ei_grad(-(z - 1e-9), 1.0, 0.0);
            let b = log_ei_grad(-(z + 1e-9), 1.0, 0.0);
            assert!((a.value - b.value).abs() < 1e-7 * a.value.abs().max(1.0));
            assert!((a.d_mean - b.d_mean).abs() < 1e-6 * a.d_mean.abs().max(1.0));
            assert!((a.d_sigma - b.d_sigma).abs() < 1e-6 * a.d_sigma.abs().max(1.0));
        }
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb_min(0.7, 2.0, 0.0), -0.7);
        assert_eq!(ucb_min(0.7, 0.0, 9.0), -0.7);
        assert_eq!(ucb_min(1.0, 4.0, 4.0), 3.0);
    }

    #[test]
    fn q_improvement_examples() {
        let above = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 3.0]);
        assert_eq!(q_improvement(&above, 0.5), 0.0);
        let constant = DMatrix::from_element(10, 1, -0.25);
        assert_eq!(q_improvement(&constant, 0.5), 0.75);
        let joint = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 2.0]);
        assert_eq!(q_improvement(&joint, 0.5), 0.5 * (1.5 + 0.5));
    }

    #[test]
    fn erfcx_matches_direct_product() {
        for &x in &[0.0f64, 0.5, 1.0, 3.0, 8.0, 20.0] {
            let direct = (x * x).exp() * libm::erfc(x);
            assert!((erfcx(x) - direct).abs() <= 1e-13 * direct);
        }
        // continuity at the asymptotic switch
        assert!((erfcx(26.0 - 1e-12) - erfcx(26.0)).abs() < 1e-14);
    }
}
