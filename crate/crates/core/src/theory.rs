//! Numerical checks of the region-averaging operator `S f(x) = E_u[f(x + u)]`,
//! `u ~ Unif(∏[-l_i/2, l_i/2])`: Monte-Carlo averaging, the Fourier factor of
//! the box indicator, and RKHS-norm reduction on periodic 1D grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Monte-Carlo estimate of the average of `f` over the box `x + ∏[-l_i/2, l_i/2]`.
pub fn region_average_mc<F>(f: F, x: &[f64], lengths: &[f64], n_mc: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if n_mc == 0 || x.len() != lengths.len() || lengths.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Config("region average needs n_mc >= 1 and positive lengths per dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; x.len()];
    let mut total = 0.0;
    for _ in 0..n_mc {
        for ((pi, xi), li) in p.iter_mut().zip(x).zip(lengths) {
            *pi = xi + li * (rng.random::<f64>() - 0.5);
        }
        total += f(&p);
    }
    Ok(total / n_mc as f64)
}

/// `∏_i sin(ω_i l_i / 2) / (ω_i l_i / 2)`, the Fourier transform of the
/// normalized box indicator (1 at `ω_i = 0`).
pub fn indicator_fourier_factor(omega: &[f64], lengths: &[f64]) -> f64 {
    omega
        .iter()
        .zip(lengths)
        .map(|(w, l)| {
            let t = 0.5 * w * l;
            if t.abs() < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t }
        })
        .product()
}

/// Stationary kernels for the periodic grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridKernel {
    Matern52 { lengthscale: f64 },
    SquaredExponential { lengthscale: f64 },
}

impl GridKernel {
    fn eval(&self, r: f64) -> f64 {
        match *self {
            GridKernel::Matern52 { lengthscale } => crate::gp::matern52(r.abs() / lengthscale),
            GridKernel::SquaredExponential { lengthscale } => (-0.5 * (r / lengthscale).powi(2)).exp(),
        }
    }

    /// Kernel row of the unit-period periodization, sampled on `m` grid points.
    pub fn periodic_row(&self, m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| {
                let t = i as f64 / m as f64;
                (-40..=40).map(|p| self.eval(t + p as f64)).sum()
            })
            .collect()
    }
}

fn dft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Circular convolution `(a ∗ b)_i = Σ_j a_j b_{(i-j) mod M}`, computed directly.
pub fn circular_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    (0..m).map(|i| (0..m).map(|j| a[j] * b[(i + m - j) % m]).sum()).collect()
}

/// A function on the periodic grid `{0, 1/M, .., (M-1)/M}` given as a finite
/// kernel expansion `f = K α`, with `K` the circulant kernel matrix.
#[derive(Clone, Debug)]
pub struct GridFunction1D {
    kernel: GridKernel,
    kernel_row: Vec<f64>,
    spectral_weights: Vec<f64>,
    coefficients: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction1D {
    pub fn from_coefficients(kernel: GridKernel, coefficients: Vec<f64>) -> Result<Self> {
        let m = coefficients.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::Config("grid size must be a power of two (at least 2)".into()));
        }
        let kernel_row = kernel.periodic_row(m);
        let spectral_weights: Vec<f64> = dft(&kernel_row).iter().map(|c| c.re).collect();
        let top = spectral_weights.iter().copied().fold(0.0, f64::max);
        if spectral_weights.iter().any(|&w| !(w > 1e-12 * top)) {
            return Err(Error::Degenerate("kernel discretization has a non-positive spectral weight".into()));
        }
        let values = circular_convolve(&coefficients, &kernel_row);
        Ok(Self { kernel, kernel_row, spectral_weights, coefficients, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn kernel(&self) -> GridKernel {
        self.kernel
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kernel_row(&self) -> &[f64] {
        &self.kernel_row
    }

    /// Eigenvalues of the circulant kernel matrix (DFT of the kernel row).
    pub fn spectral_weights(&self) -> &[f64] {
        &self.spectral_weights
    }

    /// Squared RKHS norm `αᵀ K α`.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().zip(&self.values).map(|(a, f)| a * f).sum()
    }

    /// Squared RKHS norm of arbitrary grid values via `(1/M) Σ |f̂|² / λ`.
    pub fn spectral_norm_sq(&self, values: &[f64]) -> f64 {
        let m = values.len() as f64;
        dft(values).iter().zip(&self.spectral_weights).map(|(c, w)| c.norm_sqr() / w).sum::<f64>() / m
    }
}

/// Normalized discrete box indicator of odd width closest to `l` (at least one cell).
pub fn discrete_indicator(m: usize, length: f64) -> Vec<f64> {
    let half = ((length * m as f64 / 2.0).floor() as usize).min((m - 1) / 2);
    let width = 2 * half + 1;
    let mut chi = vec![0.0; m];
    for j in 0..=half {
        chi[j] = 1.0 / width as f64;
        chi[(m - j) % m] = 1.0 / width as f64;
    }
    chi
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReduction {
    pub norm_f: f64,
    pub norm_sf: f64,
    /// `‖Sf‖` recomputed as `(χ∗α)ᵀ K (χ∗α)` without Fourier transforms.
    pub norm_sf_direct: f64,
    pub passed: bool,
}

/// Compares `‖f‖` with `‖S f‖` for the box average of length `length` on the grid.
pub fn discrete_norm_reduction_check(f: &GridFunction1D, length: f64) -> Result<NormReduction> {
    if !(length > 0.0) {
        return Err(Error::Config("averaging length must be positive".into()));
    }
    let chi = discrete_indicator(f.len(), length);
    let sf = circular_convolve(f.values(), &chi);
    let norm_f = f.norm_sq().max(0.0).sqrt();
    let norm_sf = f.spectral_norm_sq(&sf).max(0.0).sqrt();
    let smoothed = circular_convolve(f.coefficients(), &chi);
    let direct: f64 = smoothed.iter().zip(&sf).map(|(a, v)| a * v).sum();
    Ok(NormReduction {
        norm_f,
        norm_sf,
        norm_sf_direct: direct.max(0.0).sqrt(),
        passed: norm_sf <= norm_f * (1.0 + 1e-8),
    })
}

/// Random kernel-sum grid function with `m` cells and `terms` nonzero coefficients.
pub fn random_grid_function(kernel: GridKernel, m: usize, terms: usize, seed: u64) -> Result<GridFunction1D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = vec![0.0; m];
    for _ in 0..terms.max(1) {
        let j = rng.random_range(0..m);
        alpha[j] += rng.random::<f64>() * 2.0 - 1.0;
    }
    GridFunction1D::from_coefficients(kernel, alpha)
}
