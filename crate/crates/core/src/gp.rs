//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Targets are standardized before fitting and the prior mean is zero, so all
//! posterior quantities are in standardized objective units. Hyperparameters
//! are estimated by MAP in log-parameter space with a normal prior on each
//! log-parameter (i.e. log-normal priors on the parameters themselves):
//!
//! | parameter          | prior on log value        | bounds         |
//! |--------------------|---------------------------|----------------|
//! | lengthscale ℓ_d    | N(√2 + ½·ln D, √3²)       | [5e-3, 1e2]    |
//! | signal variance    | N(0, 1)                   | [1e-2, 1e2]    |
//! | noise variance     | N(-4, 1)                  | [1e-8, 1]      |

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lbfgs::{minimize_bounded, LbfgsConfig};
use crate::problem::{sobol_points, Dataset, Standardization};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Smallest noise variance the fitter will use.
pub const NOISE_FLOOR: f64 = 1e-8;
/// Jitter ladder (relative to the signal variance) for kernel-matrix factorization.
const FIT_JITTERS: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
/// Jitter ladder for posterior-correlation factorization during sampling.
const SAMPLE_JITTERS: [f64; 6] = [1e-10, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];
/// Posterior variances below this fraction of the signal variance are sampled as point masses.
const DETERMINISTIC_VAR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_variance, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[ln ℓ_1 .. ln ℓ_D, ln σ_f², ln σ_n²]`
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Self {
            lengthscales: v[..d].iter().map(|x| x.exp()).collect(),
            signal_variance: v[d].exp(),
            noise_variance: v[d + 1].exp(),
        }
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
}

fn scaled_dist2(x: &[f64], y: &[f64], ls: &[f64]) -> f64 {
    x.iter().zip(y).zip(ls).map(|((a, b), l)| ((a - b) / l).powi(2)).sum()
}

/// Matérn-5/2 ARD kernel `σ_f² · m52(r)`, `r² = Σ_d ((x_d - x'_d)/ℓ_d)²`.
pub fn kernel(x: &[f64], x_prime: &[f64], hp: &GpHyperparams) -> f64 {
    hp.signal_variance * matern52(scaled_dist2(x, x_prime, &hp.lengthscales).sqrt())
}

/// Gram matrix `K(a, b)` without noise.
pub fn gram(a: &[Vec<f64>], b: &[Vec<f64>], hp: &GpHyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel(&a[i], &b[j], hp))
}

/// Normal priors on log-hyperparameters (`loc`, `scale` pairs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperPrior {
    /// `None` means the dimension-scaled default `√2 + ½·ln D`.
    pub lengthscale_loc: Option<f64>,
    pub lengthscale_scale: f64,
    pub signal_loc: f64,
    pub signal_scale: f64,
    pub noise_loc: f64,
    pub noise_scale: f64,
}

impl Default for HyperPrior {
    fn default() -> Self {
        Self {
            lengthscale_loc: None,
            lengthscale_scale: 3f64.sqrt(),
            signal_loc: 0.0,
            signal_scale: 1.0,
            noise_loc: -4.0,
            noise_scale: 1.0,
        }
    }
}

impl HyperPrior {
    fn locs_scales(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let ls_loc = self.lengthscale_loc.unwrap_or(2f64.sqrt() + 0.5 * (dim as f64).ln());
        let mut loc = vec![ls_loc; dim];
        let mut scale = vec![self.lengthscale_scale; dim];
        loc.extend([self.signal_loc, self.noise_loc]);
        scale.extend([self.signal_scale, self.noise_scale]);
        (loc, scale)
    }

    /// Log density (up to a constant) and its gradient at log-parameters `theta`.
    pub fn log_density(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (loc, scale) = self.locs_scales(theta.len() - 2);
        let mut lp = 0.0;
        let grad = theta
            .iter()
            .zip(loc.iter().zip(&scale))
            .map(|(t, (m, s))| {
                let z = (t - m) / s;
                lp -= 0.5 * z * z;
                -z / s
            })
            .collect();
        (lp, grad)
    }
}

/// Natural-scale bounds on the hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self { lengthscale: (5e-3, 1e2), signal_variance: (1e-2, 1e2), noise_variance: (NOISE_FLOOR, 1.0) }
    }
}

impl HyperBounds {
    fn log_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.lengthscale.0.ln(); dim];
        let mut hi = vec![self.lengthscale.1.ln(); dim];
        lo.extend([self.signal_variance.0.ln(), self.noise_variance.0.max(NOISE_FLOOR).ln()]);
        hi.extend([self.signal_variance.1.ln(), self.noise_variance.1.ln()]);
        (lo, hi)
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Number of scrambled low-discrepancy starting points.
    pub n_restarts: usize,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
    pub prior: HyperPrior,
    pub bounds: HyperBounds,
    /// Extra starting point tried before the low-discrepancy starts.
    pub warm_start: Option<GpHyperparams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_restarts: 8,
            lbfgs: LbfgsConfig { max_iters: 200, ftol: 1e-9, pgtol: 1e-5, memory: 10 },
            seed: 0,
            prior: HyperPrior::default(),
            bounds: HyperBounds::default(),
            warm_start: None,
        }
    }
}

/// Cholesky factor of `A + jitter·I`, walking the jitter ladder `scale·jitters`.
fn cholesky_with_jitter(a: &DMatrix<f64>, scale: f64, jitters: &[f64]) -> std::result::Result<(DMatrix<f64>, f64), f64> {
    let mut last = 0.0;
    for &j in jitters {
        let jitter = j * scale;
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(c) = m.cholesky() {
            return Ok((c.unpack(), jitter));
        }
        last = jitter;
    }
    Err(last)
}

/// `L⁻¹` for lower-triangular `L`, column by column.
fn tri_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let ls = l.as_slice();
    let mut x = DMatrix::<f64>::zeros(n, n);
    let xs = x.as_mut_slice();
    for i in 0..n {
        let col = &mut xs[i * n..(i + 1) * n];
        col[i] = 1.0;
        for m in i..n {
            let v = col[m] / ls[m * n + m];
            col[m] = v;
            if v != 0.0 {
                let lcol = &ls[m * n + m + 1..(m + 1) * n];
                for (c, lv) in col[m + 1..].iter_mut().zip(lcol) {
                    *c -= v * lv;
                }
            }
        }
    }
    x
}

const CHOL_BLOCK: usize = 64;

/// Lower Cholesky factor of `a` together with its inverse, by recursive
/// blocking so that almost all work is matrix multiplication.
fn cholesky_and_inverse(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n <= CHOL_BLOCK {
        let l = a.clone().cholesky()?.unpack();
        let linv = tri_inverse(&l);
        return Some((l, linv));
    }
    let k = n / 2;
    let (l11, i11) = cholesky_and_inverse(&a.view((0, 0), (k, k)).into_owned())?;
    let a21 = a.view((k, 0), (n - k, k));
    let l21 = a21 * i11.transpose();
    let s = a.view((k, k), (n - k, n - k)) - &l21 * l21.transpose();
    let (l22, i22) = cholesky_and_inverse(&s)?;
    let i21 = -(&i22 * (&l21 * &i11));
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut linv = DMatrix::<f64>::zeros(n, n);
    l.view_mut((0, 0), (k, k)).copy_from(&l11);
    l.view_mut((k, 0), (n - k, k)).copy_from(&l21);
    l.view_mut((k, k), (n - k, n - k)).copy_from(&l22);
    linv.view_mut((0, 0), (k, k)).copy_from(&i11);
    linv.view_mut((k, 0), (n - k, k)).copy_from(&i21);
    linv.view_mut((k, k), (n - k, n - k)).copy_from(&i22);
    Some((l, linv))
}

/// [`cholesky_and_inverse`] of `A + jitter·I`, walking the jitter ladder `scale·jitters`.
fn cholesky_inverse_with_jitter(
    a: &DMatrix<f64>,
    scale: f64,
    jitters: &[f64],
) -> std::result::Result<(DMatrix<f64>, DMatrix<f64>), f64> {
    let mut last = 0.0;
    for &j in jitters {
        let jitter = j * scale;
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(pair) = cholesky_and_inverse(&m) {
            if pair.0.iter().chain(pair.1.iter()).all(|v| v.is_finite()) {
                return Ok(pair);
            }
        }
        last = jitter;
    }
    Err(last)
}

/// `A⁻¹ = L⁻ᵀ L⁻¹` from the inverse Cholesky factor.
fn inverse_from_inverse_factor(linv: &DMatrix<f64>) -> DMatrix<f64> {
    linv.transpose() * linv
}

/// `A⁻¹` from the lower Cholesky factor `L` of `A`.
#[cfg(test)]
fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    inverse_from_inverse_factor(&tri_inverse(l))
}

/// Log marginal likelihood and its gradient, precomputing pairwise squared differences.
struct MllProblem {
    n: usize,
    dim: usize,
    sq: Vec<f64>,
    y: DVector<f64>,
}

impl MllProblem {
    fn new(points: &[Vec<f64>], y: &[f64]) -> Self {
        let n = points.len();
        let dim = points[0].len();
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * dim);
        for i in 0..n {
            for j in i + 1..n {
                sq.extend(points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)));
            }
        }
        Self { n, dim, sq, y: DVector::from_column_slice(y) }
    }

    /// Returns `(lml, d lml / d theta)` with `theta` the log-hyperparameters.
    fn eval(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (n, dim) = (self.n, self.dim);
        let hp = GpHyperparams::from_log(theta);
        let inv_l2: Vec<f64> = hp.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let sf = hp.signal_variance;
        let sn = hp.noise_variance;

        let npairs = n * (n - 1) / 2;
        let mut kvals = Vec::with_capacity(npairs);
        let mut dfac = Vec::with_capacity(npairs);
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut p = 0;
        for i in 0..n {
            k[(i, i)] = sf + sn;
            for j in i + 1..n {
                let r2: f64 = self.sq[p * dim..(p + 1) * dim].iter().zip(&inv_l2).map(|(s, w)| s * w).sum();
                let r = r2.sqrt();
                let e = (-SQRT5 * r).exp();
                let kv = sf * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * e;
                k[(i, j)] = kv;
                k[(j, i)] = kv;
                kvals.push(kv);
                dfac.push(sf * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e);
                p += 1;
            }
        }
        let (l, linv) = cholesky_inverse_with_jitter(&k, sf, &FIT_JITTERS).ok()?;
        let kinv = inverse_from_inverse_factor(&linv);
        let alpha = &kinv * &self.y;
        let logdet_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        let lml = -0.5 * self.y.dot(&alpha) - logdet_half - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        // M = αα^T - K^{-1}; gradient = ½ tr(M dK)
        let mut grad = vec![0.0; dim + 2];
        let mut diag_m = 0.0;
        for i in 0..n {
            diag_m += alpha[i] * alpha[i] - kinv[(i, i)];
        }
        let mut off_k = 0.0;
        p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let m = alpha[i] * alpha[j] - kinv[(i, j)];
                off_k += m * kvals[p];
                let w = m * dfac[p];
                let sqp = &self.sq[p * dim..(p + 1) * dim];
                for d in 0..dim {
                    grad[d] += w * sqp[d] * inv_l2[d];
                }
                p += 1;
            }
        }
        grad[dim] = 0.5 * diag_m * sf + off_k;
        grad[dim + 1] = 0.5 * diag_m * sn;
        if !lml.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some((lml, grad))
    }
}

/// Log marginal likelihood of standardized targets `y` and its gradient with
/// respect to `[ln ℓ_1 .. ln ℓ_D, ln σ_f², ln σ_n²]`.
pub fn log_marginal_likelihood(points: &[Vec<f64>], y: &[f64], hp: &GpHyperparams) -> Result<(f64, Vec<f64>)> {
    if points.len() < 2 {
        return Err(Error::Config("marginal likelihood needs at least 2 points".into()));
    }
    MllProblem::new(points, y)
        .eval(&hp.to_log())
        .ok_or(Error::ModelFit { jitter: FIT_JITTERS[FIT_JITTERS.len() - 1] * hp.signal_variance })
}

/// Posterior mean/variance and their spatial gradients at a batch of points.
#[derive(Clone, Debug)]
pub struct PosteriorGrad {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub dmean: Vec<Vec<f64>>,
    pub dvar: Vec<Vec<f64>>,
}

/// A fitted Matérn-5/2 ARD posterior. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpModel {
    hp: GpHyperparams,
    points: Vec<Vec<f64>>,
    y: DVector<f64>,
    standardization: Standardization,
    l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    restart_log_posteriors: Vec<f64>,
}

impl GpModel {
    /// Builds the posterior for already standardized targets.
    pub fn from_standardized(
        points: Vec<Vec<f64>>,
        y: Vec<f64>,
        hp: GpHyperparams,
        standardization: Standardization,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != y.len() {
            return Err(Error::Config("GP needs a non-empty, consistent training set".into()));
        }
        if points[0].len() != hp.dim() {
            return Err(Error::Config(format!(
                "hyperparameters are {}-dimensional but data is {}-dimensional",
                hp.dim(),
                points[0].len()
            )));
        }
        let mut k = gram(&points, &points, &hp);
        for i in 0..k.nrows() {
            k[(i, i)] += hp.noise_variance;
        }
        let (l, jitter) =
            cholesky_with_jitter(&k, hp.signal_variance, &FIT_JITTERS).map_err(|jitter| Error::ModelFit { jitter })?;
        let y = DVector::from_vec(y);
        let mut alpha = y.clone();
        l.solve_lower_triangular_mut(&mut alpha);
        l.tr_solve_lower_triangular_mut(&mut alpha);
        Ok(Self { hp, points, y, standardization, l, alpha, jitter, restart_log_posteriors: Vec::new() })
    }

    /// Standardizes `data` and builds the posterior with fixed hyperparameters.
    pub fn with_hyperparams(data: &Dataset, hp: GpHyperparams) -> Result<Self> {
        let s = data.standardization();
        let y = data.values().iter().map(|&v| s.apply(v)).collect();
        Self::from_standardized(data.points().to_vec(), y, hp, s)
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn dim(&self) -> usize {
        self.hp.dim()
    }

    pub fn n_train(&self) -> usize {
        self.points.len()
    }

    pub fn train_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Standardized training targets.
    pub fn train_values(&self) -> &[f64] {
        self.y.as_slice()
    }

    /// Smallest standardized training target.
    pub fn f_ref(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lower Cholesky factor of `K + σ_n² I` (plus any jitter that was needed).
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    /// Log posterior reached by each MAP restart (empty for fixed hyperparameters).
    pub fn restart_log_posteriors(&self) -> &[f64] {
        &self.restart_log_posteriors
    }

    fn cross(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        gram(&self.points, points, &self.hp)
    }

    /// Posterior means and variances (variance clamped at zero).
    pub fn posterior(&self, points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        if points.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let mut v = self.cross(points);
        let mean = v.tr_mul(&self.alpha);
        self.l.solve_lower_triangular_mut(&mut v);
        let var = v
            .column_iter()
            .map(|c| (self.hp.signal_variance - c.norm_squared()).max(0.0))
            .collect();
        (mean.as_slice().to_vec(), var)
    }

    /// Posterior mean/variance plus gradients with respect to the input location.
    pub fn posterior_grad(&self, points: &[Vec<f64>]) -> PosteriorGrad {
        let dim = self.dim();
        let kstar = self.cross(points);
        let mean = kstar.tr_mul(&self.alpha);
        let mut v = kstar;
        self.l.solve_lower_triangular_mut(&mut v);
        let var: Vec<f64> = v
            .column_iter()
            .map(|c| (self.hp.signal_variance - c.norm_squared()).max(0.0))
            .collect();
        let mut w = v;
        self.l.tr_solve_lower_triangular_mut(&mut w);
        let inv_l2: Vec<f64> = self.hp.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let sf = self.hp.signal_variance;
        let mut dmean = vec![vec![0.0; dim]; points.len()];
        let mut dvar = vec![vec![0.0; dim]; points.len()];
        for (j, x) in points.iter().enumerate() {
            for (i, xi) in self.points.iter().enumerate() {
                let r = scaled_dist2(x, xi, &self.hp.lengthscales).sqrt();
                // dk/dx_d = -σ_f² (5/3)(1+√5 r) e^{-√5 r} (x_d - x_id)/ℓ_d²
                let g = -sf * 5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
                let (a, b) = (self.alpha[i], -2.0 * w[(i, j)]);
                for d in 0..dim {
                    let dk = g * (x[d] - xi[d]) * inv_l2[d];
                    dmean[j][d] += a * dk;
                    dvar[j][d] += b * dk;
                }
            }
        }
        PosteriorGrad { mean: mean.as_slice().to_vec(), var, dmean, dvar }
    }

    /// Joint posterior mean and covariance over `points`.
    pub fn posterior_cov(&self, points: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let kstar = self.cross(points);
        let mean = kstar.tr_mul(&self.alpha);
        let mut v = kstar;
        self.l.solve_lower_triangular_mut(&mut v);
        let mut cov = gram(points, points, &self.hp);
        cov -= v.transpose() * &v;
        (mean, cov)
    }

    /// Joint posterior draws over `points`: an `n_draws × |points|` matrix.
    pub fn sample_posterior(&self, points: &[Vec<f64>], n_draws: usize, seed: u64) -> Result<DMatrix<f64>> {
        if points.is_empty() || n_draws == 0 {
            return Err(Error::Config("sample_posterior needs at least one point and one draw".into()));
        }
        let (mean, cov) = self.posterior_cov(points);
        let factor = CorrelatedFactor::new(&cov, self.hp.signal_variance)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = points.len();
        let mut out = DMatrix::<f64>::zeros(n_draws, m);
        let mut z = vec![0.0; factor.rank_dim()];
        let mut draw = vec![0.0; m];
        for k in 0..n_draws {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            factor.apply(&z, &mut draw);
            for j in 0..m {
                out[(k, j)] = mean[j] + draw[j];
            }
        }
        Ok(out)
    }
}

/// Factorization `Σ = S C S` of a posterior covariance, with `S` the standard
/// deviations and `C` the correlation of the non-degenerate coordinates.
///
/// Coordinates whose variance is below `1e-12·σ_f²` are sampled as point masses.
#[derive(Clone, Debug)]
pub(crate) struct CorrelatedFactor {
    sd: Vec<f64>,
    active: Vec<usize>,
    l: DMatrix<f64>,
}

impl CorrelatedFactor {
    pub(crate) fn new(cov: &DMatrix<f64>, signal_variance: f64) -> Result<Self> {
        let m = cov.nrows();
        let sd: Vec<f64> = (0..m).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        let active: Vec<usize> = (0..m).filter(|&i| cov[(i, i)] > DETERMINISTIC_VAR * signal_variance).collect();
        let corr = DMatrix::from_fn(active.len(), active.len(), |a, b| {
            let (i, j) = (active[a], active[b]);
            if a == b { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) }
        });
        let (l, _) =
            cholesky_with_jitter(&corr, 1.0, &SAMPLE_JITTERS).map_err(|jitter| Error::Sampling { jitter })?;
        Ok(Self { sd, active, l })
    }

    /// Number of standard-normal inputs one draw consumes.
    pub(crate) fn rank_dim(&self) -> usize {
        self.active.len()
    }

    /// Writes the zero-mean correlated deviation for standard-normal `z` into `out`.
    pub(crate) fn apply(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.active.len();
        for a in 0..n {
            let mut s = 0.0;
            for b in 0..=a {
                s += self.l[(a, b)] * z[b];
            }
            let i = self.active[a];
            out[i] = self.sd[i] * s;
        }
    }
}

fn prior_start_box(prior: &HyperPrior, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dim = lo.len() - 2;
    let (loc, scale) = prior.locs_scales(dim);
    let center: Vec<f64> = loc.iter().zip(lo.iter().zip(hi)).map(|(m, (a, b))| m.clamp(*a, *b)).collect();
    let slo = loc.iter().zip(&scale).zip(lo).map(|((m, s), a)| (m - 2.0 * s).max(*a)).collect();
    let shi = loc.iter().zip(&scale).zip(hi).map(|((m, s), b)| (m + 2.0 * s).min(*b)).collect();
    (center, slo, shi)
}

/// MAP hyperparameter fit by multi-start bounded quasi-Newton ascent in log space.
///
/// Starts: the optional warm start, the prior location, then `n_restarts - 1`
/// scrambled Sobol points in the prior's ±2σ box (intersected with the bounds).
pub fn fit_map(data: &Dataset, cfg: &FitConfig) -> Result<GpModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Config("MAP fitting needs at least 2 points; use fixed hyperparameters".into()));
    }
    let dim = data.dim().unwrap_or(0);
    let s = data.standardization();
    let y: Vec<f64> = data.values().iter().map(|&v| s.apply(v)).collect();
    let problem = MllProblem::new(data.points(), &y);
    let (lo, hi) = cfg.bounds.log_box(dim);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(ws) = &cfg.warm_start {
        if ws.dim() == dim {
            starts.push(ws.to_log().iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect());
        }
    }
    let (center, slo, shi) = prior_start_box(&cfg.prior, &lo, &hi);
    if cfg.n_restarts >= 1 {
        starts.push(center);
    }
    if cfg.n_restarts >= 2 {
        for u in sobol_points(cfg.n_restarts - 1, dim + 2, cfg.seed)? {
            starts.push(u.iter().enumerate().map(|(i, u)| slo[i] + u * (shi[i] - slo[i])).collect());
        }
    }
    if starts.is_empty() {
        return Err(Error::Config("fit needs at least one start".into()));
    }

    let objective = |theta: &[f64]| -> (f64, Vec<f64>) {
        match problem.eval(theta) {
            Some((lml, g)) => {
                let (lp, gp) = cfg.prior.log_density(theta);
                (-(lml + lp), g.iter().zip(&gp).map(|(a, b)| -(a + b)).collect())
            }
            None => (f64::INFINITY, vec![0.0; theta.len()]),
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut values = Vec::with_capacity(starts.len());
    for start in &starts {
        let r = minimize_bounded(objective, start, &lo, &hi, &cfg.lbfgs);
        values.push(-r.f);
        if r.f.is_finite() && best.as_ref().map_or(true, |(_, b)| r.f < *b) {
            best = Some((r.x, r.f));
        }
    }
    let (theta, _) = best.ok_or(Error::ModelFit { jitter: FIT_JITTERS[FIT_JITTERS.len() - 1] })?;
    let mut model = GpModel::from_standardized(data.points().to_vec(), y, GpHyperparams::from_log(&theta), s)?;
    model.restart_log_posteriors = values;
    Ok(model)
}

/// Log posterior (marginal likelihood plus prior) at `hp`, for diagnostics.
pub fn log_posterior(data: &Dataset, hp: &GpHyperparams, prior: &HyperPrior) -> Result<f64> {
    let s = data.standardization();
    let y: Vec<f64> = data.values().iter().map(|&v| s.apply(v)).collect();
    let (lml, _) = log_marginal_likelihood(data.points(), &y, hp)?;
    Ok(lml + prior.log_density(&hp.to_log()).0)
}
