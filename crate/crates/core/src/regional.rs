//! Region-averaged acquisition functions.
//!
//! A candidate trust region around center `x` with side lengths `l_d` is the
//! clipped box `∏_d [max(x_d - l_d/2, 0), min(x_d + l_d/2, 1)]`. Acquisitions
//! are averaged over `N_x` scrambled Sobol points mapped affinely into that
//! box. The Sobol points and (for qREI) the standard-normal base samples are
//! fixed by seed, so every acquisition here is a deterministic function of
//! the center(s) and can be handed to a gradient-based maximizer.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acquisition::{ei, log_ei_grad, norm_cdf, norm_pdf, ucb_min};
use crate::error::{Error, Result};
use crate::gp::{gram, CorrelatedFactor, GpModel};
use crate::inner_opt::SmoothObjective;
use crate::problem::sobol_points;

/// Center and per-dimension side lengths of a (candidate) trust region.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGeometry {
    pub center: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl RegionGeometry {
    pub fn new(center: Vec<f64>, lengths: Vec<f64>) -> Self {
        Self { center, lengths }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Clipped per-dimension intervals `(lower, upper)` of a region.
pub fn region_bounds(geom: &RegionGeometry) -> (Vec<f64>, Vec<f64>) {
    geom.center
        .iter()
        .zip(&geom.lengths)
        .map(|(c, l)| ((c - l / 2.0).max(0.0), (c + l / 2.0).min(1.0)))
        .unzip()
}

/// Which pointwise acquisition is averaged over the region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionalBase {
    /// Region-averaged EI (REI).
    Ei,
    /// Log of region-averaged EI, computed as a log-mean-exp of LogEI values.
    LogEi,
    /// Region-averaged `-μ + √β σ`.
    Ucb { beta: f64 },
    /// Monte-Carlo improvement of posterior draws (qREI).
    QImprovement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionalAcqSpec {
    pub base: RegionalBase,
    pub n_x: usize,
    pub n_f: usize,
    /// Number of regions scored jointly.
    pub q: usize,
    pub base_sample_seed: u64,
}

impl Default for RegionalAcqSpec {
    fn default() -> Self {
        Self { base: RegionalBase::QImprovement, n_x: 128, n_f: 256, q: 1, base_sample_seed: 0 }
    }
}

impl RegionalAcqSpec {
    fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.q == 0 || (self.base == RegionalBase::QImprovement && self.n_f == 0) {
            return Err(Error::Config("regional acquisition needs N_x >= 1, q >= 1 and N_f >= 1".into()));
        }
        Ok(())
    }
}

fn normal_base_samples(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e_0f_c0ffee);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn map_into(unit: &[Vec<f64>], lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    unit.iter()
        .map(|u| u.iter().enumerate().map(|(d, &v)| (lo[d] + v * (hi[d] - lo[d])).clamp(lo[d], hi[d])).collect())
        .collect()
}

/// Region-averaged acquisition over a single region (`q = 1`), as a function of its center.
///
/// Implements [`SmoothObjective`] with a pathwise gradient through the clipped
/// affine map from the fixed Sobol points into the region.
pub struct RegionalObjective<'a> {
    model: &'a GpModel,
    lengths: Vec<f64>,
    f_ref: f64,
    base: RegionalBase,
    n_f: usize,
    unit_points: Vec<Vec<f64>>,
    normals: Vec<f64>,
}

impl<'a> RegionalObjective<'a> {
    pub fn new(model: &'a GpModel, lengths: Vec<f64>, f_ref: f64, spec: &RegionalAcqSpec) -> Result<Self> {
        spec.validate()?;
        if lengths.len() != model.dim() {
            return Err(Error::Config("region lengths do not match the model dimension".into()));
        }
        let unit_points = sobol_points(spec.n_x, model.dim(), spec.base_sample_seed)?;
        let normals = if spec.base == RegionalBase::QImprovement {
            normal_base_samples(spec.n_x * spec.n_f, spec.base_sample_seed)
        } else {
            Vec::new()
        };
        Ok(Self { model, lengths, f_ref, base: spec.base, n_f: spec.n_f, unit_points, normals })
    }

    fn points_for(&self, center: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let geom = RegionGeometry::new(center.to_vec(), self.lengths.clone());
        let (lo, hi) = region_bounds(&geom);
        let pts = map_into(&self.unit_points, &lo, &hi);
        // d x_jd / d c_d: each clipped end is frozen
        let lo_free: Vec<bool> = center.iter().zip(&self.lengths).map(|(c, l)| c - l / 2.0 > 0.0).collect();
        let hi_free: Vec<bool> = center.iter().zip(&self.lengths).map(|(c, l)| c + l / 2.0 < 1.0).collect();
        let jac = self
            .unit_points
            .iter()
            .map(|u| {
                u.iter()
                    .enumerate()
                    .map(|(d, &v)| {
                        (if lo_free[d] { 1.0 - v } else { 0.0 }) + (if hi_free[d] { v } else { 0.0 })
                    })
                    .collect()
            })
            .collect();
        (pts, jac)
    }

    /// Per-point values plus `(∂v/∂μ, ∂v/∂σ)` partials, reduced into the regional value.
    fn reduce(&self, mean: &[f64], var: &[f64]) -> (f64, Vec<(f64, f64)>) {
        let n = mean.len() as f64;
        match self.base {
            RegionalBase::Ei => {
                let mut total = 0.0;
                let partials = mean
                    .iter()
                    .zip(var)
                    .map(|(&m, &v)| {
                        total += ei(m, v, self.f_ref);
                        let s = v.sqrt();
                        if s > 0.0 {
                            let z = (self.f_ref - m) / s;
                            (-norm_cdf(z) / n, norm_pdf(z) / n)
                        } else {
                            (if m < self.f_ref { -1.0 / n } else { 0.0 }, 0.0)
                        }
                    })
                    .collect();
                (total / n, partials)
            }
            RegionalBase::LogEi => {
                let logs: Vec<_> = mean.iter().zip(var).map(|(&m, &v)| log_ei_grad(m, v, self.f_ref)).collect();
                let top = logs.iter().map(|l| l.value).fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    return (f64::NEG_INFINITY, vec![(0.0, 0.0); logs.len()]);
                }
                let weights: Vec<f64> = logs.iter().map(|l| (l.value - top).exp()).collect();
                let sum: f64 = weights.iter().sum();
                let value = top + (sum / n).ln();
                let partials =
                    logs.iter().zip(&weights).map(|(l, w)| (w / sum * l.d_mean, w / sum * l.d_sigma)).collect();
                (value, partials)
            }
            RegionalBase::Ucb { beta } => {
                let total: f64 = mean.iter().zip(var).map(|(&m, &v)| ucb_min(m, v, beta)).sum();
                (total / n, vec![(-1.0 / n, beta.sqrt() / n); mean.len()])
            }
            RegionalBase::QImprovement => {
                let scale = 1.0 / (n * self.n_f as f64);
                let mut total = 0.0;
                let partials = mean
                    .iter()
                    .zip(var)
                    .enumerate()
                    .map(|(j, (&m, &v))| {
                        let s = v.sqrt();
                        let (mut hits, mut zsum) = (0.0, 0.0);
                        for &z in &self.normals[j * self.n_f..(j + 1) * self.n_f] {
                            let imp = self.f_ref - (m + s * z);
                            if imp > 0.0 {
                                total += imp;
                                hits += 1.0;
                                zsum += z;
                            }
                        }
                        (-hits * scale, -zsum * scale)
                    })
                    .collect();
                (total * scale, partials)
            }
        }
    }
}

impl SmoothObjective for RegionalObjective<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, center: &[f64]) -> f64 {
        let (pts, _) = self.points_for(center);
        let (mean, var) = self.model.posterior(&pts);
        self.reduce(&mean, &var).0
    }

    fn value_grad(&self, center: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (pts, jac) = self.points_for(center);
        let pg = self.model.posterior_grad(&pts);
        let (value, partials) = self.reduce(&pg.mean, &pg.var);
        let dim = center.len();
        let mut grad = vec![0.0; dim];
        for (j, (dmu, dsig)) in partials.iter().enumerate() {
            let s = pg.var[j].sqrt();
            for d in 0..dim {
                let dsigma = if s > 0.0 { pg.dvar[j][d] / (2.0 * s) } else { 0.0 };
                grad[d] += (dmu * pg.dmean[j][d] + dsig * dsigma) * jac[j][d];
            }
        }
        Some((value, grad))
    }
}

/// Pointwise LogEI as a maximization objective over locations.
pub struct PointwiseLogEi<'a> {
    pub model: &'a GpModel,
    pub f_ref: f64,
}

impl SmoothObjective for PointwiseLogEi<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (m, v) = self.model.posterior(&[x.to_vec()]);
        log_ei_grad(m[0], v[0], self.f_ref).value
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let pg = self.model.posterior_grad(&[x.to_vec()]);
        let l = log_ei_grad(pg.mean[0], pg.var[0], self.f_ref);
        let s = pg.var[0].sqrt();
        let g = (0..x.len())
            .map(|d| {
                let ds = if s > 0.0 { pg.dvar[0][d] / (2.0 * s) } else { 0.0 };
                l.d_mean * pg.dmean[0][d] + l.d_sigma * ds
            })
            .collect();
        Some((l.value, g))
    }
}

/// Regional expected improvement: mean EI over `n_x` Sobol points in the region.
pub fn rei(model: &GpModel, geom: &RegionGeometry, f_ref: f64, n_x: usize, seed: u64) -> Result<f64> {
    let spec = RegionalAcqSpec { base: RegionalBase::Ei, n_x, base_sample_seed: seed, ..Default::default() };
    Ok(RegionalObjective::new(model, geom.lengths.clone(), f_ref, &spec)?.value(&geom.center))
}

/// Log of the region-averaged EI, via a log-mean-exp of LogEI values.
pub fn log_rei(model: &GpModel, geom: &RegionGeometry, f_ref: f64, n_x: usize, seed: u64) -> Result<f64> {
    let spec = RegionalAcqSpec { base: RegionalBase::LogEi, n_x, base_sample_seed: seed, ..Default::default() };
    Ok(RegionalObjective::new(model, geom.lengths.clone(), f_ref, &spec)?.value(&geom.center))
}

/// Region-averaged minimization UCB.
pub fn rucb(model: &GpModel, geom: &RegionGeometry, beta: f64, n_x: usize, seed: u64) -> Result<f64> {
    let spec = RegionalAcqSpec { base: RegionalBase::Ucb { beta }, n_x, base_sample_seed: seed, ..Default::default() };
    Ok(RegionalObjective::new(model, geom.lengths.clone(), 0.0, &spec)?.value(&geom.center))
}

/// Joint qREI of `q` regions sharing the same Sobol points and base samples.
///
/// For every Sobol index `j` the `q` mapped points (one per region) are drawn
/// jointly from the posterior and the improvement uses their minimum.
pub struct JointRegionalObjective<'a> {
    model: &'a GpModel,
    lengths: Vec<Vec<f64>>,
    f_ref: f64,
    n_f: usize,
    unit_points: Vec<Vec<f64>>,
    normals: Vec<f64>,
}

impl<'a> JointRegionalObjective<'a> {
    pub fn new(model: &'a GpModel, lengths: Vec<Vec<f64>>, f_ref: f64, spec: &RegionalAcqSpec) -> Result<Self> {
        spec.validate()?;
        if lengths.is_empty() || lengths.iter().any(|l| l.len() != model.dim()) {
            return Err(Error::Config("joint qREI needs q >= 1 regions of the model dimension".into()));
        }
        let q = lengths.len();
        let unit_points = sobol_points(spec.n_x, model.dim(), spec.base_sample_seed)?;
        let normals = normal_base_samples(spec.n_x * spec.n_f * q, spec.base_sample_seed);
        Ok(Self { model, lengths, f_ref, n_f: spec.n_f, unit_points, normals })
    }

    pub fn q(&self) -> usize {
        self.lengths.len()
    }

    /// Score for `q` centers given as one concatenated vector of length `q·D`.
    pub fn evaluate(&self, centers: &[f64]) -> Result<f64> {
        let dim = self.model.dim();
        let q = self.q();
        let n_x = self.unit_points.len();
        // all q·N_x points, region-major
        let mut pts = Vec::with_capacity(q * n_x);
        for r in 0..q {
            let geom = RegionGeometry::new(centers[r * dim..(r + 1) * dim].to_vec(), self.lengths[r].clone());
            let (lo, hi) = region_bounds(&geom);
            pts.extend(map_into(&self.unit_points, &lo, &hi));
        }
        let hp = self.model.hyperparams();
        let mut v = gram(self.model.train_points(), &pts, hp);
        let mean = v.tr_mul(&nalgebra::DVector::from_column_slice(self.model.alpha()));
        self.model.cholesky_factor().solve_lower_triangular_mut(&mut v);

        let mut total = 0.0;
        let mut z = vec![0.0; q];
        let mut dev = vec![0.0; q];
        for j in 0..n_x {
            let idx: Vec<usize> = (0..q).map(|r| r * n_x + j).collect();
            let cov = DMatrix::from_fn(q, q, |a, b| {
                let (ia, ib) = (idx[a], idx[b]);
                crate::gp::kernel(&pts[ia], &pts[ib], hp) - v.column(ia).dot(&v.column(ib))
            });
            let factor = CorrelatedFactor::new(&cov, hp.signal_variance)?;
            let k_active = factor.rank_dim();
            for k in 0..self.n_f {
                let off = (j * self.n_f + k) * q;
                z[..k_active].copy_from_slice(&self.normals[off..off + k_active]);
                factor.apply(&z[..k_active], &mut dev);
                let best = (0..q).map(|r| mean[idx[r]] + dev[r]).fold(f64::INFINITY, f64::min);
                total += (self.f_ref - best).max(0.0);
            }
        }
        Ok(total / (n_x * self.n_f) as f64)
    }
}

impl SmoothObjective for JointRegionalObjective<'_> {
    fn dim(&self) -> usize {
        self.model.dim() * self.q()
    }

    fn value(&self, centers: &[f64]) -> f64 {
        self.evaluate(centers).unwrap_or(f64::NEG_INFINITY)
    }
}

/// qREI of one or more regions (joint scoring when `geoms.len() > 1`).
pub fn qrei(model: &GpModel, geoms: &[RegionGeometry], f_ref: f64, spec: &RegionalAcqSpec) -> Result<f64> {
    let spec = RegionalAcqSpec { base: RegionalBase::QImprovement, q: geoms.len(), ..spec.clone() };
    match geoms {
        [] => Err(Error::Config("qrei needs at least one region".into())),
        [g] => Ok(RegionalObjective::new(model, g.lengths.clone(), f_ref, &spec)?.value(&g.center)),
        _ => {
            let obj = JointRegionalObjective::new(model, geoms.iter().map(|g| g.lengths.clone()).collect(), f_ref, &spec)?;
            let centers: Vec<f64> = geoms.iter().flat_map(|g| g.center.iter().copied()).collect();
            obj.evaluate(&centers)
        }
    }
}
