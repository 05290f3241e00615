//! Choosing where a fresh trust region goes, by maximizing a region-averaged
//! acquisition of a global GP over candidate centers.

use log::warn;

use crate::error::{Error, Result};
use crate::gp::{fit_map, FitConfig, GpModel};
use crate::inner_opt::maximize_smooth;
use crate::problem::{sobol_in_box, sobol_points, Dataset, ObjectiveFn};
use crate::regional::{region_bounds, PointwiseLogEi, JointRegionalObjective, RegionGeometry, RegionalBase, RegionalObjective};
use crate::subset::reduce_dataset;
use crate::turbo::{per_dim_lengths, TurboConfig};

/// Acquisition scored over candidate regions when placing a new trust region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionAcq {
    Qrei,
    LogRei,
    Rucb { beta: f64 },
    /// Pointwise LogEI at the center (no region averaging).
    LogEi,
}

impl SelectionAcq {
    fn base(self) -> Option<RegionalBase> {
        match self {
            SelectionAcq::Qrei => Some(RegionalBase::QImprovement),
            SelectionAcq::LogRei => Some(RegionalBase::LogEi),
            SelectionAcq::Rucb { beta } => Some(RegionalBase::Ucb { beta }),
            SelectionAcq::LogEi => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    /// Selected center (the acquisition maximizer).
    pub center: Vec<f64>,
    /// Per-dimension side lengths of the selected region.
    pub lengths: Vec<f64>,
    /// Center plus interior points, evaluated.
    pub initial_samples: Dataset,
    /// Acquisition value at the center; `None` for random placement.
    pub score: Option<f64>,
}

fn evaluate_all(objective: &ObjectiveFn, points: Vec<Vec<f64>>) -> Result<Dataset> {
    let mut ds = Dataset::new();
    for p in points {
        let v = objective.evaluate(&p);
        if !v.is_finite() {
            return Err(Error::Evaluation { eval_index: 0, message: format!("non-finite objective value {v}") });
        }
        ds.push(p, v);
    }
    Ok(ds)
}

/// `n_points` low-discrepancy points over the unit cube, evaluated; the best one is the center.
pub fn random_initialization(objective: &ObjectiveFn, n_points: usize, seed: u64) -> Result<SelectionResult> {
    let dim = objective.dim();
    let pts = sobol_points(n_points, dim, seed)?;
    let ds = evaluate_all(objective, pts)?;
    let center = ds.best().map(|(i, _)| ds.points()[i].clone()).unwrap_or_else(|| vec![0.5; dim]);
    Ok(SelectionResult { center, lengths: vec![1.0; dim], initial_samples: ds, score: None })
}

fn global_model(global: &Dataset, cfg: &TurboConfig, seed: u64) -> Result<GpModel> {
    let data = reduce_dataset(global, cfg.n_gp);
    fit_map(&data, &FitConfig { seed, ..cfg.fit.clone() })
}

fn selection_lengths(model: &GpModel, cfg: &TurboConfig) -> Vec<f64> {
    if cfg.shape_selection_lengths {
        per_dim_lengths(cfg.l_init, &model.hyperparams().lengthscales, cfg.l_max)
    } else {
        vec![cfg.l_init; model.dim()]
    }
}

fn samples_in_region(
    objective: &ObjectiveFn,
    center: &[f64],
    lengths: &[f64],
    n_points: usize,
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = region_bounds(&RegionGeometry::new(center.to_vec(), lengths.to_vec()));
    let mut pts = vec![center.to_vec()];
    if n_points > 1 {
        pts.extend(sobol_in_box(n_points - 1, &lo, &hi, seed)?);
    }
    pts.truncate(n_points);
    evaluate_all(objective, pts)
}

fn best_center(model: &GpModel, lengths: &[f64], cfg: &TurboConfig, seed: u64) -> Result<(Vec<f64>, f64)> {
    let dim = model.dim();
    let (lo, hi) = (vec![0.0; dim], vec![1.0; dim]);
    let f_ref = model.f_ref();
    match cfg.selection_acq.base() {
        Some(base) => {
            let spec = crate::regional::RegionalAcqSpec { base, q: 1, base_sample_seed: seed, ..cfg.regional.clone() };
            let obj = RegionalObjective::new(model, lengths.to_vec(), f_ref, &spec)?;
            maximize_smooth(&obj, &lo, &hi, &cfg.inner, seed)
        }
        None => maximize_smooth(&PointwiseLogEi { model, f_ref }, &lo, &hi, &cfg.inner, seed),
    }
}

/// Places one new trust region and evaluates `n_points` samples inside it.
///
/// With empty `global` data this is random initialization over the whole cube.
/// If the global GP cannot be fitted, random placement is used instead.
pub fn select_trust_region(
    global: &Dataset,
    objective: &ObjectiveFn,
    cfg: &TurboConfig,
    n_points: usize,
    seed: u64,
) -> Result<SelectionResult> {
    if global.is_empty() {
        return random_initialization(objective, n_points, seed);
    }
    let model = match global_model(global, cfg, seed) {
        Ok(m) => m,
        Err(e) => {
            warn!("global GP fit failed ({e}); placing the region at random");
            return random_initialization(objective, n_points, seed);
        }
    };
    let lengths = selection_lengths(&model, cfg);
    let (center, score) = best_center(&model, &lengths, cfg, seed)?;
    let initial_samples = samples_in_region(objective, &center, &lengths, n_points, seed)?;
    Ok(SelectionResult { center, lengths, initial_samples, score: Some(score) })
}

/// Places `m` regions at once by maximizing the joint qREI of their centers.
pub fn select_trust_regions_joint(
    global: &Dataset,
    objective: &ObjectiveFn,
    cfg: &TurboConfig,
    m: usize,
    n_points: usize,
    seed: u64,
) -> Result<Vec<SelectionResult>> {
    if m <= 1 {
        return Ok(vec![select_trust_region(global, objective, cfg, n_points, seed)?]);
    }
    if global.is_empty() {
        return (0..m)
            .map(|r| random_initialization(objective, n_points, seed.wrapping_add(r as u64)))
            .collect();
    }
    let model = match global_model(global, cfg, seed) {
        Ok(m) => m,
        Err(e) => {
            warn!("global GP fit failed ({e}); placing regions at random");
            return (0..m)
                .map(|r| random_initialization(objective, n_points, seed.wrapping_add(r as u64)))
                .collect();
        }
    };
    let dim = model.dim();
    let lengths = selection_lengths(&model, cfg);
    let spec = crate::regional::RegionalAcqSpec {
        base: RegionalBase::QImprovement,
        q: m,
        base_sample_seed: seed,
        ..cfg.regional.clone()
    };
    let obj = JointRegionalObjective::new(&model, vec![lengths.clone(); m], model.f_ref(), &spec)?;
    let (centers, score) = maximize_smooth(&obj, &vec![0.0; dim * m], &vec![1.0; dim * m], &cfg.inner, seed)?;
    (0..m)
        .map(|r| {
            let center = centers[r * dim..(r + 1) * dim].to_vec();
            let initial_samples =
                samples_in_region(objective, &center, &lengths, n_points, seed.wrapping_add(r as u64 + 1))?;
            Ok(SelectionResult { center, lengths: lengths.clone(), initial_samples, score: Some(score) })
        })
        .collect()
}
