//! Trust-region Bayesian optimization (TuRBO-1 and TuRBO-m) with optional
//! region-averaged placement of new trust regions.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::gp::{fit_map, FitConfig, GpHyperparams, GpModel};
use crate::inner_opt::{default_ts_candidates, maximize_smooth, ts_batch_argmin, MultiStartConfig};
use crate::problem::{Dataset, ObjectiveFn};
use crate::region_select::{
    random_initialization, select_trust_region, select_trust_regions_joint, SelectionAcq, SelectionResult,
};
use crate::regional::{region_bounds, PointwiseLogEi, RegionGeometry, RegionalAcqSpec};
use crate::subset::{reduce_dataset, DEFAULT_N_GP};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquisition {
    LogEi,
    Ts,
}

/// How trust regions are placed at the start and after a collapse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Random initialization every time.
    Random,
    /// Region-averaged selection for the first region(s) and for restarts.
    InitAndRestart,
    /// Random first region(s), region-averaged selection on restart.
    RestartOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventTag {
    Init,
    Local,
    RestartSelect,
    RestartInit,
}

impl EventTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EventTag::Init => "init",
            EventTag::Local => "local",
            EventTag::RestartSelect => "restart-select",
            EventTag::RestartInit => "restart-init",
        }
    }
}

impl fmt::Display for EventTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "init" => EventTag::Init,
            "local" => EventTag::Local,
            "restart-select" => EventTag::RestartSelect,
            "restart-init" => EventTag::RestartInit,
            other => return Err(Error::Config(format!("unknown event tag '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionStatus {
    Active,
    Collapsed,
}

#[derive(Clone, Debug)]
pub struct TrustRegion {
    pub center: Vec<f64>,
    /// Base side length before per-dimension shaping.
    pub length: f64,
    pub success_count: usize,
    pub failure_count: usize,
    pub status: RegionStatus,
    /// Samples gathered since this region was created.
    pub local_data: Dataset,
}

impl TrustRegion {
    /// Region centered on the best point of `local_data`.
    pub fn new(local_data: Dataset, length: f64) -> Self {
        let center = local_data.best().map(|(i, _)| local_data.points()[i].clone()).unwrap_or_default();
        Self { center, length, success_count: 0, failure_count: 0, status: RegionStatus::Active, local_data }
    }
}

#[derive(Clone, Debug)]
pub struct TurboConfig {
    pub l_init: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub tau_succ: usize,
    /// Failure tolerance; `None` means the problem dimension.
    pub tau_fail: Option<usize>,
    pub n_init: usize,
    pub budget: usize,
    pub batch: usize,
    pub acquisition: Acquisition,
    pub selection: SelectionMode,
    pub selection_acq: SelectionAcq,
    /// Shape selection-time region lengths by the global model's lengthscales.
    pub shape_selection_lengths: bool,
    /// Search the whole cube with a fixed region (plain GP-BO).
    pub global_search: bool,
    /// Cap on GP training-set size.
    pub n_gp: usize,
    pub regional: RegionalAcqSpec,
    pub inner: MultiStartConfig,
    /// Hyperparameter fitting for fresh models (global selection and first fit in a region).
    pub fit: FitConfig,
    /// Extra restarts for warm-started refits inside the loop.
    pub loop_fit_restarts: usize,
    /// Every this many refits in a region, add the prior-centre start to the warm start.
    pub loop_full_refit_every: usize,
    pub loop_fit_max_iters: usize,
    /// Thompson-sampling candidate count; `None` uses the dimension-dependent default.
    pub ts_candidates: Option<usize>,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            l_init: 0.8,
            l_min: 0.5f64.powi(7),
            l_max: 1.6,
            tau_succ: 10,
            tau_fail: None,
            n_init: 30,
            budget: 200,
            batch: 1,
            acquisition: Acquisition::LogEi,
            selection: SelectionMode::Random,
            selection_acq: SelectionAcq::Qrei,
            shape_selection_lengths: true,
            global_search: false,
            n_gp: DEFAULT_N_GP,
            regional: RegionalAcqSpec::default(),
            inner: MultiStartConfig::default(),
            fit: FitConfig::default(),
            loop_fit_restarts: 0,
            loop_full_refit_every: 20,
            loop_fit_max_iters: 50,
            ts_candidates: None,
        }
    }
}

impl TurboConfig {
    pub fn tau_fail_for(&self, dim: usize) -> usize {
        self.tau_fail.unwrap_or(dim).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.l_min > 0.0 && self.l_min < self.l_init && self.l_init <= self.l_max) {
            return bad("trust-region lengths must satisfy 0 < l_min < l_init <= l_max");
        }
        if self.n_init == 0 || self.batch == 0 || self.tau_succ == 0 {
            return bad("n_init, batch and tau_succ must be positive");
        }
        if self.budget < self.n_init {
            return bad("budget must be at least n_init");
        }
        if self.batch > 1 && self.acquisition != Acquisition::Ts {
            return bad("batches larger than one require Thompson sampling");
        }
        if self.n_gp == 0 {
            return bad("n_gp must be positive");
        }
        Ok(())
    }
}

/// Counter and length update after evaluating `point` with value `value`.
///
/// `prev_best` is the best value in the region's data before the new point.
pub fn update_trust_region(tr: &mut TrustRegion, point: &[f64], value: f64, prev_best: f64, cfg: &TurboConfig) {
    if tr.status == RegionStatus::Collapsed {
        return;
    }
    if value < prev_best {
        tr.success_count += 1;
        tr.failure_count = 0;
        tr.center = point.to_vec();
    } else {
        tr.failure_count += 1;
        tr.success_count = 0;
    }
    if tr.success_count == cfg.tau_succ {
        tr.length = (2.0 * tr.length).min(cfg.l_max);
        tr.success_count = 0;
    } else if tr.failure_count == cfg.tau_fail_for(point.len()) {
        tr.length /= 2.0;
        tr.failure_count = 0;
    }
    if tr.length < cfg.l_min {
        tr.status = RegionStatus::Collapsed;
    }
}

/// Per-dimension side lengths `l·s_d / geomean(s)`, each capped at `l_max`.
pub fn per_dim_lengths(l: f64, lengthscales: &[f64], l_max: f64) -> Vec<f64> {
    let log_mean = lengthscales.iter().map(|s| s.ln()).sum::<f64>() / lengthscales.len() as f64;
    lengthscales.iter().map(|s| (l * (s.ln() - log_mean).exp()).min(l_max)).collect()
}

/// One evaluation of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// 1-based evaluation counter.
    pub eval_index: usize,
    /// Location in unit-cube coordinates.
    pub point: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
    /// Trust region the sample belongs to; `None` for global initial samples.
    pub region_id: Option<usize>,
    pub event: EventTag,
}

/// Records of a run plus the error that stopped it early, if any.
#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub error: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<Vec<RunRecord>> {
        match self.error {
            None => Ok(self.records),
            Some(e) => Err(e),
        }
    }
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct RegionSlot {
    tr: TrustRegion,
    hyper: Option<GpHyperparams>,
    fits: usize,
}

struct Engine<'a> {
    objective: &'a ObjectiveFn,
    cfg: &'a TurboConfig,
    seed: u64,
    global: Dataset,
    records: Vec<RunRecord>,
    best: f64,
    steps: u64,
}

impl Engine<'_> {
    fn remaining(&self) -> usize {
        self.cfg.budget - self.global.len()
    }

    fn record(&mut self, point: Vec<f64>, value: f64, region_id: Option<usize>, event: EventTag) {
        self.best = self.best.min(value);
        self.global.push(point.clone(), value);
        self.records.push(RunRecord {
            seed: self.seed,
            eval_index: self.records.len() + 1,
            point,
            value,
            best_so_far: self.best,
            region_id,
            event,
        });
    }

    fn record_selection(&mut self, sel: &SelectionResult, region_id: Option<usize>, event: EventTag) {
        for (p, v) in sel.initial_samples.iter() {
            self.record(p.to_vec(), v, region_id, event);
        }
    }

    fn evaluate(&self, point: &[f64]) -> Result<f64> {
        let v = self.objective.evaluate(point);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                eval_index: self.records.len() + 1,
                message: format!("objective returned {v}"),
            })
        }
    }

    fn new_slot(&self, data: Dataset) -> RegionSlot {
        let length = if self.cfg.global_search { 1.0 } else { self.cfg.l_init };
        RegionSlot { tr: TrustRegion::new(data, length), hyper: None, fits: 0 }
    }

    /// Initial regions for all `m` slots.
    fn start(&mut self, m: usize) -> Result<Vec<RegionSlot>> {
        let cfg = self.cfg;
        let mut slots = Vec::with_capacity(m);
        if cfg.selection == SelectionMode::InitAndRestart && !cfg.global_search {
            let n = cfg.n_init.min(self.remaining());
            let init = random_initialization(self.objective, n, mix_seed(self.seed, 1, 0))?;
            self.record_selection(&init, None, EventTag::Init);
            let n = cfg.n_init.min(self.remaining() / m);
            if n == 0 {
                return Ok(slots);
            }
            let sels = select_trust_regions_joint(&self.global, self.objective, cfg, m, n, mix_seed(self.seed, 2, 0))?;
            for (r, sel) in sels.into_iter().enumerate() {
                self.record_selection(&sel, Some(r), EventTag::RestartSelect);
                slots.push(self.new_slot(sel.initial_samples));
            }
        } else {
            for r in 0..m {
                let n = cfg.n_init.min(self.remaining());
                if n == 0 {
                    break;
                }
                let init = random_initialization(self.objective, n, mix_seed(self.seed, 1, r as u64))?;
                self.record_selection(&init, Some(r), EventTag::Init);
                slots.push(self.new_slot(init.initial_samples));
            }
        }
        Ok(slots)
    }

    fn restart(&mut self, r: usize, restart_no: u64) -> Result<RegionSlot> {
        let cfg = self.cfg;
        let n = cfg.n_init.min(self.remaining());
        let seed = mix_seed(self.seed, 3 + r as u64, restart_no);
        let (sel, tag) = if cfg.selection == SelectionMode::Random {
            (random_initialization(self.objective, n, seed)?, EventTag::RestartInit)
        } else {
            (select_trust_region(&self.global, self.objective, cfg, n, seed)?, EventTag::RestartSelect)
        };
        debug!("region {r} restarted at {:?}", sel.center);
        self.record_selection(&sel, Some(r), tag);
        Ok(self.new_slot(sel.initial_samples))
    }

    fn fit_local(&self, slot: &RegionSlot, step: u64) -> Result<GpModel> {
        let cfg = self.cfg;
        let data = if cfg.global_search { &self.global } else { &slot.tr.local_data };
        let data = reduce_dataset(data, cfg.n_gp);
        let seed = mix_seed(self.seed, 0xf17, step);
        if data.len() < 2 {
            let hp = slot.hyper.clone().unwrap_or_else(|| GpHyperparams::isotropic(self.objective.dim(), 0.5, 1.0, 1e-4));
            return GpModel::with_hyperparams(&data, hp);
        }
        let fit_cfg = match &slot.hyper {
            Some(hp) => FitConfig {
                n_restarts: if cfg.loop_full_refit_every > 0 && slot.fits % cfg.loop_full_refit_every == 0 {
                    cfg.loop_fit_restarts.max(1)
                } else {
                    cfg.loop_fit_restarts
                },
                seed,
                warm_start: Some(hp.clone()),
                lbfgs: crate::lbfgs::LbfgsConfig { max_iters: cfg.loop_fit_max_iters, ..cfg.fit.lbfgs },
                ..cfg.fit.clone()
            },
            None => FitConfig { seed, warm_start: None, ..cfg.fit.clone() },
        };
        match fit_map(&data, &fit_cfg) {
            Ok(m) => Ok(m),
            Err(e) => match &slot.hyper {
                Some(hp) => {
                    warn!("refit failed ({e}); reusing previous hyperparameters");
                    GpModel::with_hyperparams(&data, hp.clone())
                }
                None => Err(e),
            },
        }
    }

    /// Proposes, evaluates and absorbs one batch for region `r`.
    fn local_step(&mut self, slot: &mut RegionSlot, r: usize) -> Result<()> {
        let cfg = self.cfg;
        self.steps += 1;
        let step = self.steps;
        let model = self.fit_local(slot, step)?;
        slot.hyper = Some(model.hyperparams().clone());
        slot.fits += 1;
        let dim = model.dim();
        let (lo, hi) = if cfg.global_search {
            (vec![0.0; dim], vec![1.0; dim])
        } else {
            let lengths = per_dim_lengths(slot.tr.length, &model.hyperparams().lengthscales, cfg.l_max);
            region_bounds(&RegionGeometry::new(slot.tr.center.clone(), lengths))
        };
        let batch = cfg.batch.min(self.remaining());
        let seed = mix_seed(self.seed, 0xac9, step);
        let points = match cfg.acquisition {
            Acquisition::LogEi => {
                let obj = PointwiseLogEi { model: &model, f_ref: model.f_ref() };
                vec![maximize_smooth(&obj, &lo, &hi, &cfg.inner, seed)?.0]
            }
            Acquisition::Ts => {
                let n_cand = cfg.ts_candidates.unwrap_or_else(|| default_ts_candidates(dim)).max(batch);
                ts_batch_argmin(&model, &lo, &hi, &slot.tr.center, n_cand, batch, seed)?
            }
        };
        let prev_best = slot.tr.local_data.best().map_or(f64::INFINITY, |(_, v)| v);
        let mut batch_best: Option<(Vec<f64>, f64)> = None;
        for p in points {
            let v = self.evaluate(&p)?;
            self.record(p.clone(), v, Some(r), EventTag::Local);
            slot.tr.local_data.push(p.clone(), v);
            if batch_best.as_ref().is_none_or(|(_, b)| v < *b) {
                batch_best = Some((p, v));
            }
        }
        if let Some((_, v)) = &batch_best {
            debug!("region {r} step {step}: length {:.4}, best new {v:.6}, previous {prev_best:.6}", slot.tr.length);
        }
        if !cfg.global_search {
            if let Some((p, v)) = batch_best {
                update_trust_region(&mut slot.tr, &p, v, prev_best, cfg);
            }
        }
        Ok(())
    }

    fn run(&mut self, m: usize) -> Result<()> {
        let mut slots = self.start(m)?;
        let mut restarts = vec![0u64; m];
        let mut next = 0;
        while self.remaining() > 0 {
            let r = next % m;
            next += 1;
            if r >= slots.len() {
                // budget ran out during initialization
                let slot = self.restart(r, 0)?;
                slots.push(slot);
                continue;
            }
            if slots[r].tr.status == RegionStatus::Collapsed {
                restarts[r] += 1;
                slots[r] = self.restart(r, restarts[r])?;
                continue;
            }
            let mut slot = std::mem::replace(&mut slots[r], RegionSlot { tr: TrustRegion::new(Dataset::new(), 0.0), hyper: None, fits: 0 });
            let res = self.local_step(&mut slot, r);
            slots[r] = slot;
            res?;
        }
        Ok(())
    }
}

/// TuRBO with `m` trust regions served round-robin.
pub fn turbo_m_run(objective: &ObjectiveFn, cfg: &TurboConfig, m: usize, seed: u64) -> RunOutput {
    if let Err(e) = cfg.validate() {
        return RunOutput { records: Vec::new(), error: Some(e) };
    }
    if m == 0 {
        return RunOutput { records: Vec::new(), error: Some(Error::Config("m must be at least 1".into())) };
    }
    let mut engine = Engine {
        objective,
        cfg,
        seed,
        global: Dataset::new(),
        records: Vec::with_capacity(cfg.budget),
        best: f64::INFINITY,
        steps: 0,
    };
    let error = engine.run(m).err();
    RunOutput { records: engine.records, error }
}

/// TuRBO with a single trust region.
pub fn turbo1_run(objective: &ObjectiveFn, cfg: &TurboConfig, seed: u64) -> RunOutput {
    turbo_m_run(objective, cfg, 1, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{benchmark_suite, DesignSpace};

    fn region(length: f64) -> TrustRegion {
        let ds = Dataset::from_parts(vec![vec![0.5, 0.5]], vec![1.0]).unwrap();
        TrustRegion::new(ds, length)
    }

    #[test]
    fn halves_after_tau_fail() {
        let cfg = TurboConfig::default();
        let mut tr = region(0.8);
        for i in 0..2 {
            update_trust_region(&mut tr, &[0.1, 0.1], 2.0, 1.0, &cfg);
            assert_eq!(tr.failure_count, if i == 0 { 1 } else { 0 });
        }
        assert_eq!(tr.length, 0.4);
        assert_eq!(tr.center, vec![0.5, 0.5]);
    }

    #[test]
    fn doubles_capped() {
        let cfg = TurboConfig::default();
        let mut tr = region(0.8);
        let mut best = 1.0;
        for _ in 0..10 {
            best -= 0.1;
            update_trust_region(&mut tr, &[0.2, 0.3], best, best + 0.1, &cfg);
        }
        assert_eq!(tr.length, 1.6);
        assert_eq!(tr.center, vec![0.2, 0.3]);
        for _ in 0..10 {
            best -= 0.1;
            update_trust_region(&mut tr, &[0.2, 0.3], best, best + 0.1, &cfg);
        }
        assert_eq!(tr.length, 1.6);
    }

    #[test]
    fn collapses_below_l_min() {
        let cfg = TurboConfig::default();
        let mut tr = region(0.5f64.powi(7) * 1.5);
        update_trust_region(&mut tr, &[0.0, 0.0], 5.0, 1.0, &cfg);
        assert_eq!(tr.status, RegionStatus::Active);
        update_trust_region(&mut tr, &[0.0, 0.0], 5.0, 1.0, &cfg);
        assert_eq!(tr.length, 0.75 * 0.5f64.powi(7));
        assert_eq!(tr.status, RegionStatus::Collapsed);
    }

    #[test]
    fn counters_flip() {
        let cfg = TurboConfig { tau_fail: Some(5), ..Default::default() };
        let mut tr = region(0.8);
        update_trust_region(&mut tr, &[0.0, 0.0], 2.0, 1.0, &cfg);
        update_trust_region(&mut tr, &[0.0, 0.0], 0.5, 1.0, &cfg);
        assert_eq!((tr.success_count, tr.failure_count), (1, 0));
        update_trust_region(&mut tr, &[0.0, 0.0], 0.7, 0.5, &cfg);
        assert_eq!((tr.success_count, tr.failure_count), (0, 1));
    }

    #[test]
    fn per_dim_examples() {
        let iso = per_dim_lengths(0.8, &[0.3; 3], 1.6);
        assert!(iso.iter().all(|v| (v - 0.8).abs() < 1e-15));
        let l = per_dim_lengths(0.8, &[1.0, 4.0], 1.6);
        assert!((l[0] - 0.4).abs() < 1e-15 && (l[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn budget_equal_to_n_init() {
        let obj = benchmark_suite("ackley", 3).unwrap();
        let cfg = TurboConfig { n_init: 8, budget: 8, ..Default::default() };
        let recs = turbo1_run(&obj, &cfg, 1).into_result().unwrap();
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| r.event == EventTag::Init));
    }

    #[test]
    fn short_run_is_monotone_and_deterministic() {
        let obj = benchmark_suite("rosenbrock", 2).unwrap();
        let cfg = TurboConfig { n_init: 6, budget: 20, ..Default::default() };
        let a = turbo1_run(&obj, &cfg, 3).into_result().unwrap();
        let b = turbo1_run(&obj, &cfg, 3).into_result().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        assert!(a.iter().enumerate().all(|(i, r)| r.eval_index == i + 1));
    }

    #[test]
    fn evaluation_failure_keeps_partial_record() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = AtomicUsize::new(0);
        let obj = ObjectiveFn::new("fails-at-12", DesignSpace::unit(2).unwrap(), None, move |x: &[f64]| {
            if calls.fetch_add(1, Ordering::SeqCst) == 11 { f64::NAN } else { x[0] + x[1] }
        });
        let cfg = TurboConfig { n_init: 5, budget: 40, ..Default::default() };
        let out = turbo1_run(&obj, &cfg, 0);
        assert_eq!(out.records.len(), 11);
        assert!(matches!(out.error, Some(Error::Evaluation { eval_index: 12, .. })));
    }

    #[test]
    fn batch_requires_ts() {
        let cfg = TurboConfig { batch: 3, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(TurboConfig { batch: 3, acquisition: Acquisition::Ts, ..Default::default() }.validate().is_ok());
    }
}
