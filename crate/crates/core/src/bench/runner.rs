//! Seeded multi-run execution of an experiment and its output files.
//!
//! Layout under the output directory:
//!
//! ```text
//! <method>/seed_<seed>.csv   one trace per run
//! <method>/aggregate.csv     per-evaluation statistics across seeds
//! summary.json               final values, failures and pairwise tests
//! convergence.svg            when plotting is enabled
//! ```

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::bench::config::ExperimentConfig;
use crate::bench::plot::emit_convergence_plot;
use crate::bench::stats::{median, wilcoxon_signed_rank, TestResult};
use crate::bench::traces::{aggregate, write_aggregate_csv, write_run_csv, AggregateRow};
use crate::error::Result;
use crate::turbo::{turbo_m_run, RunRecord};

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub evaluations: usize,
    /// Best value reached; `None` when the run failed before its first evaluation.
    pub final_best: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub median_final_best: Option<f64>,
    pub mean_final_best: Option<f64>,
}

/// Paired signed-rank comparison of two methods' final best values over common completed seeds.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub pairs: usize,
    pub median_a: Option<f64>,
    pub median_b: Option<f64>,
    pub signed_rank: Option<TestResult>,
    /// Why no test was run, if none was.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub problem: String,
    pub dim: usize,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    /// Final values of completed runs of `method`, by seed.
    pub fn finals(&self, method: &str) -> Vec<(u64, f64)> {
        self.runs
            .iter()
            .filter(|r| r.method == method && r.error.is_none())
            .filter_map(|r| r.final_best.map(|v| (r.seed, v)))
            .collect()
    }
}

pub fn run_file(out_dir: &Path, method: &str, seed: u64) -> PathBuf {
    out_dir.join(method).join(format!("seed_{seed}.csv"))
}

pub fn aggregate_file(out_dir: &Path, method: &str) -> PathBuf {
    out_dir.join(method).join("aggregate.csv")
}

struct RunResult {
    method: usize,
    seed: u64,
    records: Vec<RunRecord>,
    error: Option<String>,
}

/// Runs every (method, seed) pair and writes traces, aggregates and the summary.
///
/// Failed runs keep their partial trace and are reported in the summary; they
/// do not stop the other runs. File-system errors abort the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let objective = cfg.objective()?;
    for m in &cfg.methods {
        std::fs::create_dir_all(cfg.out_dir.join(&m.id))?;
    }
    let jobs: Vec<(usize, u64)> =
        (0..cfg.methods.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();

    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(i, seed)| -> Result<RunResult> {
            let method = &cfg.methods[i];
            let out = turbo_m_run(&objective, &method.apply(&cfg.turbo), method.m, seed);
            write_run_csv(&run_file(&cfg.out_dir, &method.id, seed), &out.records, cfg.dim)?;
            let best = out.records.last().map(|r| r.best_so_far);
            match &out.error {
                None => info!("{} seed {seed}: best {:?} after {} evaluations", method.id, best, out.records.len()),
                Some(e) => warn!("{} seed {seed} failed after {} evaluations: {e}", method.id, out.records.len()),
            }
            Ok(RunResult { method: i, seed, error: out.error.map(|e| e.to_string()), records: out.records })
        })
        .collect::<Result<_>>()?;

    let mut series: Vec<(String, Vec<AggregateRow>)> = Vec::new();
    for (i, m) in cfg.methods.iter().enumerate() {
        let runs: Vec<Vec<RunRecord>> =
            results.iter().filter(|r| r.method == i).map(|r| r.records.clone()).collect();
        let rows = aggregate(&runs);
        write_aggregate_csv(&aggregate_file(&cfg.out_dir, &m.id), &rows)?;
        series.push((m.id.clone(), rows));
    }

    let runs: Vec<RunSummary> = results
        .iter()
        .map(|r| RunSummary {
            method: cfg.methods[r.method].id.clone(),
            seed: r.seed,
            evaluations: r.records.len(),
            final_best: r.records.last().map(|x| x.best_so_far),
            error: r.error.clone(),
        })
        .collect();
    let mut summary = ExperimentSummary {
        problem: cfg.problem.clone(),
        dim: cfg.dim,
        budget: cfg.turbo.budget,
        seeds: cfg.seeds.clone(),
        methods: Vec::new(),
        comparisons: Vec::new(),
        runs,
    };
    summary.methods = cfg
        .methods
        .iter()
        .map(|m| {
            let finals: Vec<f64> = summary.finals(&m.id).into_iter().map(|(_, v)| v).collect();
            let completed = finals.len();
            MethodSummary {
                method: m.id.clone(),
                completed_runs: completed,
                failed_runs: cfg.seeds.len() - completed,
                median_final_best: (completed > 0).then(|| median(&finals)),
                mean_final_best: (completed > 0).then(|| finals.iter().sum::<f64>() / completed as f64),
            }
        })
        .collect();
    for i in 0..cfg.methods.len() {
        for j in i + 1..cfg.methods.len() {
            let c = compare(&summary, &cfg.methods[i].id, &cfg.methods[j].id);
            summary.comparisons.push(c);
        }
    }

    let json = serde_json::to_string_pretty(&summary).map_err(|e| std::io::Error::other(e.to_string()))?;
    std::fs::write(cfg.out_dir.join("summary.json"), json + "\n")?;
    if cfg.plot {
        emit_convergence_plot(&series, &cfg.out_dir.join("convergence.svg"), cfg.log_y)?;
    }
    Ok(summary)
}

/// Paired comparison of two methods' final values over the seeds both completed.
pub fn compare(summary: &ExperimentSummary, a: &str, b: &str) -> Comparison {
    let fb = summary.finals(b);
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for (seed, va) in summary.finals(a) {
        if let Some((_, vb)) = fb.iter().find(|(s, _)| *s == seed) {
            xa.push(va);
            xb.push(*vb);
        }
    }
    let pairs = xa.len();
    let (signed_rank, note) = match wilcoxon_signed_rank(&xa, &xb) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        a: a.into(),
        b: b.into(),
        pairs,
        median_a: (pairs > 0).then(|| median(&xa)),
        median_b: (pairs > 0).then(|| median(&xb)),
        signed_rank,
        note,
    }
}
