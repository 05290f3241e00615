//! Experiment configuration: a TOML file with optional nested override
//! sections, merged with command-line flags.
//!
//! ```toml
//! problem = "ackley"
//! dim = 20
//! methods = ["turbo1-logei", "turbo1-logei-qrei"]
//! budget = 600
//! seeds = "0..11"
//! out = "results/ackley20"
//!
//! [turbo]
//! l_init = 0.8
//!
//! [regional]
//! n_x = 128
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::DEFAULT_UCB_BETA;
use crate::bench::method::MethodSpec;
use crate::error::{Error, Result};
use crate::problem::{benchmark_suite, ObjectiveFn};
use crate::turbo::TurboConfig;

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SeedSpec {
    #[default]
    None,
    List(Vec<u64>),
    Text(String),
}

impl SeedSpec {
    fn resolve(&self) -> Result<Option<Vec<u64>>> {
        match self {
            SeedSpec::None => Ok(None),
            SeedSpec::List(v) => Ok(Some(v.clone())),
            SeedSpec::Text(s) => parse_seeds(s).map(Some),
        }
    }
}

/// Parses `"0..11"`, `"0..=10"`, `"3"` or `"1,4,9"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seeds '{text}' (use a..b, a..=b or a comma list)"));
    let t = text.trim();
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    if let Some((a, b)) = t.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = t.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        return Ok((a..b).collect());
    }
    t.split(',').map(num).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurboOverrides {
    pub l_init: Option<f64>,
    pub l_min: Option<f64>,
    pub l_max: Option<f64>,
    pub tau_succ: Option<usize>,
    pub tau_fail: Option<usize>,
    pub n_gp: Option<usize>,
    pub shape_selection_lengths: Option<bool>,
    pub ts_candidates: Option<usize>,
    pub loop_fit_restarts: Option<usize>,
    pub loop_full_refit_every: Option<usize>,
    pub loop_fit_max_iters: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionalOverrides {
    pub n_x: Option<usize>,
    pub n_f: Option<usize>,
    pub rucb_beta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerOverrides {
    pub n_raw: Option<usize>,
    pub n_restarts: Option<usize>,
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOverrides {
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
}

/// Raw configuration as read from a file or assembled from flags; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<String>,
    pub dim: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub budget: Option<usize>,
    pub n_init: Option<usize>,
    pub batch: Option<usize>,
    pub m: Option<usize>,
    pub seeds: SeedSpec,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub log_y: Option<bool>,
    pub turbo: TurboOverrides,
    pub regional: RegionalOverrides,
    pub inner: InnerOverrides,
    pub fit: FitOverrides,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Top-level values set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(problem, dim, methods, budget, n_init, batch, m, out, plot, log_y);
        if flags.seeds != SeedSpec::None {
            self.seeds = flags.seeds;
        }
        self
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let problem = self.problem.clone().ok_or_else(|| Error::Config("missing problem name".into()))?;
        let dim = self.dim.ok_or_else(|| Error::Config("missing problem dimension".into()))?;
        benchmark_suite(&problem, dim)?;
        let seeds = self.seeds.resolve()?.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        let m = self.m.unwrap_or(1);
        let beta = self.regional.rucb_beta.unwrap_or(DEFAULT_UCB_BETA);
        let ids = self.methods.clone().unwrap_or_default();
        if ids.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        let methods = ids.iter().map(|id| MethodSpec::parse(id, m, beta)).collect::<Result<Vec<_>>>()?;

        let mut turbo = TurboConfig::default();
        turbo.budget = self.budget.unwrap_or(turbo.budget);
        turbo.n_init = self.n_init.unwrap_or(turbo.n_init);
        turbo.batch = self.batch.unwrap_or(turbo.batch);
        let t = &self.turbo;
        turbo.l_init = t.l_init.unwrap_or(turbo.l_init);
        turbo.l_min = t.l_min.unwrap_or(turbo.l_min);
        turbo.l_max = t.l_max.unwrap_or(turbo.l_max);
        turbo.tau_succ = t.tau_succ.unwrap_or(turbo.tau_succ);
        turbo.tau_fail = t.tau_fail.or(turbo.tau_fail);
        turbo.n_gp = t.n_gp.unwrap_or(turbo.n_gp);
        turbo.shape_selection_lengths = t.shape_selection_lengths.unwrap_or(turbo.shape_selection_lengths);
        turbo.ts_candidates = t.ts_candidates.or(turbo.ts_candidates);
        turbo.loop_fit_restarts = t.loop_fit_restarts.unwrap_or(turbo.loop_fit_restarts);
        turbo.loop_full_refit_every = t.loop_full_refit_every.unwrap_or(turbo.loop_full_refit_every);
        turbo.loop_fit_max_iters = t.loop_fit_max_iters.unwrap_or(turbo.loop_fit_max_iters);
        turbo.regional.n_x = self.regional.n_x.unwrap_or(turbo.regional.n_x);
        turbo.regional.n_f = self.regional.n_f.unwrap_or(turbo.regional.n_f);
        turbo.inner.n_raw = self.inner.n_raw.unwrap_or(turbo.inner.n_raw);
        turbo.inner.n_restarts = self.inner.n_restarts.unwrap_or(turbo.inner.n_restarts);
        turbo.inner.max_iters = self.inner.max_iters.unwrap_or(turbo.inner.max_iters);
        turbo.fit.n_restarts = self.fit.restarts.unwrap_or(turbo.fit.n_restarts);
        turbo.fit.lbfgs.max_iters = self.fit.max_iters.unwrap_or(turbo.fit.lbfgs.max_iters);

        if turbo.regional.n_x == 0 || turbo.regional.n_f == 0 {
            return Err(Error::Config("n_x and n_f must be positive".into()));
        }
        if turbo.inner.n_restarts == 0 || turbo.inner.n_restarts > turbo.inner.n_raw {
            return Err(Error::Config("inner optimizer needs 1 <= n_restarts <= n_raw".into()));
        }
        for method in &methods {
            method.apply(&turbo).validate().map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("method {}: {msg}", method.id)),
                other => other,
            })?;
        }
        Ok(ExperimentConfig {
            problem,
            dim,
            methods,
            seeds,
            out_dir: self.out.clone().unwrap_or_else(|| PathBuf::from("results")),
            plot: self.plot.unwrap_or(false),
            log_y: self.log_y.unwrap_or(false),
            turbo,
        })
    }
}

/// Fully resolved and validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: String,
    pub dim: usize,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub plot: bool,
    pub log_y: bool,
    /// Shared loop settings; each method overrides its own fields.
    pub turbo: TurboConfig,
}

impl ExperimentConfig {
    pub fn objective(&self) -> Result<ObjectiveFn> {
        benchmark_suite(&self.problem, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("5, 1").unwrap(), vec![5, 1]);
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn file_and_flags() {
        let file = ConfigFile::from_toml(
            r#"
            problem = "levy"
            dim = 4
            methods = ["turbo1-logei"]
            seeds = [1, 2]
            [turbo]
            l_init = 0.4
            [regional]
            n_x = 16
            "#,
        )
        .unwrap();
        let flags = ConfigFile { budget: Some(40), seeds: SeedSpec::Text("0..3".into()), ..Default::default() };
        let cfg = file.overlay(flags).resolve().unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.turbo.budget, 40);
        assert_eq!(cfg.turbo.l_init, 0.4);
        assert_eq!(cfg.turbo.regional.n_x, 16);
    }

    #[test]
    fn invalid_configs() {
        let base = ConfigFile {
            problem: Some("levy".into()),
            dim: Some(2),
            methods: Some(vec!["turbo1-logei".into()]),
            ..Default::default()
        };
        assert!(base.resolve().is_ok());
        let cases = [
            ConfigFile { problem: Some("sphere".into()), ..base.clone() },
            ConfigFile { methods: Some(vec![]), ..base.clone() },
            ConfigFile { methods: Some(vec!["turbo1-foo".into()]), ..base.clone() },
            ConfigFile { seeds: SeedSpec::List(vec![]), ..base.clone() },
            ConfigFile { seeds: SeedSpec::List(vec![1, 1]), ..base.clone() },
            ConfigFile { budget: Some(10), n_init: Some(20), ..base.clone() },
            ConfigFile { batch: Some(4), ..base.clone() },
        ];
        for c in cases {
            assert!(matches!(c.resolve(), Err(Error::Config(_))), "{c:?}");
        }
        assert!(ConfigFile::from_toml("problem = 3").is_err());
        assert!(ConfigFile::from_toml("colour = \"red\"").is_err());
    }
}
