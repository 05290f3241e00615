//! Method identifiers used on the command line and in result directories.
//!
//! Grammar: `gp-logei`, or `turbo<M>-<acq>[-<sel>[-restart]]` where `<M>` is
//! `1`, a region count, or the literal `m` (take the count from the config),
//! `<acq>` is `logei` or `ts`, and `<sel>` is `qrei`, `logrei`, `rucb` or
//! `logei`. Without `<sel>` trust regions are placed at random; with it they
//! are placed by that acquisition at start and on restart, and `-restart`
//! limits it to restarts.

use crate::error::{Error, Result};
use crate::region_select::SelectionAcq;
use crate::turbo::{Acquisition, SelectionMode, TurboConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSpec {
    pub id: String,
    /// Number of trust regions.
    pub m: usize,
    pub acquisition: Acquisition,
    pub selection: SelectionMode,
    pub selection_acq: SelectionAcq,
    pub global_search: bool,
}

impl MethodSpec {
    pub fn parse(id: &str, default_m: usize, rucb_beta: f64) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown method '{id}' (expected gp-logei or turbo<1|m|k>-<logei|ts>[-<qrei|logrei|rucb|logei>[-restart]])"
            ))
        };
        if id == "gp-logei" {
            return Ok(Self {
                id: id.into(),
                m: 1,
                acquisition: Acquisition::LogEi,
                selection: SelectionMode::Random,
                selection_acq: SelectionAcq::Qrei,
                global_search: true,
            });
        }
        let parts: Vec<&str> = id.split('-').collect();
        let count = parts.first().and_then(|p| p.strip_prefix("turbo")).ok_or_else(bad)?;
        let m = match count {
            "m" => default_m,
            k => k.parse::<usize>().map_err(|_| bad())?,
        };
        if m == 0 {
            return Err(Error::Config(format!("method '{id}' needs at least one trust region")));
        }
        let acquisition = match parts.get(1) {
            Some(&"logei") => Acquisition::LogEi,
            Some(&"ts") => Acquisition::Ts,
            _ => return Err(bad()),
        };
        let (selection, selection_acq) = match &parts[2..] {
            [] => (SelectionMode::Random, SelectionAcq::Qrei),
            [sel] => (SelectionMode::InitAndRestart, parse_selection(sel, rucb_beta).ok_or_else(bad)?),
            [sel, "restart"] => (SelectionMode::RestartOnly, parse_selection(sel, rucb_beta).ok_or_else(bad)?),
            _ => return Err(bad()),
        };
        Ok(Self { id: id.into(), m, acquisition, selection, selection_acq, global_search: false })
    }

    /// `base` with this method's loop settings applied.
    pub fn apply(&self, base: &TurboConfig) -> TurboConfig {
        TurboConfig {
            acquisition: self.acquisition,
            selection: self.selection,
            selection_acq: self.selection_acq,
            global_search: self.global_search,
            ..base.clone()
        }
    }
}

fn parse_selection(s: &str, beta: f64) -> Option<SelectionAcq> {
    match s {
        "qrei" => Some(SelectionAcq::Qrei),
        "logrei" => Some(SelectionAcq::LogRei),
        "rucb" => Some(SelectionAcq::Rucb { beta }),
        "logei" => Some(SelectionAcq::LogEi),
        _ => None,
    }
}
