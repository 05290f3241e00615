//! Per-run CSV traces and per-evaluation aggregates across seeds.
//!
//! Run files have the columns `seed, eval_index, event, region_id, f, best_f,
//! x_1 .. x_D`, with points in unit-cube coordinates and an empty `region_id`
//! for global initial samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::stats::quantile_sorted;
use crate::error::{Error, Result};
use crate::turbo::RunRecord;

pub fn write_run_csv(path: &Path, records: &[RunRecord], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["seed", "eval_index", "event", "region_id", "f", "best_f"].map(String::from).into();
    header.extend((1..=dim).map(|d| format!("x_{d}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.seed.to_string(),
            r.eval_index.to_string(),
            r.event.to_string(),
            r.region_id.map(|i| i.to_string()).unwrap_or_default(),
            r.value.to_string(),
            r.best_so_far.to_string(),
        ];
        row.extend(r.point.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a run file back, checking the column layout and the record invariants
/// (contiguous 1-based indices, non-increasing `best_f`).
pub fn read_run_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let fixed = ["seed", "eval_index", "event", "region_id", "f", "best_f"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::Config(format!("{}: unexpected run CSV header", path.display())));
    }
    for (d, h) in header.iter().skip(fixed.len()).enumerate() {
        if h != format!("x_{}", d + 1) {
            return Err(Error::Config(format!("{}: unexpected column '{h}'", path.display())));
        }
    }
    let bad = |line: usize, what: &str| Error::Config(format!("{}: row {line}: {what}", path.display()));
    let mut out: Vec<RunRecord> = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let num = |k: usize| row[k].parse::<f64>().map_err(|_| bad(i + 1, &format!("bad number '{}'", &row[k])));
        let rec = RunRecord {
            seed: row[0].parse().map_err(|_| bad(i + 1, "bad seed"))?,
            eval_index: row[1].parse().map_err(|_| bad(i + 1, "bad eval_index"))?,
            event: row[2].parse().map_err(|_| bad(i + 1, "bad event tag"))?,
            region_id: if row[3].is_empty() {
                None
            } else {
                Some(row[3].parse().map_err(|_| bad(i + 1, "bad region_id"))?)
            },
            value: num(4)?,
            best_so_far: num(5)?,
            point: (fixed.len()..row.len()).map(num).collect::<Result<_>>()?,
        };
        if rec.eval_index != i + 1 {
            return Err(bad(i + 1, "eval_index not contiguous"));
        }
        if out.last().is_some_and(|p| rec.best_so_far > p.best_so_far) {
            return Err(bad(i + 1, "best_f increased"));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub eval_index: usize,
    /// Runs that reached this evaluation.
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Mean, median and quartiles of `best_so_far` across runs at each evaluation index.
pub fn aggregate(runs: &[Vec<RunRecord>]) -> Vec<AggregateRow> {
    let longest = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|t| {
            let mut v: Vec<f64> = runs.iter().filter_map(|r| r.get(t)).map(|r| r.best_so_far).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            AggregateRow {
                eval_index: t + 1,
                n: v.len(),
                mean,
                median: quantile_sorted(&v, 0.5),
                q25: quantile_sorted(&v, 0.25),
                q75: quantile_sorted(&v, 0.75),
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let rows = rd.deserialize().collect::<std::result::Result<Vec<AggregateRow>, _>>()?;
    Ok(rows)
}
