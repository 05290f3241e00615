use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use turbo_rei::bench::config::SeedSpec;
use turbo_rei::bench::plot::emit_convergence_plot;
use turbo_rei::bench::runner::{aggregate_file, run_experiment};
use turbo_rei::bench::selftest::run_selftest;
use turbo_rei::bench::stats::{median, wilcoxon_rank_sum, wilcoxon_signed_rank, TestResult};
use turbo_rei::bench::traces::{read_aggregate_csv, read_run_csv};
use turbo_rei::bench::ConfigFile;
use turbo_rei::Error;

/// Environment variable holding the worker-thread count.
const THREADS_ENV: &str = "TURBO_REI_THREADS";

#[derive(Parser)]
#[command(name = "turbo-rei", version, about = "Trust-region BO with regional expected improvement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (methods x seeds) and write traces.
    Run(RunArgs),
    /// Draw mean best-so-far curves from aggregate CSVs.
    Plot {
        /// Aggregate CSV files, or method directories containing aggregate.csv.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        log_y: bool,
    },
    /// Compare final best values of two method directories.
    Stats { a: PathBuf, b: PathBuf },
    /// Run the region-averaging checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment file; flags override its top-level values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated method ids.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    /// Seeds as `a..b`, `a..=b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    log_y: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("cannot start thread pool: {e}")))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        problem: args.problem,
        dim: args.dim,
        methods: args.method,
        budget: args.budget,
        n_init: args.n_init,
        batch: args.batch,
        m: args.m,
        seeds: args.seeds.map(SeedSpec::Text).unwrap_or_default(),
        out: args.out,
        plot: args.plot.then_some(true),
        log_y: args.log_y.then_some(true),
        ..Default::default()
    };
    let cfg = file.overlay(flags).resolve()?;
    let summary = run_experiment(&cfg)?;
    for m in &summary.methods {
        println!(
            "{:<32} runs {:>3}  failed {:>3}  median final {}",
            m.method,
            m.completed_runs,
            m.failed_runs,
            m.median_final_best.map_or("-".into(), |v| format!("{v:.6e}"))
        );
    }
    for c in &summary.comparisons {
        match &c.signed_rank {
            Some(t) => println!("{} vs {}: {} pairs, signed-rank p = {:.4}", c.a, c.b, c.pairs, t.p_value),
            None => println!("{} vs {}: no test ({})", c.a, c.b, c.note.as_deref().unwrap_or("")),
        }
    }
    println!("results in {}", cfg.out_dir.display());
    match summary.failed_runs() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!("{n} run(s) failed; see summary.json"))),
    }
}

fn cmd_plot(inputs: &[PathBuf], out: &Path, log_y: bool) -> Result<(), Failure> {
    let mut series = Vec::new();
    for p in inputs {
        let (file, label) = if p.is_dir() {
            (aggregate_file(p.parent().unwrap_or(Path::new(".")), &dir_name(p)), dir_name(p))
        } else {
            (p.clone(), p.parent().map(dir_name).unwrap_or_else(|| p.display().to_string()))
        };
        let rows = read_aggregate_csv(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
        series.push((label, rows));
    }
    emit_convergence_plot(&series, out, log_y)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn dir_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

/// Final best value of every run file `seed_<k>.csv` in `dir`, sorted by seed.
fn final_values(dir: &Path) -> Result<Vec<(u64, f64)>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::Runtime(e.to_string()))?.path();
        let name = dir_name(&path);
        let Some(seed) = name.strip_prefix("seed_").and_then(|s| s.strip_suffix(".csv")) else { continue };
        let Ok(seed) = seed.parse::<u64>() else { continue };
        let recs = read_run_csv(&path)?;
        if let Some(last) = recs.last() {
            out.push((seed, last.best_so_far));
        }
    }
    if out.is_empty() {
        return Err(Failure::Config(format!("{}: no seed_<k>.csv run files", dir.display())));
    }
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

#[derive(Serialize)]
struct StatsReport {
    a: String,
    b: String,
    paired_seeds: usize,
    median_a: f64,
    median_b: f64,
    signed_rank: Option<TestResult>,
    signed_rank_note: Option<String>,
    rank_sum: Option<TestResult>,
    rank_sum_note: Option<String>,
}

fn cmd_stats(a: &Path, b: &Path) -> Result<(), Failure> {
    let fa = final_values(a)?;
    let fb = final_values(b)?;
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    for (seed, va) in &fa {
        if let Some((_, vb)) = fb.iter().find(|(s, _)| s == seed) {
            pa.push(*va);
            pb.push(*vb);
        }
    }
    let va: Vec<f64> = fa.iter().map(|x| x.1).collect();
    let vb: Vec<f64> = fb.iter().map(|x| x.1).collect();
    let split = |r: turbo_rei::Result<TestResult>| match r {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (signed_rank, signed_rank_note) = split(wilcoxon_signed_rank(&pa, &pb));
    let (rank_sum, rank_sum_note) = split(wilcoxon_rank_sum(&va, &vb));
    let report = StatsReport {
        a: a.display().to_string(),
        b: b.display().to_string(),
        paired_seeds: pa.len(),
        median_a: median(&va),
        median_b: median(&vb),
        signed_rank,
        signed_rank_note,
        rank_sum,
        rank_sum_note,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
    Ok(())
}

fn cmd_selftest(seed: u64) -> Result<(), Failure> {
    let checks = run_selftest(seed)?;
    let mut ok = true;
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok { Ok(()) } else { Err(Failure::Runtime("self-test failed".into())) }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Plot { inputs, out, log_y } => cmd_plot(&inputs, &out, log_y),
        Command::Stats { a, b } => cmd_stats(&a, &b),
        Command::Selftest { seed } => cmd_selftest(seed),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
