use std::process::Command;

use turbo_rei::bench::config::SeedSpec;
use turbo_rei::bench::runner::{aggregate_file, run_file};
use turbo_rei::bench::stats::{median, quantile_sorted};
use turbo_rei::bench::traces::{read_aggregate_csv, read_run_csv};
use turbo_rei::bench::{run_experiment, ConfigFile};

fn small_config(out: &std::path::Path) -> ConfigFile {
    ConfigFile {
        problem: Some("levy".into()),
        dim: Some(2),
        methods: Some(vec!["turbo1-logei".into(), "turbo1-ts".into()]),
        budget: Some(24),
        n_init: Some(8),
        seeds: SeedSpec::List(vec![3, 5, 8, 13, 21]),
        out: Some(out.to_path_buf()),
        plot: Some(true),
        ..Default::default()
    }
}

#[test]
fn aggregate_matches_per_run_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path()).resolve().unwrap();
    let summary = run_experiment(&cfg).unwrap();
    assert_eq!(summary.failed_runs(), 0);
    assert!(dir.path().join("summary.json").is_file());
    assert!(dir.path().join("convergence.svg").is_file());

    for method in ["turbo1-logei", "turbo1-ts"] {
        let runs: Vec<_> = cfg.seeds.iter().map(|&s| read_run_csv(&run_file(dir.path(), method, s)).unwrap()).collect();
        let rows = read_aggregate_csv(&aggregate_file(dir.path(), method)).unwrap();
        assert_eq!(rows.len(), 24);
        for row in &rows {
            let mut v: Vec<f64> = runs.iter().map(|r| r[row.eval_index - 1].best_so_far).collect();
            v.sort_by(f64::total_cmp);
            assert_eq!(row.n, v.len());
            assert!((row.mean - v.iter().sum::<f64>() / v.len() as f64).abs() <= 1e-12 * (1.0 + row.mean.abs()));
            assert_eq!(row.median, quantile_sorted(&v, 0.5));
            assert_eq!(row.q25, quantile_sorted(&v, 0.25));
            assert_eq!(row.q75, quantile_sorted(&v, 0.75));
        }
        let finals: Vec<f64> = runs.iter().map(|r| r.last().unwrap().best_so_far).collect();
        let m = summary.methods.iter().find(|m| m.method == method).unwrap();
        assert_eq!(m.median_final_best, Some(median(&finals)));
    }
    let c = &summary.comparisons[0];
    assert_eq!(c.pairs, 5);
    assert!(c.signed_rank.is_some());
}

#[test]
fn summary_json_is_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ConfigFile { methods: Some(vec!["gp-logei".into()]), budget: Some(10), ..small_config(dir.path()) };
    run_experiment(&cfg.resolve().unwrap()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["problem"], "levy");
    assert_eq!(v["runs"].as_array().unwrap().len(), 5);
    assert!(v["comparisons"].as_array().unwrap().is_empty());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_turbo-rei"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let ok = cli()
        .args(["run", "--problem", "rastrigin", "--dim", "2", "--budget", "12", "--n-init", "6"])
        .args(["--method", "turbo1-logei,turbo1-ts", "--seeds", "0..5", "--plot", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    assert_eq!(code(cli().args(["run", "--problem", "nope", "--dim", "2"])), 1);
    assert_eq!(code(cli().args(["run", "--problem", "levy", "--dim", "2", "--method", "turbo9-xx"])), 1);
    assert_eq!(code(cli().args(["run", "--problem", "levy", "--dim", "2", "--budget", "3", "--n-init", "5"])), 1);
    assert_eq!(code(cli().args(["frobnicate"])), 1);
    assert_eq!(code(cli().arg("run").arg("--config").arg(dir.path().join("missing.toml"))), 1);
    assert_eq!(code(cli().arg("--help")), 0);
    assert_eq!(code(cli().args(["selftest"]).env("TURBO_REI_THREADS", "zero")), 1);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "problem = \"levy\"\ncolour = 3\n").unwrap();
    assert_eq!(code(cli().arg("run").arg("--config").arg(&bad)), 1);

    let toml = dir.path().join("exp.toml");
    std::fs::write(
        &toml,
        format!(
            "problem = \"levy\"\ndim = 2\nmethods = [\"turbo1-ts\"]\nbudget = 10\nn_init = 5\nseeds = [1, 2]\nout = {:?}\n",
            dir.path().join("from_file")
        ),
    )
    .unwrap();
    assert_eq!(code(cli().arg("run").arg("--config").arg(&toml)), 0);
    assert!(dir.path().join("from_file/turbo1-ts/seed_2.csv").is_file());

    let plot = dir.path().join("p.svg");
    let plotted = cli().arg("plot").arg(out.join("turbo1-logei")).arg(out.join("turbo1-ts")).arg("-o").arg(&plot).output();
    assert!(plotted.unwrap().status.success());
    assert!(std::fs::read_to_string(&plot).unwrap().contains("<polyline"));
    assert_eq!(code(cli().arg("plot").arg(dir.path().join("none.csv")).arg("-o").arg(&plot)), 1);

    let stats = cli().arg("stats").arg(out.join("turbo1-logei")).arg(out.join("turbo1-ts")).output().unwrap();
    assert!(stats.status.success());
    let report: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(report["paired_seeds"], 5);
    assert!(report["signed_rank"]["p_value"].as_f64().is_some() || report["signed_rank_note"].is_string());
    assert_eq!(code(cli().arg("stats").arg(dir.path()).arg(dir.path())), 1);
}
