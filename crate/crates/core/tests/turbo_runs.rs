use turbo_rei::problem::{benchmark_suite, sharp_broad_1d};
use turbo_rei::turbo::{turbo1_run, turbo_m_run, Acquisition, EventTag, RunRecord, SelectionMode, TurboConfig};

fn check_trace(records: &[RunRecord], budget: usize) {
    assert_eq!(records.len(), budget);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.eval_index, i + 1);
        assert!(r.point.iter().all(|x| (0.0..=1.0).contains(x)));
    }
    for w in records.windows(2) {
        assert!(w[1].best_so_far <= w[0].best_so_far);
        assert_eq!(w[1].best_so_far, w[0].best_so_far.min(w[1].value));
    }
}

#[test]
fn budget_equal_to_n_init_only_initializes() {
    let obj = benchmark_suite("levy", 4).unwrap();
    for selection in [SelectionMode::Random, SelectionMode::InitAndRestart] {
        let cfg = TurboConfig { budget: 12, n_init: 12, selection, ..TurboConfig::default() };
        let recs = turbo1_run(&obj, &cfg, 0).into_result().unwrap();
        check_trace(&recs, 12);
        assert!(recs.iter().all(|r| r.event == EventTag::Init));
    }
}

#[test]
fn runs_are_reproducible() {
    let obj = benchmark_suite("rosenbrock", 3).unwrap();
    let cfg = TurboConfig { budget: 30, n_init: 8, acquisition: Acquisition::Ts, ..TurboConfig::default() };
    let a = turbo1_run(&obj, &cfg, 9).into_result().unwrap();
    let b = turbo1_run(&obj, &cfg, 9).into_result().unwrap();
    check_trace(&a, 30);
    assert_eq!(a, b);
    let c = turbo1_run(&obj, &cfg, 10).into_result().unwrap();
    assert_ne!(a, c);
}

#[test]
fn multiple_regions_carry_their_ids() {
    let obj = benchmark_suite("styblinski_tang", 2).unwrap();
    let cfg = TurboConfig { budget: 60, n_init: 8, ..TurboConfig::default() };
    let recs = turbo_m_run(&obj, &cfg, 3, 4).into_result().unwrap();
    check_trace(&recs, 60);
    for r in &recs {
        assert!(r.region_id.is_some_and(|id| id < 3));
    }
    for id in 0..3 {
        assert!(recs.iter().any(|r| r.region_id == Some(id) && r.event == EventTag::Local));
    }
}

#[test]
fn joint_initialization_places_distinct_centers() {
    let obj = benchmark_suite("sharp_broad_1d", 1).unwrap();
    let cfg = TurboConfig { budget: 50, n_init: 8, selection: SelectionMode::InitAndRestart, ..TurboConfig::default() };
    let recs = turbo_m_run(&obj, &cfg, 3, 2).into_result().unwrap();
    check_trace(&recs, 50);
    assert!(recs[..8].iter().all(|r| r.event == EventTag::Init && r.region_id.is_none()));
    // the first selected sample of each region is its center
    let centers: Vec<f64> = (0..3)
        .map(|id| {
            recs.iter().find(|r| r.region_id == Some(id) && r.event == EventTag::RestartSelect).unwrap().point[0]
        })
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(centers[i] != centers[j], "centers {centers:?}");
        }
    }
}

#[test]
fn restarts_on_two_valley_problem() {
    let obj = benchmark_suite("sharp_broad_1d", 1).unwrap();
    let cfg = TurboConfig { budget: 150, n_init: 10, selection: SelectionMode::RestartOnly, ..TurboConfig::default() };
    let fine: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let ridge = fine
        .iter()
        .copied()
        .filter(|&x| x > 0.03 && x < 0.75)
        .max_by(|a, b| sharp_broad_1d(&[*a]).total_cmp(&sharp_broad_1d(&[*b])))
        .unwrap();
    let sharp = |x: f64| x < ridge;

    let (mut switched, mut seeds_with_restart) = (0, 0);
    for seed in 0..11 {
        let recs = turbo1_run(&obj, &cfg, seed).into_result().unwrap();
        check_trace(&recs, 150);
        let Some(first) = recs.iter().position(|r| r.event == EventTag::RestartSelect) else { continue };
        seeds_with_restart += 1;
        assert!(recs[..first].iter().all(|r| r.event != EventTag::RestartInit));
        let exploited = recs[..first].iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap().point[0];
        let center = recs[first].point[0];
        if sharp(exploited) != sharp(center) {
            switched += 1;
        }
    }
    println!("first restart switched basin in {switched}/{seeds_with_restart} seeds (ridge {ridge:.3})");
    assert_eq!(seeds_with_restart, 11);
}
