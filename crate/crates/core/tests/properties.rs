use proptest::prelude::*;

use turbo_rei::acquisition::{ei, log_ei, ucb_min};
use turbo_rei::bench::stats::{doubled_ranks, wilcoxon_rank_sum, wilcoxon_signed_rank};
use turbo_rei::gp::{kernel, GpHyperparams};
use turbo_rei::problem::Dataset;
use turbo_rei::regional::{region_bounds, RegionGeometry};
use turbo_rei::subset::select_representatives;
use turbo_rei::theory::indicator_fourier_factor;
use turbo_rei::turbo::{per_dim_lengths, update_trust_region, RegionStatus, TrustRegion, TurboConfig};

proptest! {
    #[test]
    fn ei_is_monotone(mean in -5.0..5.0f64, s1 in 0.0..3.0f64, ds in 0.0..3.0f64, dm in 0.0..3.0f64, f_ref in -5.0..5.0f64) {
        let a = ei(mean, s1 * s1, f_ref);
        prop_assert!(a >= 0.0);
        prop_assert!(ei(mean, (s1 + ds).powi(2), f_ref) >= a * (1.0 - 1e-12));
        prop_assert!(ei(mean + dm, s1 * s1, f_ref) <= a * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn log_ei_is_finite_and_ordered(mean in -60.0..60.0f64, sigma in 1e-3..5.0f64, dm in 1e-3..1.0f64) {
        let l = log_ei(mean, sigma * sigma, 0.0);
        prop_assert!(l.is_finite());
        prop_assert!(log_ei(mean + dm, sigma * sigma, 0.0) < l);
    }

    #[test]
    fn ucb_identity(mean in -5.0..5.0f64, var in 0.0..4.0f64, beta in 0.0..9.0f64) {
        prop_assert_eq!(ucb_min(mean, var, 0.0), -mean);
        prop_assert!((ucb_min(mean, var, beta) - (-mean + (beta * var).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_bounded(
        x in prop::collection::vec(0.0..1.0f64, 3),
        y in prop::collection::vec(0.0..1.0f64, 3),
        ls in prop::collection::vec(0.05..2.0f64, 3),
        sf in 0.1..3.0f64,
    ) {
        let hp = GpHyperparams { lengthscales: ls, signal_variance: sf, noise_variance: 1e-6 };
        let k = kernel(&x, &y, &hp);
        prop_assert_eq!(k, kernel(&y, &x, &hp));
        prop_assert!(k > 0.0 && k <= sf * (1.0 + 1e-12));
    }

    #[test]
    fn bounds_stay_in_cube(center in prop::collection::vec(0.0..=1.0f64, 1..6), l in 1e-9..2.0f64) {
        let geom = RegionGeometry::new(center.clone(), vec![l; center.len()]);
        let (lo, hi) = region_bounds(&geom);
        for d in 0..center.len() {
            prop_assert!(0.0 <= lo[d] && lo[d] <= center[d] && center[d] <= hi[d] && hi[d] <= 1.0);
            prop_assert!(hi[d] - lo[d] <= l + 1e-15);
        }
    }

    #[test]
    fn shaped_lengths_keep_volume(l in 0.01..0.8f64, s in prop::collection::vec(0.2..5.0f64, 1..8)) {
        let lens = per_dim_lengths(l, &s, f64::INFINITY);
        let log_vol: f64 = lens.iter().map(|x| x.ln()).sum();
        prop_assert!((log_vol - s.len() as f64 * l.ln()).abs() < 1e-10);
        let capped = per_dim_lengths(l, &s, 1.6);
        prop_assert!(capped.iter().all(|&x| x <= 1.6));
    }

    #[test]
    fn length_changes_only_by_factors_of_two(steps in prop::collection::vec(any::<bool>(), 1..200), dim in 1usize..6) {
        let cfg = TurboConfig::default();
        let mut tr = TrustRegion::new(Dataset::from_parts(vec![vec![0.5; dim]], vec![0.0]).unwrap(), cfg.l_init);
        let mut best = 0.0;
        let p = vec![0.5; dim];
        for improve in steps {
            let before = (tr.length, tr.status);
            let v = if improve { best - 1.0 } else { best + 1.0 };
            update_trust_region(&mut tr, &p, v, best, &cfg);
            if improve { best = v; }
            if before.1 == RegionStatus::Collapsed {
                prop_assert_eq!(tr.status, RegionStatus::Collapsed);
                continue;
            }
            let r = tr.length / before.0;
            prop_assert!(r == 1.0 || r == 0.5 || (r > 1.0 && r <= 2.0 && tr.length == cfg.l_max.min(2.0 * before.0)));
            prop_assert!(tr.success_count < cfg.tau_succ && tr.failure_count < dim);
            prop_assert!(tr.length <= cfg.l_max);
            prop_assert_eq!(tr.status == RegionStatus::Collapsed, tr.length < cfg.l_min);
        }
    }

    #[test]
    fn fourier_factor_bounded(omega in prop::collection::vec(-1e4..1e4f64, 1..5), l in 1e-4..2.0f64) {
        let lengths = vec![l; omega.len()];
        prop_assert!(indicator_fourier_factor(&omega, &lengths).abs() <= 1.0);
    }

    #[test]
    fn doubled_ranks_sum(v in prop::collection::vec(-3i32..3, 1..30)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let (r, ties) = doubled_ranks(&v);
        let n = v.len() as u64;
        prop_assert_eq!(r.iter().sum::<u64>(), n * (n + 1));
        prop_assert_eq!(ties.iter().sum::<usize>(), v.len());
    }

    #[test]
    fn p_values_in_unit_interval(
        a in prop::collection::vec(-10.0..10.0f64, 5..30),
        shift in -3.0..3.0f64,
    ) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + shift + (i as f64 * 0.7).sin()).collect();
        if let Ok(t) = wilcoxon_signed_rank(&a, &b) {
            prop_assert!(t.p_value > 0.0 && t.p_value <= 1.0);
            let back = wilcoxon_signed_rank(&b, &a).unwrap();
            prop_assert!((t.p_value - back.p_value).abs() < 1e-12);
        }
        let t = wilcoxon_rank_sum(&a, &b).unwrap();
        prop_assert!(t.p_value > 0.0 && t.p_value <= 1.0);
        let back = wilcoxon_rank_sum(&b, &a).unwrap();
        prop_assert!((t.p_value - back.p_value).abs() < 1e-12);
    }

    #[test]
    fn representatives_are_distinct(values in prop::collection::vec(-5.0..5.0f64, 2..60), n_gp in 1usize..40) {
        let points: Vec<Vec<f64>> = (0..values.len()).map(|i| vec![i as f64 / values.len() as f64]).collect();
        let data = Dataset::from_parts(points, values.clone()).unwrap();
        let mut idx = select_representatives(&data, n_gp);
        prop_assert_eq!(idx.len(), n_gp.min(values.len()));
        let best = (0..values.len()).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
        prop_assert!(idx.iter().any(|&i| values[i] == values[best]));
        idx.sort();
        idx.dedup();
        prop_assert_eq!(idx.len(), n_gp.min(values.len()));
    }
}
