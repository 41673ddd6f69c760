use drg_core::bounds::{analyze_realization, compute_bounds};
use drg_core::lattice::{brute_force_2d, longest_path_2d, longest_path_2d_field};
use drg_core::paths1d::{brute_force_longest, longest_path_1d};
use drg_core::stats::{ks_two_sample, EcdfSummary};
use drg_core::{CoinField, ConnectivityKernel, EdgeOracle, SeedSpec, Window};
use proptest::prelude::*;

fn kernel(p: f64) -> ConnectivityKernel {
    ConnectivityKernel::constant(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn line_dp_matches_brute_force(p in 0.05f64..0.95, n in 1i64..12, seed in any::<u64>()) {
        let o = EdgeOracle::materialize_window(&kernel(p), Window::line(0, n, 2).unwrap(), SeedSpec::new(seed, 0)).unwrap();
        prop_assert_eq!(longest_path_1d(&o, 2, 0, n).unwrap(), brute_force_longest(&o, 2, 0, n).unwrap());
    }

    #[test]
    fn lattice_dp_matches_brute_force(p in 0.05f64..0.95, m in 1i64..4, seed in any::<u64>()) {
        let width = 12 / m;
        let w = Window::new(0, width - 1, 1, m).unwrap();
        let o = EdgeOracle::materialize_window(&kernel(p), w, SeedSpec::new(seed, 1)).unwrap();
        prop_assert_eq!(longest_path_2d(&o).unwrap().l, brute_force_2d(&o).unwrap());
    }

    #[test]
    fn streamed_matches_materialized(p in 0.05f64..0.95, n in 1u64..40, m in 1u64..5, seed in any::<u64>()) {
        let field = CoinField::new(kernel(p), SeedSpec::new(seed, 2));
        let o = EdgeOracle::materialize_window(&kernel(p), Window::new(0, n as i64, 1, m as i64).unwrap(), SeedSpec::new(seed, 2)).unwrap();
        prop_assert_eq!(longest_path_2d_field(&field, n, m).unwrap().l, longest_path_2d(&o).unwrap().l);
    }

    #[test]
    fn longest_path_is_monotone_in_the_window(p in 0.1f64..0.9, n in 2u64..60, m in 1u64..4, seed in any::<u64>()) {
        let field = CoinField::new(kernel(p), SeedSpec::new(seed, 3));
        let l = longest_path_2d_field(&field, n, m).unwrap().l;
        prop_assert!(l <= longest_path_2d_field(&field, n + 1, m).unwrap().l);
        prop_assert!(l <= longest_path_2d_field(&field, n, m + 1).unwrap().l);
        // a path visits each column at most once per line and climbs at most m - 1 times
        prop_assert!(l <= n + m - 1);
    }

    #[test]
    fn bounds_sandwich_small(n in 20u64..120, m in 1u64..4, seed in any::<u64>()) {
        let field = CoinField::new(kernel(0.5), SeedSpec::new(seed, 4));
        let l = longest_path_2d_field(&field, n, m).unwrap().l as i64;
        let lines = analyze_realization(&field, n, m, None).unwrap();
        let b = compute_bounds(&lines, n, 0.578).unwrap();
        prop_assert!(b.l_lower <= l && l <= b.l_upper, "{} <= {} <= {}", b.l_lower, l, b.l_upper);
    }

    #[test]
    fn ks_invariant_under_monotone_maps(a in prop::collection::vec(-5.0f64..5.0, 1..60), b in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let d = ks_two_sample(&a, &b, 0.05).unwrap().statistic;
        let f = |v: &Vec<f64>| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
        let e = ks_two_sample(&f(&a), &f(&b), 0.05).unwrap().statistic;
        prop_assert!((d - e).abs() < 1e-12);
    }

    #[test]
    fn ecdf_merge_is_concatenation(a in prop::collection::vec(-5.0f64..5.0, 0..40), b in prop::collection::vec(-5.0f64..5.0, 0..40)) {
        let merged = EcdfSummary::new(&a).unwrap().merge(&EcdfSummary::new(&b).unwrap());
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let direct = EcdfSummary::new(&all).unwrap();
        prop_assert_eq!(merged.sorted(), direct.sorted());
        if all.len() > 1 {
            prop_assert!((merged.mean - direct.mean).abs() < 1e-9);
            prop_assert!((merged.variance - direct.variance).abs() < 1e-9);
        }
    }
}
