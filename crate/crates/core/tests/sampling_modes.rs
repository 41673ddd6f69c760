//! Lazy samplers against exact DP on materialized windows, in distribution.

use drg_core::lattice::{longest_path_2d, longest_path_2d_lazy};
use drg_core::paths1d::{longest_path_1d, longest_path_1d_lazy};
use drg_core::stats::ks_two_sample;
use drg_core::{ConnectivityKernel, EdgeOracle, SeedSpec, Window};

const REPS: u64 = 3000;

#[test]
fn line_lazy_matches_materialized() {
    for (p, n) in [(0.5, 80i64), (0.2, 120), (0.9, 40)] {
        let k = ConnectivityKernel::constant(p).unwrap();
        let lazy: Vec<f64> =
            (0..REPS).map(|r| longest_path_1d_lazy(&k, n as u64, SeedSpec::new(1, r)).unwrap() as f64).collect();
        let exact: Vec<f64> = (0..REPS)
            .map(|r| {
                let o = EdgeOracle::materialize_window(&k, Window::line(1, n, 1).unwrap(), SeedSpec::new(2, r)).unwrap();
                longest_path_1d(&o, 1, 1, n).unwrap() as f64
            })
            .collect();
        // discrete samples: KS is conservative here, so compare means too
        let ks = ks_two_sample(&lazy, &exact, 0.001).unwrap();
        assert!(!ks.reject, "p = {p}: D = {}", ks.statistic);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&lazy) - mean(&exact)).abs() < 0.5, "p = {p}: {} vs {}", mean(&lazy), mean(&exact));
    }
}

#[test]
fn lattice_lazy_matches_materialized() {
    let k = ConnectivityKernel::constant(0.5).unwrap();
    let (n, m) = (40u64, 3u64);
    let lazy: Vec<f64> =
        (0..REPS).map(|r| longest_path_2d_lazy(&k, n, m, SeedSpec::new(3, r)).unwrap().l as f64).collect();
    let exact: Vec<f64> = (0..REPS)
        .map(|r| {
            let w = Window::new(0, n as i64, 1, m as i64).unwrap();
            longest_path_2d(&EdgeOracle::materialize_window(&k, w, SeedSpec::new(4, r)).unwrap()).unwrap().l as f64
        })
        .collect();
    let ks = ks_two_sample(&lazy, &exact, 0.001).unwrap();
    assert!(!ks.reject, "D = {}", ks.statistic);
}
