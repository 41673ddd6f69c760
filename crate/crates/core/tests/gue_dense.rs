//! The tridiagonal GUE sampler against dense Hermitian matrices.

use drg_core::rmt::gue_lmax;
use drg_core::stats::ks_two_sample;
use drg_core::SeedSpec;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest eigenvalue of a dense GUE matrix with `E|H_ij|^2 = 1`, computed
/// from the real symmetric embedding `[[A, -B], [B, A]]` of `H = A + iB`.
fn dense_lmax(m: usize, seed: SeedSpec) -> f64 {
    let mut rng = seed.derive_stream();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = rng.sample(StandardNormal);
        for j in i + 1..m {
            let re: f64 = rng.sample::<f64, _>(StandardNormal) / 2f64.sqrt();
            let im: f64 = rng.sample::<f64, _>(StandardNormal) / 2f64.sqrt();
            a[(i, j)] = re;
            a[(j, i)] = re;
            b[(i, j)] = im;
            b[(j, i)] = -im;
        }
    }
    let mut e = DMatrix::<f64>::zeros(2 * m, 2 * m);
    e.view_mut((0, 0), (m, m)).copy_from(&a);
    e.view_mut((m, m), (m, m)).copy_from(&a);
    e.view_mut((0, m), (m, m)).copy_from(&(-&b));
    e.view_mut((m, 0), (m, m)).copy_from(&b);
    e.symmetric_eigenvalues().max()
}

#[test]
fn tridiagonal_matches_dense() {
    for m in [1usize, 3, 8] {
        let dense: Vec<f64> = (0..3000).map(|r| dense_lmax(m, SeedSpec::new(11, r))).collect();
        let tri: Vec<f64> = (0..3000).map(|r| gue_lmax(m as u64, SeedSpec::new(12, r)).unwrap()).collect();
        let ks = ks_two_sample(&dense, &tri, 0.001).unwrap();
        assert!(!ks.reject, "m = {m}: D = {}, p = {}", ks.statistic, ks.p_value);
    }
}

#[test]
fn dense_normalization() {
    // E tr(H^2) = m^2 under E|H_ij|^2 = 1; the embedding doubles the trace
    let m = 6;
    let mut rng = SeedSpec::new(5, 0).derive_stream();
    let mut acc = 0.0;
    let reps = 2000;
    for _ in 0..reps {
        let mut s = 0.0;
        for i in 0..m {
            let d: f64 = rng.sample(StandardNormal);
            s += d * d;
            for _ in i + 1..m {
                let re: f64 = rng.sample::<f64, _>(StandardNormal) / 2f64.sqrt();
                let im: f64 = rng.sample::<f64, _>(StandardNormal) / 2f64.sqrt();
                s += 2.0 * (re * re + im * im);
            }
        }
        acc += s;
    }
    let mean = acc / reps as f64 / (m * m) as f64;
    assert!((mean - 1.0).abs() < 0.03, "{mean}");
}
