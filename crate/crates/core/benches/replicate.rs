//! Sequential vs rayon replication of the same workloads.
//!
//! `cargo bench -p drg-core` compares both paths; with
//! `--no-default-features` only the sequential one is built.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drg_core::lattice::longest_path_2d_lazy;
use drg_core::paths1d::longest_path_1d_lazy;
use drg_core::rmt::gue_lmax;
use drg_core::{par, ConnectivityKernel, SeedSpec};

const REPS: u64 = 32;

fn bench_replicate(c: &mut Criterion) {
    let kernel = ConnectivityKernel::constant(0.5).unwrap();
    let mut group = c.benchmark_group("replicate");
    group.sample_size(10);

    let lnm = |rep: u64| longest_path_2d_lazy(&kernel, 2_000, 4, SeedSpec::new(7, rep)).unwrap().l;
    let line = |rep: u64| longest_path_1d_lazy(&kernel, 10_000, SeedSpec::new(7, rep)).unwrap();
    let gue = |rep: u64| gue_lmax(100, SeedSpec::new(7, rep)).unwrap();

    group.bench_function(BenchmarkId::new("seq", "lnm"), |b| b.iter(|| black_box(par::replicate_seq(REPS, lnm))));
    group.bench_function(BenchmarkId::new("seq", "line"), |b| b.iter(|| black_box(par::replicate_seq(REPS, line))));
    group.bench_function(BenchmarkId::new("seq", "gue"), |b| b.iter(|| black_box(par::replicate_seq(REPS, gue))));

    #[cfg(feature = "parallel")]
    {
        group.bench_function(BenchmarkId::new("par", "lnm"), |b| b.iter(|| black_box(par::replicate_par(REPS, lnm))));
        group.bench_function(BenchmarkId::new("par", "line"), |b| b.iter(|| black_box(par::replicate_par(REPS, line))));
        group.bench_function(BenchmarkId::new("par", "gue"), |b| b.iter(|| black_box(par::replicate_par(REPS, gue))));
    }
    group.finish();
}

criterion_group!(benches, bench_replicate);
criterion_main!(benches);
