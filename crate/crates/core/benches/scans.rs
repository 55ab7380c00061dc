//! Sequential vs rayon execution of the grid-heavy routines.
//!
//! Without the `parallel` feature both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mevrate::analysis::convergence_infimum;
use mevrate::orbits::{bifurcation_scan, find_periodic_points, ScanFamily, ScanSpec};
use mevrate::{Execution, MarketInstance, ToleranceDistribution, UpdateRule};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn normal_market() -> MarketInstance {
    MarketInstance::new(
        ToleranceDistribution::truncated_normal(0.4, 0.01).unwrap(),
        ToleranceDistribution::truncated_normal(0.5, 0.01).unwrap(),
        1.6,
    )
    .unwrap()
}

fn convergence(c: &mut Criterion) {
    let inst = normal_market();
    let mut g = c.benchmark_group("convergence_infimum");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 100_000), &exec, |b, &exec| {
            b.iter(|| convergence_infimum(black_box(&inst), 100_000, true, exec).unwrap())
        });
    }
    g.finish();
}

fn periods(c: &mut Criterion) {
    let inst = normal_market();
    let mut g = c.benchmark_group("find_periodic_points");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "k=7"), &exec, |b, &exec| {
            b.iter(|| find_periodic_points(black_box(&inst), UpdateRule::Full, 1.48, 7, 20_000, 1e-10, exec).unwrap())
        });
    }
    g.finish();
}

fn bifurcation(c: &mut Criterion) {
    let family = ScanFamily::Eta {
        inst: normal_market(),
        lo: 0.05,
        hi: 3.0,
    };
    let spec = ScanSpec::default();
    let mut g = c.benchmark_group("bifurcation_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, spec.n_params), &exec, |b, &exec| {
            b.iter(|| bifurcation_scan(black_box(&family), &spec, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, convergence, periods, bifurcation);
criterion_main!(benches);
