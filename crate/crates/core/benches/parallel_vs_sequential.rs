use std::hint::black_box;

use bicurtail::exact::{power_exact_with, stopping_pmf_exact_with};
use bicurtail::par::map_slice;
use bicurtail::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo_bench(c: &mut Criterion) {
    let design = BivariateDesign::new(121, 19, 18).unwrap();
    let params = make_params(0.1, 0.2, 0.1).unwrap();
    let mut g = c.benchmark_group("monte_carlo_2000");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_with(&design, &params, black_box(2000), 7, 0.95, exec).unwrap())
        });
    }
    g.finish();
}

fn pmf_bench(c: &mut Criterion) {
    let design = BivariateDesign::new(1154, 143, 135).unwrap();
    let params = make_params(0.065, 0.13, 0.1).unwrap();
    let mut g = c.benchmark_group("stopping_pmf_exact");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| stopping_pmf_exact_with(&design, black_box(&params), exec))
        });
    }
    g.finish();
}

fn power_grid_bench(c: &mut Criterion) {
    let design = BivariateDesign::new(121, 19, 18).unwrap();
    let grid: Vec<(f64, f64)> = (1..=20)
        .flat_map(|i| (1..=20).map(move |j| (0.01 * i as f64, 0.015 * j as f64)))
        .collect();
    let mut g = c.benchmark_group("power_grid_400");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_slice(exec, &grid, |&(tx, ty)| {
                    let p = make_params(tx, ty, 0.0).unwrap();
                    power_exact_with(&design, &p, Execution::Sequential)
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo_bench, pmf_bench, power_grid_bench);
criterion_main!(benches);
