use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use feastest_core::exec::Execution;
use feastest_core::norms::{normalize_columns, ColumnScaling, InstrumentMatrix, NormOrder};
use feastest_core::sim::{generate_design, simulate_study, StudyConfig};
use feastest_core::thresholds::{mc_gaussian_expectation, mc_rademacher_expectation};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn design(n: usize, l: usize) -> InstrumentMatrix {
    let raw = generate_design(n, l, 0.0, 3).unwrap();
    normalize_columns(&InstrumentMatrix::new(raw).unwrap(), ColumnScaling::MeanSquare).unwrap()
}

fn gaussian_mc(c: &mut Criterion) {
    let mut g = c.benchmark_group("gaussian_mc_n30_L60_R10000");
    let x = design(30, 60);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_gaussian_expectation(black_box(&x), NormOrder::Inf, 0.5, 10_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn rademacher_mc(c: &mut Criterion) {
    let mut g = c.benchmark_group("rademacher_mc_n200_L4_R10000");
    let x = design(200, 4);
    let y: Vec<f64> = (0..200).map(|i| (i % 2) as f64).collect();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_rademacher_expectation(black_box(&x), &y, NormOrder::Inf, 10_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn study(c: &mut Criterion) {
    let mut g = c.benchmark_group("table1_n90_L3_8reps");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = StudyConfig { reps: 8, draws: 2000, execution: exec, ..StudyConfig::table1(90, 3) };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| simulate_study(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gaussian_mc, rademacher_mc, study);
criterion_main!(benches);
