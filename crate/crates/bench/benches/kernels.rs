use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use orthotropic_core::flux_models::{flux_into, hessian};
use orthotropic_core::scenarios::DefaultScenario;
use orthotropic_core::solver::{implicit_step, SolverConfig};
use orthotropic_core::ProblemParams;

fn sample_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| (0..n).map(|i| ((k * 7 + i * 3) % 41) as f64 / 10.0 - 2.0).collect())
        .collect()
}

fn bench_flux(c: &mut Criterion) {
    let mut group = c.benchmark_group("flux");
    for (p, eps) in [(2.0, 0.1), (3.0, 0.1), (4.5, 0.01)] {
        let params = ProblemParams::new(p, vec![1.0, 0.5, 0.25], eps).unwrap();
        let points = sample_points(3, 1024);
        let mut out = vec![0.0; 3];
        group.bench_with_input(BenchmarkId::new("flux_into", format!("p={p}")), &points, |b, pts| {
            b.iter(|| {
                for xi in pts {
                    flux_into(black_box(xi), &params, &mut out);
                }
                black_box(out[0])
            })
        });
        group.bench_with_input(BenchmarkId::new("hessian", format!("p={p}")), &points, |b, pts| {
            b.iter(|| pts.iter().map(|xi| hessian(black_box(xi), &params).unwrap().get(0, 0)).sum::<f64>())
        });
    }
    group.finish();
}

fn bench_implicit_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("implicit_step");
    group.sample_size(10);
    let config = SolverConfig::default();
    for nodes in [17, 33] {
        let sc = DefaultScenario {
            nodes_per_axis: nodes,
            time_steps: Some(20),
            ..DefaultScenario::default()
        };
        let problem = sc.problem(0.05, &sc.data().unwrap()).unwrap();
        let grid = problem.grid().clone();
        let previous = problem.reference().slice(0).to_vec();
        group.bench_function(BenchmarkId::from_parameter(nodes), |b| {
            b.iter(|| implicit_step(black_box(&previous), grid.dt(), 1, &problem, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_flux, bench_implicit_step);
criterion_main!(benches);
