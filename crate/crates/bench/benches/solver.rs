use criterion::{black_box, criterion_group, criterion_main, Criterion};

use guderley::collapse::{find_lambda_std, ShootOptions};
use guderley::fields::{euler_residual, solve, SolveOptions};
use guderley::polycert::{run_suite, sextic_grid};

fn lambda(c: &mut Criterion) {
    let opts = ShootOptions::default();
    c.bench_function("lambda gamma=1.4 m=2", |b| {
        b.iter(|| find_lambda_std(black_box(1.4), 2, &opts).unwrap())
    });
    c.bench_function("lambda gamma=3 m=1 (P8)", |b| {
        b.iter(|| find_lambda_std(black_box(3.0), 1, &opts).unwrap())
    });
}

fn global(c: &mut Criterion) {
    let opts = SolveOptions::default();
    c.bench_function("solve gamma=5/3 m=2", |b| {
        b.iter(|| solve(black_box(5.0 / 3.0), 2, &opts).unwrap())
    });
    let sol = solve(1.4, 2, &opts).unwrap();
    let pts: Vec<(f64, f64)> = (0..64)
        .map(|k| (-0.9 + 0.028 * k as f64, 0.3 + 0.02 * k as f64))
        .collect();
    c.bench_function("euler residual 64 points", |b| {
        b.iter(|| euler_residual(&sol, black_box(&pts), 1e-3).unwrap())
    });
}

fn certify(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    g.bench_function("sextic grid m=2", |b| {
        b.iter(|| sextic_grid(2, black_box(20)))
    });
    g.bench_function("full suite", |b| b.iter(run_suite));
    g.finish();
}

criterion_group!(benches, lambda, global, certify);
criterion_main!(benches);
