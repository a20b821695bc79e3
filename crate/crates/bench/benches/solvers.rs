use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use nonlocal_bench::{bump_solver, rough_primitive, shock_oracle};
use nonlocal_core::hj::{mollify, sup_convolution};

fn solver_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("nonlocal_step");
    for k in [16.0, 64.0, 256.0] {
        let (solver, datum) = bump_solver(k, 0.5);
        let dt = solver.max_dt();
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            let mut q = datum.values.clone();
            b.iter(|| solver.step(black_box(&mut q), dt).unwrap());
        });
    }
    g.finish();
}

fn full_solve(c: &mut Criterion) {
    let (solver, datum) = bump_solver(32.0, 0.1);
    c.bench_function("nonlocal_solve_k32_t0.1", |b| b.iter(|| solver.solve(black_box(&datum)).unwrap()));
}

fn hopf_lax(c: &mut Criterion) {
    let mut g = c.benchmark_group("hopf_lax_eval_many");
    for n in [256usize, 2048] {
        let (eval, xs) = shock_oracle(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| eval.eval_many(0.5, black_box(&xs)).unwrap())
        });
    }
    g.finish();
}

fn envelopes(c: &mut Criterion) {
    let mut g = c.benchmark_group("regularization");
    for n in [1024usize, 8192] {
        let (q, dx) = rough_primitive(n);
        g.bench_with_input(BenchmarkId::new("sup_convolution", n), &n, |b, _| {
            b.iter(|| sup_convolution(black_box(&q), dx, 0.05).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mollify", n), &n, |b, _| {
            b.iter(|| mollify(black_box(&q), dx, 0.05).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, solver_step, full_solve, hopf_lax, envelopes);
criterion_main!(benches);
