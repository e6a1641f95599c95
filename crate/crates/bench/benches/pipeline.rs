use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sepbnb_core::{make, solve, BenchmarkId, Interval, IntervalVector, Rounding, SolverConfig};

fn interval_ops(c: &mut Criterion) {
    let a = Interval::new(-1.3, 2.7).unwrap();
    let b = Interval::new(0.4, 3.1).unwrap();
    let mut group = c.benchmark_group("interval");
    group.bench_function("mul", |bench| {
        bench.iter(|| black_box(a).mul(&black_box(b)))
    });
    group.bench_function("sin", |bench| bench.iter(|| black_box(a).sin()));
    group.bench_function("pow4", |bench| {
        bench.iter(|| black_box(a).pow_int(4).unwrap())
    });
    group.finish();
}

fn tape_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("tape");
    for (id, n) in [
        (BenchmarkId::StyblinskiTang, 8),
        (BenchmarkId::Shubert, 4),
        (BenchmarkId::Salomon, 8),
    ] {
        let program = make(id, n).unwrap();
        let domain = program.default_box().clone();
        let mut tape = program.build_tape(Rounding::Exact);
        group.bench_function(format!("forward_{id}_{n}"), |bench| {
            bench.iter(|| tape.forward(black_box(&domain)).unwrap())
        });
    }
    let program = make(BenchmarkId::StyblinskiTang, 8).unwrap();
    let mut tape = program
        .record(program.default_box(), Rounding::Exact)
        .unwrap();
    group.bench_function("reverse_styblinski_tang_8", |bench| {
        bench.iter(|| tape.reverse_sweep().unwrap())
    });
    group.finish();
}

fn solver_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    let program = make(BenchmarkId::Exponential, 4).unwrap();
    let domain = program.default_box().clone();
    let labels: Vec<String> = program
        .separator_marks()
        .iter()
        .map(|m| m.label.clone())
        .collect();
    for separation in [false, true] {
        let mut cfg = SolverConfig::defaults_for(&domain);
        cfg.separation = separation;
        let run_labels: Vec<String> = if separation {
            labels.clone()
        } else {
            Vec::new()
        };
        group.bench_function(format!("exponential_4_sep_{separation}"), |bench| {
            bench.iter(|| solve(&program, &domain, &run_labels, &cfg).unwrap())
        });
    }
    let domain8 = IntervalVector::uniform(8, -2.1, 2.0).unwrap();
    let program8 = make(BenchmarkId::RecursiveExponential, 8).unwrap();
    let labels8: Vec<String> = program8
        .separator_marks()
        .iter()
        .map(|m| m.label.clone())
        .collect();
    let cfg8 = SolverConfig::defaults_for(&domain8);
    group.bench_function("recursive_exponential_8_sep_true", |bench| {
        bench.iter(|| solve(&program8, &domain8, &labels8, &cfg8).unwrap())
    });
    group.finish();
}

criterion_group!(benches, interval_ops, tape_sweeps, solver_runs);
criterion_main!(benches);
