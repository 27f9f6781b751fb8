use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fbsplit::flow::{certified_trajectory, exp_formula, uniform_times};
use fbsplit::operators::fb_sweep;
use fbsplit::problems::{catalog, default_linear1d, default_skew2d};
use fbsplit::splitting::run_fb_exact;
use fbsplit::{verify_kobayashi, StepSchedule};

fn iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_fb");
    for p in catalog() {
        let schedule = StepSchedule::power(p.pair.theta_max() / 2.0, 0.75).unwrap();
        group.bench_with_input(BenchmarkId::new("traced_1000", &p.id), &p, |b, p| {
            b.iter(|| run_fb_exact(&p.pair, &schedule, black_box(&p.default_x0), 1000).unwrap())
        });
        let h = p.pair.theta_max() / 2.0;
        group.bench_with_input(BenchmarkId::new("sweep_1000", &p.id), &p, |b, p| {
            b.iter(|| fb_sweep(&p.pair, h, black_box(&p.default_x0), 1000).unwrap())
        });
    }
    group.finish();
}

fn two_sequence_bound(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_kobayashi");
    for k in [50, 200] {
        let p = default_skew2d();
        let first = StepSchedule::constant(p.pair.theta_max() / 2.0, None).unwrap();
        let second = StepSchedule::power(p.pair.theta_max() / 4.0, 0.75).unwrap();
        let t1 = run_fb_exact(&p.pair, &first, &p.default_x0, k).unwrap();
        let t2 = run_fb_exact(&p.pair, &second, &p.default_x0.scale(-1.0).unwrap(), k).unwrap();
        let u = fbsplit::Vector::zeros(2);
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| verify_kobayashi(&p.pair, &t1, &t2, &u).unwrap())
        });
    }
    group.finish();
}

fn flow(c: &mut Criterion) {
    let lin = default_linear1d();
    let mut group = c.benchmark_group("flow");
    for m in [64, 1024, 16384] {
        group.bench_with_input(BenchmarkId::new("exp_formula", m), &m, |b, &m| {
            b.iter(|| exp_formula(&lin.pair, black_box(&lin.default_x0), 1.0, m).unwrap())
        });
    }
    let times = uniform_times(4.0, 64);
    group.sample_size(10);
    group.bench_function("certified_trajectory_linear1d", |b| {
        b.iter(|| certified_trajectory(&lin.pair, &lin.default_x0, &times, 1e-2, 50_000_000).unwrap())
    });
    group.finish();
}

criterion_group!(benches, iteration, two_sequence_bound, flow);
criterion_main!(benches);
