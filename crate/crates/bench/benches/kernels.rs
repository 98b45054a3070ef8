use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mim_bench::{prepared, shipped};
use mim_core::align::{alignment_problem, solve_exhaustive, solve_greedy};
use mim_core::probkit::{ib_solve, rd_curve, Distortion, IbOptions};

fn ib(c: &mut Criterion) {
    let cfg = shipped("scenarios/h1.json");
    let world = mim_core::build_world(&cfg.world).unwrap();
    let joint = world.obs_target_joint(0).clone();
    let opts = IbOptions::default();
    c.bench_function("ib_solve m=4 beta=40", |b| {
        b.iter(|| ib_solve(black_box(&joint), 4, 40.0, &opts, 7))
    });
}

fn rd(c: &mut Criterion) {
    let cfg = shipped("scenarios/h1.json");
    let world = mim_core::build_world(&cfg.world).unwrap();
    let source = world.obs_marginal().clone();
    let grid: Vec<f64> = (0..=10).map(|i| 0.07 * i as f64).collect();
    let d = Distortion::hamming(source.len());
    c.bench_function("rd_curve 11 points", |b| b.iter(|| rd_curve(black_box(&source), &d, &grid)));
}

fn align(c: &mut Criterion) {
    let (cfg, p) = prepared("scenarios/h3.json");
    let (s, r) = (p.agent("sender").unwrap(), p.agent("receiver").unwrap());
    let x = s.space.admissible_indices()[0];
    let (problem, _) = alignment_problem(
        &p.world,
        &s.space.candidates[x],
        s.agent.state.zeta.kappa,
        &r.agent.state,
        &r.space,
    );
    let delta = cfg.engine.delta;
    c.bench_function("align exhaustive", |b| {
        b.iter(|| solve_exhaustive(black_box(&problem), delta, 6).unwrap())
    });
    c.bench_function("align greedy", |b| b.iter(|| solve_greedy(black_box(&problem), delta).unwrap()));
}

fn engine(c: &mut Criterion) {
    let cfg = shipped("runs/two_agent.json");
    c.bench_function("engine two_agent 50 steps", |b| b.iter(|| mim_core::run(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, ib, rd, align, engine);
criterion_main!(benches);
