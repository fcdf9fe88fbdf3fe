use criterion::{criterion_group, criterion_main, Criterion};

use mfglab_core::exact::{invariant_measure, subjective_functions, value_iteration};
use mfglab_core::fixtures;
use mfglab_core::learners::run_naive_learning;
use mfglab_core::policy::StationaryPolicy;
use mfglab_core::JointPolicy;

fn uniform_joint(game: &mfglab_core::GameSpec) -> JointPolicy {
    let p = StationaryPolicy::uniform(game.channel_tag(), game.n_actions());
    JointPolicy::new(vec![p; game.n_players()])
}

fn bench_chain_kernel(c: &mut Criterion) {
    let game = fixtures::mfg4();
    let joint = uniform_joint(&game);
    c.bench_function("exact_chain_kernel/mfg4", |b| {
        b.iter(|| game.exact_chain_kernel(&joint).unwrap())
    });
}

fn bench_invariant_measure(c: &mut Criterion) {
    let game = fixtures::mfg4();
    let joint = uniform_joint(&game);
    let kernel = game.exact_chain_kernel(&joint).unwrap();
    c.bench_function("invariant_measure/mfg4", |b| {
        b.iter(|| invariant_measure(&kernel, 1e-12).unwrap())
    });
}

fn bench_value_iteration(c: &mut Criterion) {
    let game = fixtures::mfg2_global();
    let joint = uniform_joint(&game);
    let omdp = mfglab_core::exact::induced_mdp(&game, 0, &joint).unwrap();
    c.bench_function("value_iteration/mfg2-global", |b| {
        b.iter(|| value_iteration(&omdp.mdp, 1e-10))
    });
}

fn bench_subjective_functions(c: &mut Criterion) {
    let game = fixtures::mfg2_compressed();
    let joint = uniform_joint(&game);
    c.bench_function("subjective_functions/mfg2-compressed", |b| {
        b.iter(|| subjective_functions(&game, 0, &joint).unwrap())
    });
}

fn bench_naive_learning(c: &mut Criterion) {
    let game = fixtures::mfg2();
    let joint = uniform_joint(&game);
    c.bench_function("naive_learning_10k/mfg2", |b| {
        b.iter(|| run_naive_learning(&game, &joint, 10_000, 1, None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_chain_kernel,
    bench_invariant_measure,
    bench_value_iteration,
    bench_subjective_functions,
    bench_naive_learning
);
criterion_main!(benches);
