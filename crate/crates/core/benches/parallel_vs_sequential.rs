//! Each workload runs on rayon's global pool and inside a one-thread pool.
//! Build with `--no-default-features` to time the plain sequential loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;
use scenegame::gmm;
use scenegame::mrf::{solve_icm, DataCosts, EnergyModel, GameConfig, Prior, SweepOrder};
use scenegame::net::{batch_loss_and_grad, LossWeights, NetSpec, Triplet};
use scenegame::LabelField;

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let all = ThreadPoolBuilder::new().build().unwrap();
    let one = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    [("all_threads", all), ("one_thread", one)]
}

fn em_estep(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<f64> = (0..200_000).map(|_| rng.gen_range(0.0..1.0)).collect();
    let params = gmm::initial_params(&data, 3, 0).unwrap();
    let mut group = c.benchmark_group("em_estep_200k");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| gmm::e_step_with_loglik(&data, &params).unwrap()))
        });
    }
    group.finish();
}

fn checkerboard_icm(c: &mut Criterion) {
    let (w, h, l) = (128, 128, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = DataCosts::from_fn(w * h, l, |_, _| rng.gen_range(0.0..1.0)).unwrap();
    let model = EnergyModel::new(w, h, data, 0.3, Prior::Potts).unwrap();
    let init = LabelField::uniform(w, h, l, 0).unwrap();
    let cfg = GameConfig { order: SweepOrder::Checkerboard, ..GameConfig::default() };
    let mut group = c.benchmark_group("checkerboard_icm_128");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| solve_icm(&model, &init, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let net = NetSpec::default_architecture(20, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs: Vec<Vec<f64>> = (0..32).map(|_| (0..400).map(|_| rng.gen()).collect()).collect();
    let labels: Vec<usize> = (0..32).map(|i| i % 5).collect();
    let triplets: Vec<Triplet> = (0..27).map(|i| Triplet { anchor: i, positive: i + 5, negative: i + 1 }).collect();
    let weights = LossWeights::default();
    let mut group = c.benchmark_group("batch_gradient_32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| batch_loss_and_grad(&net, &inputs, &labels, &triplets, 0.5, &weights).unwrap()))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = em_estep, checkerboard_icm, batch_gradient
}
criterion_main!(benches);
