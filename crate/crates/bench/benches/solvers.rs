use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pointmatch_core::assignment::{solve_max_matching, solve_min_cost};
use pointmatch_core::evaluation::{evaluate_dataset, Dataset, EvalConfig, Protocol};
use pointmatch_core::synth::{gen_dataset, PerturbationModel};
use pointmatch_core::train_match::match_hybrid;
use pointmatch_core::{BoolMatrix, CostMatrix, LabeledPoint, MatchConfig, PredictedPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_costs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CostMatrix {
    let values = (0..rows * cols).map(|_| rng.random::<f64>() * 100.0).collect();
    CostMatrix::new(rows, cols, values).unwrap()
}

fn min_cost(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("solve_min_cost");
    for &(n, m) in &[(16, 16), (64, 64), (64, 256), (256, 256)] {
        let costs = random_costs(&mut rng, n, m);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{m}")), &costs, |b, costs| {
            b.iter(|| solve_min_cost(black_box(costs)))
        });
    }
    group.finish();
}

fn max_matching(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("solve_max_matching");
    for &n in &[64usize, 256, 1024] {
        let adj = BoolMatrix::from_fn(n, n, |_, _| rng.random::<f64>() < 4.0 / n as f64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &adj, |b, adj| {
            b.iter(|| solve_max_matching(black_box(adj)))
        });
    }
    group.finish();
}

fn hybrid(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("match_hybrid");
    for &(n, m) in &[(10, 64), (50, 400), (100, 1000)] {
        let gts: Vec<LabeledPoint> = (0..n)
            .map(|_| LabeledPoint::new(rng.random::<f64>() * 224.0, rng.random::<f64>() * 224.0, rng.random_range(1..=4)))
            .collect();
        let preds: Vec<PredictedPoint> = (0..m)
            .map(|_| {
                let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 1e-3).collect();
                let sum: f64 = raw.iter().sum();
                PredictedPoint::new(
                    rng.random::<f64>() * 224.0,
                    rng.random::<f64>() * 224.0,
                    raw.iter().map(|v| v / sum).collect(),
                )
            })
            .collect();
        let config = MatchConfig::with_defaults(4);
        group.bench_function(format!("{n}x{m}"), |b| {
            b.iter(|| match_hybrid(black_box(&gts), black_box(&preds), &config).unwrap())
        });
    }
    group.finish();
}

fn evaluate(c: &mut Criterion) {
    let model = PerturbationModel {
        seed: 4,
        density: 200.0,
        jitter_sigma: 2.0,
        spurious_rate: 10.0,
        ..PerturbationModel::default()
    };
    let images = gen_dataset(&model, 16).unwrap();
    let mut dataset = Dataset::default();
    for (id, gts, preds) in images {
        dataset.insert(id, pointmatch_core::evaluation::ImagePoints { gts, preds });
    }
    let mut group = c.benchmark_group("evaluate");
    for protocol in Protocol::ALL {
        let config = EvalConfig::new(6.0, protocol, model.class_ids()).unwrap();
        group.bench_function(protocol.as_str(), |b| {
            b.iter(|| evaluate_dataset(black_box(&dataset), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, min_cost, max_matching, hybrid, evaluate);
criterion_main!(benches);
