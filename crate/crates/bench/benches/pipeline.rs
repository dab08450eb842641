use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valstack_core::corpus::{FeatureColumn, FeatureKey};
use valstack_core::evaluation::auc_roc;
use valstack_core::model::{fit_logistic, train_stack, LrConfig, StackConfig, StackData, StackHyperparams};
use valstack_core::synth::synthetic_lexicons;
use valstack_core::{Source, N_DIMS};

fn score_tokens(c: &mut Criterion) {
    let (base, _) = synthetic_lexicons(&Default::default()).unwrap();
    let words: Vec<String> = base
        .entries()
        .iter()
        .map(|e| {
            let p = e.display_pattern();
            match p.strip_suffix('*') {
                Some(stem) => format!("{stem}ing"),
                None => p,
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tokens: Vec<String> = (0..10_000)
        .map(|i| {
            if rng.random_bool(0.1) {
                words[rng.random_range(0..words.len())].clone()
            } else {
                format!("filler{}", i % 1500)
            }
        })
        .collect();
    c.bench_function("score_tokens/10k", |b| b.iter(|| base.score_tokens(black_box(&tokens))));
}

fn auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| rng.random_range(0.0..1.0) + if l { 0.3 } else { 0.0 })
        .collect();
    c.bench_function("auc_roc/10k", |b| b.iter(|| auc_roc(black_box(&scores), black_box(&labels)).unwrap()));
}

fn planted(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let y = (0..n)
        .map(|i| x[[i, 0]] - 0.5 * x[[i, 1]] + rng.random_range(-1.0..1.0) > 0.0)
        .collect();
    (x, y)
}

fn lr_fit(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = planted(&mut rng, 500, 30);
    let cfg = LrConfig::default();
    c.bench_function("fit_logistic/500x30", |b| b.iter(|| fit_logistic(black_box(x.view()), &y, &cfg).unwrap()));
}

fn stack_epoch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, width) = (500, 30);
    let x: Vec<Array2<f64>> = (0..N_DIMS).map(|_| planted(&mut rng, n, width).0).collect();
    let labels: Vec<[Option<bool>; N_DIMS]> = (0..n)
        .map(|i| std::array::from_fn(|k| if i % 5 == k { None } else { Some(x[k][[i, 0]] > 0.0) }))
        .collect();
    let data = StackData::new(x, labels).unwrap();
    let features: Vec<Vec<FeatureColumn>> = (0..N_DIMS)
        .map(|_| {
            (0..width)
                .map(|j| FeatureColumn {
                    key: FeatureKey {
                        source: Source::Post,
                        category_id: j as u32 + 1,
                    },
                    name: format!("c{j}"),
                })
                .collect()
        })
        .collect();
    let cfg = StackConfig {
        hyperparams: StackHyperparams {
            epochs: 1,
            ..StackHyperparams::default()
        },
        ..StackConfig::default()
    };
    c.bench_function("stack/epoch/500x5x30", |b| {
        b.iter_batched(|| features.clone(), |f| train_stack(&data, f, &cfg).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, score_tokens, auc, lr_fit, stack_epoch);
criterion_main!(benches);
