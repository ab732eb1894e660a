use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dctrace::classifiers::{MaxFeatures, MlpParams};
use dctrace::datasets::{synth_generate, synth_image, SynthConfig, SynthProfiles};
use dctrace::features::extract_beta_vector;
use dctrace::jpeg_attack::compress_image;
use dctrace::spectral::{dct2_8x8, Block8};
use dctrace::{train, FeatureTable, Hyperparams, SubsetSpec};

fn spectral(c: &mut Criterion) {
    let block = Block8::from_fn(|r, col| ((r * 31 + col * 17) % 255) as f64 - 128.0);
    c.bench_function("dct2_8x8", |b| b.iter(|| dct2_8x8(black_box(&block))));

    let profile = SynthProfiles::tiered().0[0];
    let (image, _, _) = synth_image(&profile, 512, 1).unwrap();
    c.bench_function("extract_beta_vector 512x512", |b| b.iter(|| extract_beta_vector(black_box(&image))));
    c.bench_function("compress_image 512x512 QF50", |b| b.iter(|| compress_image(black_box(&image), 50)));
}

fn features() -> FeatureTable {
    synth_generate(&SynthConfig {
        profiles: SynthProfiles::tiered(),
        n_per_class: 200,
        image_size: 64,
        seed: 2,
    })
    .unwrap()
    .feature_table()
}

fn training(c: &mut Criterion) {
    let table = features();
    let all = SubsetSpec::all();
    let mut group = c.benchmark_group("train 600x63");
    group.sample_size(10);
    let cases = [
        (
            "random_forest 100",
            Hyperparams::RandomForest {
                n_trees: 100,
                max_depth: None,
                max_features: MaxFeatures::Sqrt,
            },
        ),
        (
            "gradient_boosting 100",
            Hyperparams::GradientBoosting {
                n_trees: 100,
                learning_rate: 0.1,
                max_depth: 3,
            },
        ),
        (
            "mlp 20 epochs",
            Hyperparams::Mlp(MlpParams {
                max_epochs: 20,
                patience: 20,
                ..MlpParams::default()
            }),
        ),
    ];
    for (name, hp) in cases {
        group.bench_function(name, |b| {
            b.iter_batched(|| hp.clone(), |hp| train(&table, &all, &hp, 0), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, training);
criterion_main!(benches);
