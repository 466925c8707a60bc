use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use groundlens::annotations::{rasterize, TierSet};
use groundlens::metrics::{energy, pointing, s_iou};
use groundlens::relevance::upsample::upsample_bilinear;
use groundlens::toymodel::{backward, forward, ToyModelConfig};
use groundlens::{attribute, CueBox, Method, Tier};
use groundlens_bench::workload;
use std::hint::black_box;

fn relevance(c: &mut Criterion) {
    let mut group = c.benchmark_group("attribute");
    for (name, config) in [
        ("default", ToyModelConfig::default()),
        ("grid6_t8", ToyModelConfig { grid_h: 6, grid_w: 6, frames: 8, patch_size: 5, ..Default::default() }),
    ] {
        let w = workload(&config);
        for method in [Method::Chefer, Method::CheferT] {
            group.bench_with_input(BenchmarkId::new(method.as_str(), name), &w.trace, |b, trace| {
                b.iter(|| attribute(black_box(trace), method).unwrap())
            });
        }
    }
    group.finish();
}

fn upsampling(c: &mut Criterion) {
    let grid: Vec<f64> = (0..196).map(|i| (i % 17) as f64 / 16.0).collect();
    c.bench_function("upsample_14x14_to_224x224", |b| {
        b.iter(|| upsample_bilinear(black_box(&grid), 14, 14, 224, 224))
    });
}

fn metrics(c: &mut Criterion) {
    let (h, w) = (224, 224);
    let frame: Vec<f64> = (0..h * w).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let boxes = [
        CueBox { tier: Tier::Primary, x: 0.4, y: 0.4, w: 0.1, h: 0.1 },
        CueBox { tier: Tier::Secondary, x: 0.3, y: 0.3, w: 0.3, h: 0.3 },
        CueBox { tier: Tier::Common, x: 0.0, y: 0.7, w: 0.2, h: 0.2 },
    ];
    let mask = rasterize(&boxes, TierSet::PSC, h, w);
    c.bench_function("rasterize_224", |b| b.iter(|| rasterize(black_box(&boxes), TierSet::PSC, h, w)));
    c.bench_function("frame_metrics_224", |b| {
        b.iter(|| {
            let f = black_box(&frame);
            (energy(f, &mask).unwrap(), pointing(f, &mask).unwrap(), s_iou(f, &mask).unwrap())
        })
    });
}

fn toy_model(c: &mut Criterion) {
    let w = workload(&ToyModelConfig::default());
    c.bench_function("toy_forward", |b| b.iter(|| forward(&w.weights, black_box(&w.tokens)).unwrap()));
    c.bench_function("toy_backward", |b| {
        b.iter(|| backward(&w.weights, black_box(&w.tokens), w.target).unwrap())
    });
}

criterion_group!(benches, relevance, upsampling, metrics, toy_model);
criterion_main!(benches);
