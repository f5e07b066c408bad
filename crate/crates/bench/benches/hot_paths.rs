use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uijepa_core::jepa::{EncoderConfig, JepaConfig, JepaModel, PredictorConfig};
use uijepa_core::masking::{build_mask_set, MaskingConfig};
use uijepa_core::metrics::{CosineNorm, HashedEmbedder, ScoreReport};
use uijepa_core::numerics::{Array, Graph, ScheduleState};
use uijepa_core::video::{GridDims, TokenGrid, TOKEN_DIM};

fn random(shape: &[usize], seed: u64) -> Array<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 128, 192] {
        let (a, b) = (random(&[128, n], 1), random(&[n, n], 2));
        group.throughput(Throughput::Elements((2 * 128 * n * n) as u64));
        group.bench_function(format!("fwd+bwd/128x{n}x{n}"), |bench| {
            bench.iter(|| {
                let mut g = Graph::new();
                let (x, w) = (g.leaf(a.clone()), g.leaf(b.clone()));
                let y = g.matmul(x, w).unwrap();
                let s = g.sum(y);
                g.backward(s).unwrap()
            })
        });
    }
    group.finish();
}

fn attention(c: &mut Criterion) {
    let q = random(&[128, 192], 3);
    c.bench_function("attention/128x192 3 heads fwd+bwd", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let x = g.leaf(q.clone());
            let y = g.attention(x, x, x, 3, false).unwrap();
            let s = g.sum(y);
            g.backward(s).unwrap()
        })
    });
}

fn grid(seed: u64) -> TokenGrid {
    let dims = GridDims::for_resolution(64);
    TokenGrid { tokens: random(&[dims.len(), TOKEN_DIM], seed), coords: dims.coords(), dims }
}

fn jepa_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("jepa");
    group.sample_size(10);
    let config = JepaConfig {
        encoder: EncoderConfig { depth: 2, width: 64, heads: 2, mlp_ratio: 4.0 },
        predictor: PredictorConfig { depth: 1, width: 32, heads: 2, mlp_ratio: 4.0 },
        batch_size: 2,
        schedule: ScheduleState::reference(1000, 10),
        ..JepaConfig::default()
    };
    let clips = [grid(4), grid(5)];
    group.bench_function("train_step/64px batch 2", |bench| {
        bench.iter_batched(
            || JepaModel::<f32>::new(config).unwrap(),
            |mut model| {
                let masks: Vec<_> = clips.iter().enumerate().map(|(j, g)| model.masks_for(0, j, g).unwrap()).collect();
                let batch: Vec<_> = clips.iter().zip(&masks).collect();
                model.train_step(&batch).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn masking(c: &mut Criterion) {
    let dims = GridDims::for_resolution(384);
    let cfg = MaskingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    c.bench_function("masks/24x24 three groups", |bench| bench.iter(|| build_mask_set(&cfg, dims, &mut rng).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let pairs: Vec<(String, String)> = (0..100)
        .map(|i| (format!("call contact number {i} on mobile now"), format!("call contact number {} on mobile", i % 7)))
        .collect();
    let embedder = HashedEmbedder::default();
    c.bench_function("metrics/score 100 pairs", |bench| {
        bench.iter(|| {
            ScoreReport::compute(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())), &embedder, CosineNorm::ShiftScale)
        })
    });
}

criterion_group!(benches, matmul, attention, jepa_step, masking, metrics);
criterion_main!(benches);
