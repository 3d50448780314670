use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sincfront::nn::layers::Conv1d;
use sincfront::train::equal_error_rate;
use sincfront::{FilterSpec, ScoredTrial, SincLayerParams, Tensor, WindowKind};

fn noise(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn sinc_layer(c: &mut Criterion) {
    let mut g = c.benchmark_group("sinc");
    for &length in &[101usize, 251] {
        let spec = FilterSpec::new(length, WindowKind::Hamming, 16000.0).unwrap();
        let layer = SincLayerParams::mel(80, spec).unwrap();
        g.bench_with_input(BenchmarkId::new("materialize", length), &layer, |b, l| {
            b.iter(|| black_box(l.materialize().unwrap()))
        });
        let x = noise(&[8, 1, 3200], 1);
        g.bench_with_input(BenchmarkId::new("forward_8x3200", length), &layer, |b, l| {
            b.iter(|| black_box(l.forward(&x).unwrap()))
        });
        let y = l_forward_shape(&layer, &x);
        g.bench_with_input(BenchmarkId::new("backward_params_8x3200", length), &layer, |b, l| {
            b.iter(|| black_box(l.backward_params(&x, &y).unwrap()))
        });
    }
    g.finish();
}

fn l_forward_shape(layer: &SincLayerParams, x: &Tensor) -> Tensor {
    let shape = layer.forward(x).unwrap().shape().to_vec();
    noise(&shape, 2)
}

fn conv1d(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let conv = Conv1d::glorot(80, 60, 5, true, &mut rng);
    let x = noise(&[8, 80, 983], 4);
    let up = noise(&conv.forward(&x).unwrap().shape().to_vec(), 5);
    c.bench_function("conv1d/forward_80to60_k5", |b| b.iter(|| black_box(conv.forward(&x).unwrap())));
    c.bench_function("conv1d/backward_80to60_k5", |b| {
        b.iter(|| black_box(conv.backward(&x, &up, true).unwrap()))
    });
}

fn eer(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials: Vec<ScoredTrial> = (0..11_000)
        .map(|i| {
            let is_genuine = i % 11 == 0;
            let shift = if is_genuine { 0.3 } else { 0.0 };
            ScoredTrial {
                score: rng.gen_range(-1.0..1.0) + shift,
                is_genuine,
            }
        })
        .collect();
    c.bench_function("eer/11000_trials", |b| b.iter(|| black_box(equal_error_rate(&trials).unwrap())));
}

criterion_group!(benches, sinc_layer, conv1d, eer);
criterion_main!(benches);
