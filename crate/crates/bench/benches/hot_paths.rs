use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use eegalign_core::data::{average_repetitions, synth_generate, SynthConfig};
use eegalign_core::diffcore::Graph;
use eegalign_core::losses::{alignment_loss, LossAblation};
use eegalign_core::models::{AlignedModel, BackboneSpec};
use eegalign_core::rsa::{eeg_decoding_rdm, model_rdm, spearman, DecodingConfig};
use eegalign_core::trainer::pseudo_labels;
use eegalign_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_data() -> eegalign_core::data::SynthOutput {
    synth_generate(&SynthConfig {
        subjects: 1,
        fmri_subjects: 0,
        fmri_counts: [0, 0, 0],
        ..SynthConfig::default()
    })
    .unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::uniform(&[8, 16, 8, 8], -1.0, 1.0, &mut rng);
    let w = Tensor::uniform(&[32, 16, 3, 3], -0.3, 0.3, &mut rng);
    let b = Tensor::zeros(&[32]);
    c.bench_function("conv2d 8x16x8x8 -> 32, forward+backward", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let (xi, wi, bi) = (g.param(x.clone()), g.param(w.clone()), g.param(b.clone()));
            let y = g.conv2d(xi, wi, bi, 1, 1).unwrap();
            let s = g.sum(y).unwrap();
            g.backward(s).unwrap()
        })
    });
}

fn training_step(c: &mut Criterion) {
    let out = small_data();
    let train = average_repetitions(&out.train[0]);
    let rows: Vec<usize> = (0..8).collect();
    let images = train.images.select_rows(&rows).unwrap();
    let targets = train.mean_vectors().select_rows(&rows).unwrap();
    let model = AlignedModel::new(BackboneSpec::default(), train.eeg_dim(), 0).unwrap();
    let labels = pseudo_labels(&model.backbone, &images).unwrap();
    c.bench_function("alignment loss forward+backward, batch 8", |bench| {
        bench.iter(|| {
            let mut g = Graph::new();
            let x = g.input(images.clone());
            let real = g.input(targets.clone());
            let o = model.forward(&mut g, x, true).unwrap();
            let l = alignment_loss(
                &mut g,
                o.logits,
                &labels,
                o.generated,
                real,
                100.0,
                LossAblation::default(),
            )
            .unwrap();
            g.backward(l.total).unwrap()
        })
    });
}

fn decoding(c: &mut Criterion) {
    let out = small_data();
    let test = &out.test[0];
    let cfg = DecodingConfig::default();
    let mut group = c.benchmark_group("decoding");
    group.sample_size(10);
    group.bench_function(
        "pairwise RDM, 16 images x 80 reps, one timepoint",
        |bench| bench.iter(|| eeg_decoding_rdm(test, 10, 0, &cfg).unwrap()),
    );
    group.finish();
}

fn rsa(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let feats = Tensor::uniform(&[100, 512], -1.0, 1.0, &mut rng);
    c.bench_function("model RDM, 100 x 512", |bench| {
        bench.iter(|| model_rdm(&feats, "x").unwrap())
    });
    let a: Vec<f64> = (0..4950).map(|_| rng.random_range(0.0..1.0)).collect();
    let b: Vec<f64> = (0..4950).map(|_| rng.random_range(0.0..1.0)).collect();
    c.bench_function("spearman, 4950 pairs", |bench| {
        bench.iter_batched(
            || (a.clone(), b.clone()),
            |(a, b)| spearman(&a, &b).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, conv, training_step, decoding, rsa);
criterion_main!(benches);
